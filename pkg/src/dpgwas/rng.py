"""Seeded, splittable random streams.

Every randomized routine takes a :class:`numpy.random.Generator`.  Derived
streams come from ``(seed, *keys)`` through ``SeedSequence`` spawn keys, so
repetition ``k`` gets the same stream whether run first, last or in a
worker thread.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(seq))


def fresh_seed() -> int:
    """A seed drawn from OS entropy (for explicit ``--entropy`` runs)."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
