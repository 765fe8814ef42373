"""JS scores and the LocSig-style release.

The JS score of a table is the number of single-individual moves needed to
reach a table whose significance status differs (p below vs not below the
threshold), positive when the table is significant and negative otherwise.
Significance uses the 2-df chi-square p-value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .mechanisms import MechanismOutput, ReleaseConfig, release_with_selection_scores
from .stats import chi2_statistics, is_significant, score_tables
from .tables import ALL_MOVES, GenotypeTable, require_valid

MOVE_DELTAS = np.array([m.delta for m in ALL_MOVES], dtype=np.int64)

# sensitivity of the JS score under the one-individual neighbor relation
JS_SENSITIVITY = 1.0


class JsScoreUnreachable(ValueError):
    """No significance flip was found within the search budget."""

    def __init__(self, message: str, snp_ids: Sequence[str] = ()):
        self.snp_ids = list(snp_ids)
        super().__init__(message)


@dataclass(frozen=True)
class JsScoreConfig:
    threshold_p: float
    search: Literal["greedy", "exhaustive"] = "greedy"
    max_depth: int | None = None  # None -> 2N per table

    def __post_init__(self):
        if not 0 < self.threshold_p < 1:
            raise ValueError(f"threshold_p must be in (0, 1), got {self.threshold_p}")
        if self.search not in ("greedy", "exhaustive"):
            raise ValueError(f"search must be 'greedy' or 'exhaustive', got {self.search!r}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")

    def depth_for(self, N: int) -> int:
        return self.max_depth if self.max_depth is not None else 2 * N


def _valid_mask(cand: np.ndarray) -> np.ndarray:
    return (cand >= 0).all(axis=-1) & ((cand[..., :3] + cand[..., 3:]) > 0).all(axis=-1)


def greedy_search(counts: np.ndarray, threshold_p: float, max_depth) -> tuple[np.ndarray, np.ndarray]:
    """Batched greedy walk toward a significance flip.

    Each step takes the admissible move with the largest chi-square change
    in the flip-ward direction (down if significant, up if not); ties go to
    the earlier move in ``ALL_MOVES``.  A row is stuck once no move helps.

    Returns ``(steps, ok)``: path lengths and a mask of rows that flipped.
    """
    cur = np.array(counts, dtype=np.int64).reshape(-1, 6)
    n = cur.shape[0]
    depth_cap = np.broadcast_to(np.asarray(max_depth, dtype=np.int64), (n,))
    y = chi2_statistics(cur)
    start_sig = is_significant(y, threshold_p)
    direction = np.where(start_sig, 1.0, -1.0)
    steps = np.zeros(n, dtype=np.int64)
    ok = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    depth = 0
    while active.any():
        depth += 1
        active &= depth <= depth_cap
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        cand = cur[idx, None, :] + MOVE_DELTAS[None, :, :]
        valid = _valid_mask(cand)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_cand = chi2_statistics(cand)
        gain = direction[idx, None] * (y[idx, None] - y_cand)
        gain = np.where(valid, gain, -np.inf)
        best = np.argmax(gain, axis=1)
        rows = np.arange(idx.size)
        best_gain = gain[rows, best]
        stuck = ~(best_gain > 0)
        active[idx[stuck]] = False
        go = ~stuck
        moved_idx = idx[go]
        cur[moved_idx] = cand[rows[go], best[go]]
        y[moved_idx] = y_cand[rows[go], best[go]]
        steps[moved_idx] = depth
        flipped = is_significant(y[moved_idx], threshold_p) != start_sig[moved_idx]
        ok[moved_idx[flipped]] = True
        active[moved_idx[flipped]] = False
    return steps, ok


def _signed(sig: bool, magnitude: int) -> int:
    return int(magnitude) if sig else -int(magnitude)


def js_score_greedy(table: GenotypeTable, cfg: JsScoreConfig) -> int:
    require_valid(table)
    steps, ok = greedy_search(np.array([table.counts]), cfg.threshold_p, cfg.depth_for(table.N))
    if not ok[0]:
        raise JsScoreUnreachable(
            f"greedy search found no flip for {table.snp_id or table.counts}", [table.snp_id])
    sig = bool(is_significant(chi2_statistics(np.array(table.counts)), cfg.threshold_p))
    return _signed(sig, steps[0])


def js_score_exhaustive(table: GenotypeTable, cfg: JsScoreConfig) -> int:
    """Breadth-first shortest flip distance; exact, for small tables only."""
    require_valid(table)
    start = np.array(table.counts, dtype=np.int64)
    sig = bool(is_significant(chi2_statistics(start), cfg.threshold_p))
    seen = {table.counts}
    frontier = start[None, :]
    for depth in range(1, cfg.depth_for(table.N) + 1):
        cand = (frontier[:, None, :] + MOVE_DELTAS[None, :, :]).reshape(-1, 6)
        cand = cand[_valid_mask(cand)]
        fresh = []
        for row in map(tuple, cand.tolist()):
            if row not in seen:
                seen.add(row)
                fresh.append(row)
        if not fresh:
            break
        frontier = np.array(fresh, dtype=np.int64)
        flips = is_significant(chi2_statistics(frontier), cfg.threshold_p) != sig
        if flips.any():
            return _signed(sig, depth)
    raise JsScoreUnreachable(
        f"no significance flip reachable for {table.snp_id or table.counts}", [table.snp_id])


def js_score(table: GenotypeTable, cfg: JsScoreConfig) -> int:
    if cfg.search == "exhaustive":
        return js_score_exhaustive(table, cfg)
    return js_score_greedy(table, cfg)


def js_scores(tables: Sequence[GenotypeTable], cfg: JsScoreConfig) -> np.ndarray:
    """Signed JS scores for a panel, in input order."""
    if not tables:
        return np.zeros(0, dtype=np.int64)
    if cfg.search == "exhaustive":
        return np.array([js_score_exhaustive(t, cfg) for t in tables], dtype=np.int64)
    for t in tables:
        require_valid(t)
    counts = np.array([t.counts for t in tables], dtype=np.int64)
    depth = np.array([cfg.depth_for(t.N) for t in tables], dtype=np.int64)
    steps, ok = greedy_search(counts, cfg.threshold_p, depth)
    if not ok.all():
        bad = [tables[i].snp_id for i in np.flatnonzero(~ok)]
        raise JsScoreUnreachable(f"greedy search found no flip for {len(bad)} SNP(s): "
                                 f"{', '.join(bad[:5])}", bad)
    sig = is_significant(chi2_statistics(counts), cfg.threshold_p)
    return np.where(sig, steps, -steps)


def locsig_release(tables: Sequence[GenotypeTable], cfg: JsScoreConfig,
                   release_config: ReleaseConfig) -> MechanismOutput:
    """Select on JS scores with the exponential route, release noisy true scores.

    ``release_config.sensitivity`` is the sensitivity of the released
    statistic; selection always uses the JS score's sensitivity of 1.
    """
    if release_config.mechanism != "locsig":
        raise ValueError(f"expected mechanism 'locsig', got {release_config.mechanism!r}")
    true_scores = score_tables(tables, release_config.score)
    js = js_scores(tables, cfg)
    return release_with_selection_scores(true_scores, js, JS_SENSITIVITY, release_config)
