"""Differentially private top-M release of SNP scores.

Two selection routes share one release step:

* Laplace route: perturb every score with Laplace(0, 4Ms/eps), keep the M
  largest perturbed values.
* Exponential route: draw M distinct SNPs one after another, each with
  probability proportional to ``exp(eps * q / (4Ms))`` over what is left.

Either way the released values are the TRUE scores of the chosen SNPs plus
fresh Laplace(0, 2Ms/eps) noise.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .rng import MAX_SEED, make_rng
from .stats import ScoredSnp

MECHANISMS = ("laplace", "exponential", "locsig")
SCORES = ("chi2", "allelic")


@dataclass(frozen=True)
class ReleaseConfig:
    epsilon: float
    M: int
    mechanism: str = "exponential"
    score: str = "chi2"
    sensitivity: float = 1.0
    projection_C: float | None = None
    seed: int = 0
    threshold_p: float | None = None  # locsig only

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be finite and > 0, got {self.epsilon}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}, got {self.mechanism!r}")
        if self.score not in SCORES:
            raise ValueError(f"score must be one of {SCORES}, got {self.score!r}")
        if not (math.isfinite(self.sensitivity) and self.sensitivity > 0):
            raise ValueError(f"sensitivity must be finite and > 0, got {self.sensitivity}")
        if self.projection_C is not None and not self.projection_C > 0:
            raise ValueError(f"projection threshold must be > 0, got {self.projection_C}")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.mechanism == "locsig":
            if self.threshold_p is None or not 0 < self.threshold_p < 1:
                raise ValueError("locsig needs threshold_p in (0, 1)")

    def check_panel(self, n_snps: int) -> None:
        if self.M > n_snps:
            raise ValueError(f"M={self.M} exceeds the number of SNPs ({n_snps})")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ReleaseConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class MechanismOutput:
    released: list[tuple[str, float]]
    config: ReleaseConfig
    selection: list[str] = field(default_factory=list)  # draw order (exponential) or rank order

    def ids(self) -> list[str]:
        return [snp for snp, _ in self.released]


def laplace_from_uniform(u, scale: float):
    """Inverse CDF of Laplace(0, scale) at centred uniform ``u`` in (-1/2, 1/2)."""
    u = np.asarray(u, dtype=np.float64)
    out = -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return out if out.ndim else float(out)


def laplace_sample(rng: np.random.Generator, scale: float, size=None):
    if not scale > 0:
        raise ValueError(f"Laplace scale must be > 0, got {scale}")
    u = rng.random(size) - 0.5
    # u == -0.5 (probability 2**-53) would give -inf; send it to the median
    u = np.where(u == -0.5, 0.0, u)
    return laplace_from_uniform(u, scale)


def projected_release(value, C: float, s_C: float, epsilon: float,
                      rng: np.random.Generator, size=None):
    """``max(C, max(C, value) + Laplace(0, s_C/epsilon))``; never below C."""
    if not s_C > 0:
        raise ValueError(f"projected sensitivity must be > 0, got {s_C}")
    if not epsilon > 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    floor = np.maximum(C, value)
    if size is None:
        size = np.shape(floor) or None
    noisy = floor + laplace_sample(rng, s_C / epsilon, size=size)
    out = np.maximum(C, noisy)
    return out if np.ndim(out) else float(out)


def exponential_weights(scores, epsilon: float, M: int, s: float) -> np.ndarray:
    """Sampling probabilities ``p_i ~ exp(eps * q_i / (4 M s))``; ``-inf`` gets 0."""
    q = np.asarray(scores, dtype=np.float64)
    finite = np.isfinite(q)
    if np.any(np.isnan(q)) or np.any(q == np.inf):
        raise ValueError("scores must be finite or -inf")
    if not finite.any():
        raise ValueError("every score is -inf; nothing left to sample")
    z = np.where(finite, q - q[finite].max(), -np.inf) * (epsilon / (4.0 * M * s))
    w = np.exp(z)
    return w / w.sum()


def _tie_rank(ids: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    rank = np.empty(len(ids), dtype=np.int64)
    rank[order] = np.arange(len(ids))
    return rank


def top_m_indices(values: np.ndarray, M: int, tie_rank: np.ndarray) -> np.ndarray:
    """Indices of the M largest values, highest first; ties go to the lower rank."""
    order = np.lexsort((tie_rank, -np.asarray(values, dtype=np.float64)))
    return order[:M]


def select_laplace(scores, epsilon: float, M: int, s: float,
                   rng: np.random.Generator, tie_rank: np.ndarray) -> np.ndarray:
    q = np.asarray(scores, dtype=np.float64)
    noisy = q + laplace_sample(rng, 4.0 * M * s / epsilon, size=q.shape)
    return top_m_indices(noisy, M, tie_rank)


def select_exponential(scores, epsilon: float, M: int, s: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Sequential sampling without replacement; indices in draw order."""
    q = np.array(scores, dtype=np.float64)
    if M > q.size:
        raise ValueError(f"M={M} exceeds the number of SNPs ({q.size})")
    chosen = np.empty(M, dtype=np.int64)
    for j in range(M):
        p = exponential_weights(q, epsilon, M, s)
        k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        k = min(k, q.size - 1)
        while p[k] == 0.0:  # guard float edge at the end of the cumsum
            k -= 1
        chosen[j] = k
        q[k] = -np.inf
    return chosen


def _release(true_scores: np.ndarray, chosen: np.ndarray, ids: Sequence[str],
             config: ReleaseConfig, rng: np.random.Generator) -> MechanismOutput:
    scale_s = config.sensitivity
    selected = true_scores[chosen]
    if config.projection_C is not None:
        noisy = projected_release(selected, config.projection_C, scale_s,
                                  config.epsilon / (2.0 * config.M), rng, size=selected.shape)
    else:
        noisy = selected + laplace_sample(rng, 2.0 * config.M * scale_s / config.epsilon,
                                          size=selected.shape)
    noisy = np.atleast_1d(noisy)
    released = [(ids[i], float(v)) for i, v in zip(chosen, noisy)]
    return MechanismOutput(released=released, config=config,
                           selection=[ids[i] for i in chosen])


def _prepare(scores: Sequence[ScoredSnp], config: ReleaseConfig):
    config.check_panel(len(scores))
    ids = [sc.snp_id for sc in scores]
    if len(set(ids)) != len(ids):
        raise ValueError("snp ids must be distinct")
    q = np.array([sc.score for sc in scores], dtype=np.float64)
    if not np.all(np.isfinite(q)):
        raise ValueError("scores must be finite")
    if config.projection_C is not None:
        q = np.maximum(config.projection_C, q)
    return ids, q


def top_m_laplace(scores: Sequence[ScoredSnp], config: ReleaseConfig) -> MechanismOutput:
    ids, q = _prepare(scores, config)
    rng = make_rng(config.seed)
    chosen = select_laplace(q, config.epsilon, config.M, config.sensitivity, rng, _tie_rank(ids))
    return _release(q, chosen, ids, config, rng)


def top_m_exponential(scores: Sequence[ScoredSnp], config: ReleaseConfig) -> MechanismOutput:
    ids, q = _prepare(scores, config)
    rng = make_rng(config.seed)
    chosen = select_exponential(q, config.epsilon, config.M, config.sensitivity, rng)
    return _release(q, chosen, ids, config, rng)


def release_with_selection_scores(true_scores: Sequence[ScoredSnp], selection_scores,
                                  selection_sensitivity: float,
                                  config: ReleaseConfig) -> MechanismOutput:
    """Exponential-route selection on one score, release of another.

    Used by LocSig: select on JS scores (own sensitivity), release chi-square.
    """
    ids, q = _prepare(true_scores, config)
    sel = np.asarray(selection_scores, dtype=np.float64)
    if sel.shape != q.shape:
        raise ValueError("selection scores must align with the true scores")
    rng = make_rng(config.seed)
    chosen = select_exponential(sel, config.epsilon, config.M, selection_sensitivity, rng)
    return _release(q, chosen, ids, config, rng)
