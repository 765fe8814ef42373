"""Association statistics for a 2x3 case/control genotype table."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tables import GenotypeTable, require_valid


class AllelicMarginError(ValueError):
    """The allelic 2x2 table has an empty column (monomorphic SNP)."""


@dataclass(frozen=True)
class ScoredSnp:
    snp_id: str
    score: float


def chi2_statistic(table: GenotypeTable) -> float:
    """Pearson chi-square statistic of the genotype table (2 df)."""
    require_valid(table)
    R, S, N = table.R, table.S, table.N
    total = 0.0
    for r, n in zip(table.cases, table.margins):
        total += (r * N - n * R) ** 2 / (n * R * S)
    return total


def chi2_from_cases(table: GenotypeTable) -> float:
    """Same statistic written through the case row and column sums."""
    require_valid(table)
    R, S, N = table.R, table.S, table.N
    acc = sum(r * r / n for r, n in zip(table.cases, table.margins))
    return N * N / (R * S) * acc - N * R / S


def chi2_from_controls(table: GenotypeTable) -> float:
    """Same statistic written through the control row and column sums."""
    require_valid(table)
    R, S, N = table.R, table.S, table.N
    acc = sum(s * s / n for s, n in zip(table.controls, table.margins))
    return N * N / (R * S) * acc - N * S / R


def chi2_statistics(counts: np.ndarray) -> np.ndarray:
    """Vectorised chi-square over an ``(n, 6)`` array of valid tables."""
    c = np.asarray(counts, dtype=np.float64)
    r = c[..., :3]
    s = c[..., 3:]
    R = r.sum(axis=-1, keepdims=True)
    S = s.sum(axis=-1, keepdims=True)
    N = R + S
    n = r + s
    return ((r * N - n * R) ** 2 / (n * R * S)).sum(axis=-1)


def allelic_statistic(table: GenotypeTable) -> float:
    """Cochran-Armitage trend statistic for the additive model (1 df)."""
    require_valid(table)
    R, S, N = table.R, table.S, table.N
    n0, n1, n2 = table.margins
    minor = n1 + 2 * n2
    denom = 2 * N * minor - minor * minor  # == minor * (2*n0 + n1)
    if denom == 0:
        raise AllelicMarginError(
            f"allelic margin is zero for {table.snp_id or 'table'}: "
            f"minor={minor}, major={2 * n0 + n1}"
        )
    diff = (table.s1 + 2 * table.s2) - S / N * minor
    return 2 * N**3 / (R * S) * diff * diff / denom


def allelic_statistics(counts: np.ndarray) -> np.ndarray:
    """Vectorised allelic statistic; ``nan`` where an allelic margin is zero."""
    c = np.asarray(counts, dtype=np.float64)
    R = c[..., :3].sum(axis=-1)
    S = c[..., 3:].sum(axis=-1)
    N = R + S
    n1 = c[..., 1] + c[..., 4]
    n2 = c[..., 2] + c[..., 5]
    minor = n1 + 2 * n2
    denom = 2 * N * minor - minor * minor
    diff = (c[..., 4] + 2 * c[..., 5]) - S / N * minor
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2 * N**3 / (R * S) * diff * diff / denom
    return np.where(denom > 0, out, np.nan)


def _gamma_series(a: float, x: float, tol: float) -> float:
    # lower regularized P(a, x), good for x < a + 1
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(10_000):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * tol:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_continued_fraction(a: float, x: float, tol: float) -> float:
    # upper regularized Q(a, x) by modified Lentz, good for x >= a + 1
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def upper_gamma_q(a: float, x: float, tol: float = 1e-15) -> float:
    """Regularized upper incomplete gamma ``Q(a, x) = Gamma(a, x) / Gamma(a)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x, tol))
    return _gamma_continued_fraction(a, x, tol)


def chi2_survival(y: float, df: int = 2) -> float:
    """P(X >= y) for X chi-square with 1 or 2 degrees of freedom."""
    if not y >= 0:
        raise ValueError(f"statistic must be non-negative, got {y}")
    if df == 2:
        return math.exp(-y / 2.0)
    if df == 1:
        return upper_gamma_q(0.5, y / 2.0)
    raise ValueError(f"df must be 1 or 2, got {df}")


def is_significant(y, threshold_p: float):
    """``p(y) < threshold_p`` under the 2-df null; works on scalars and arrays."""
    return np.exp(-np.asarray(y, dtype=np.float64) / 2.0) < threshold_p


def score_tables(tables, statistic: str = "chi2") -> list[ScoredSnp]:
    if statistic == "chi2":
        fn = chi2_statistic
    elif statistic == "allelic":
        fn = allelic_statistic
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return [ScoredSnp(t.snp_id, fn(t)) for t in tables]
