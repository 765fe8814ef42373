"""Closed-form sensitivities of the released GWAS statistics.

All values are for the neighbor relation in :mod:`dpgwas.tables`: one
individual changes genotype, cohort sizes ``R`` (cases) and ``S``
(controls) stay fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal


def _check_cohorts(R: int, S: int) -> None:
    if R < 1 or S < 1:
        raise ValueError(f"cohort sizes must be >= 1, got R={R}, S={S}")


def chi2_sensitivity_general(R: int, S: int) -> float:
    """Chi-square sensitivity with nothing known about either cohort.

    ``N^2/(RS) * (1 - 1/(max(R,S)+1))``, assuming ``r0 >= r2`` and ``s0 >= s2``.
    The product form keeps ``R == S`` bit-identical to ``4N/(N+2)``.
    """
    _check_cohorts(R, S)
    N = R + S
    m = max(R, S)
    return (N * N * m) / (R * S * (m + 1))


def chi2_sensitivity_controls_known(R: int, S: int, s0: int, s1: int, s2: int) -> float:
    """Upper bound on chi-square sensitivity when the control row is public."""
    _check_cohorts(R, S)
    if min(s0, s1, s2) < 0 or s0 + s1 + s2 != S:
        raise ValueError(f"control counts {(s0, s1, s2)} must be >= 0 and sum to S={S}")
    N = R + S
    s_max = max(s0, s1, s2)
    return (N * N * s_max) / (R * S * (1 + s_max))


def allelic_branches(R: int, S: int) -> tuple[float, float, float, float]:
    """The four candidate maxima for the allelic statistic.

    Branches 1 and 2 come from a case moving 0 -> 2 minor alleles, 3 and 4
    from a control doing so; swapping ``R`` and ``S`` maps 1<->3 and 2<->4.
    """
    _check_cohorts(R, S)
    N2 = (R + S) ** 2
    b1 = 8 * N2 * S / (R * (2 * S + 3) * (2 * S + 1))
    b2 = (4 * N2 * ((2 * R * R - 1) * (2 * S - 1) - 1)
          / (R * S * (2 * R + 1) * (2 * R - 1) * (2 * S + 1)))
    b3 = 8 * N2 * R / (S * (2 * R + 3) * (2 * R + 1))
    b4 = (4 * N2 * ((2 * S * S - 1) * (2 * R - 1) - 1)
          / (R * S * (2 * S + 1) * (2 * S - 1) * (2 * R + 1)))
    return (b1, b2, b3, b4)


def allelic_sensitivity(R: int, S: int) -> float:
    return max(allelic_branches(R, S))


def pvalue2df_sensitivity() -> float:
    """Sensitivity of the 2-df p-value for equal cohorts: ``exp(-2/3)``."""
    return math.exp(-2.0 / 3.0)


def projected_pvalue_sensitivity(N: int, c: float) -> float:
    """Sensitivity after projecting p-values above ``exp(-N/c)`` onto it.

    Equal cohorts of ``N/2`` each; ``c >= 3``.
    """
    if c < 3:
        raise ValueError(f"c must be >= 3, got {c}")
    denom = 2 * c * (N * c - 2 * N - c)
    if denom <= 0:
        raise ValueError(f"N*c - 2N - c must be positive (N={N}, c={c})")
    exponent = N * (2 * N * c - 4 * N - 4 * c + c * c) / denom
    return math.exp(-N / c) - math.exp(-exponent)


def chi2_max(R: int, S: int) -> int:
    """Upper bound on the chi-square statistic of any 2x3 table: ``N``."""
    _check_cohorts(R, S)
    return R + S


def projected_chi2_sensitivity(R: int, S: int, C: float, y_max: float | None = None) -> float:
    """Sensitivity of ``max(C, chi2)``: ``min(y_max - C, general sensitivity)``."""
    if y_max is None:
        y_max = chi2_max(R, S)
    if not 0 < C < y_max:
        raise ValueError(f"projection threshold must satisfy 0 < C < y_max={y_max}, got C={C}")
    return min(y_max - C, chi2_sensitivity_general(R, S))


Statistic = Literal["chi2", "allelic", "pvalue2df", "projected_pvalue", "projected_chi2"]


@dataclass(frozen=True)
class SensitivityModel:
    """Which statistic, which cohorts, what the adversary already knows."""

    statistic: Statistic
    R: int
    S: int
    controls_known: tuple[int, int, int] | None = None
    projection_C: float | None = None
    y_max: float | None = None
    c: float | None = None

    def __post_init__(self):
        _check_cohorts(self.R, self.S)
        if self.controls_known is not None:
            s = self.controls_known
            if len(s) != 3 or min(s) < 0 or sum(s) != self.S:
                raise ValueError(f"controls_known {s} must be 3 counts summing to S={self.S}")
            if self.statistic != "chi2":
                raise ValueError("known-controls bound exists only for chi2")
        if self.statistic == "projected_chi2" and self.projection_C is None:
            raise ValueError("projected_chi2 needs projection_C")
        if self.statistic == "projected_pvalue" and self.c is None:
            raise ValueError("projected_pvalue needs c")
        if self.statistic in ("pvalue2df", "projected_pvalue") and self.R != self.S:
            raise ValueError(f"{self.statistic} sensitivity assumes equal cohorts")

    def value(self) -> float:
        if self.statistic == "chi2":
            if self.controls_known is not None:
                return chi2_sensitivity_controls_known(self.R, self.S, *self.controls_known)
            return chi2_sensitivity_general(self.R, self.S)
        if self.statistic == "allelic":
            return allelic_sensitivity(self.R, self.S)
        if self.statistic == "pvalue2df":
            return pvalue2df_sensitivity()
        if self.statistic == "projected_pvalue":
            return projected_pvalue_sensitivity(self.R + self.S, self.c)
        if self.statistic == "projected_chi2":
            return projected_chi2_sensitivity(self.R, self.S, self.projection_C, self.y_max)
        raise ValueError(f"unknown statistic {self.statistic!r}")
