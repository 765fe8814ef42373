"""Exact privacy-loss audit of the top-M selection stage on tiny universes.

A universe is ``n_snps`` SNPs, each an arbitrary valid table with ``R``
cases and ``S`` controls.  One individual is either a case or a control;
changing their genotype can move every SNP's table by one step in that
row (or leave it unchanged).  The set of neighboring score vectors is the
product of per-SNP ``(score, neighbor score)`` pairs, which keeps the
search exact while staying small.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Iterable, Iterator

import numpy as np
from scipy import integrate

from .mechanisms import exponential_weights
from .stats import chi2_statistic
from .tables import GenotypeTable, admissible_moves, enumerate_tables

MAX_SNPS = 4
MAX_COHORT = 5
MAX_PAIRS = 2_000_000

ScorePair = tuple[tuple[float, ...], tuple[float, ...]]


class UniverseTooLarge(ValueError):
    pass


def _row_pairs(tables: list[GenotypeTable], score: Callable[[GenotypeTable], float],
               row: str) -> set[tuple[float, float]]:
    pairs = set()
    for t in tables:
        try:
            q = score(t)
        except ValueError:  # statistic undefined on this table
            continue
        pairs.add((q, q))
        for move, nb in admissible_moves(t):
            if move.row == row:
                try:
                    pairs.add((q, score(nb)))
                except ValueError:
                    pass
    return pairs


def neighbor_score_pairs(R: int, S: int, n_snps: int,
                         score: Callable[[GenotypeTable], float] = chi2_statistic,
                         ) -> Iterator[ScorePair]:
    """Every distinct ``(q(D), q(D'))`` over neighboring datasets in the universe."""
    if n_snps < 1 or n_snps > MAX_SNPS or max(R, S) > MAX_COHORT:
        raise UniverseTooLarge(
            f"universe limited to {MAX_SNPS} SNPs and cohorts <= {MAX_COHORT}; "
            f"got n_snps={n_snps}, R={R}, S={S}")
    tables = list(enumerate_tables(R, S))
    if not tables:
        return
    seen: set[ScorePair] = set()
    for row in ("case", "control"):
        per_snp = sorted(_row_pairs(tables, score, row))
        if len(per_snp) ** n_snps > MAX_PAIRS:
            raise UniverseTooLarge(f"{len(per_snp) ** n_snps} neighbor pairs exceed {MAX_PAIRS}")
        for combo in itertools.product(per_snp, repeat=n_snps):
            pair = (tuple(p[0] for p in combo), tuple(p[1] for p in combo))
            if pair not in seen:
                seen.add(pair)
                yield pair


def exponential_selection_probabilities(scores, epsilon: float, M: int, s: float,
                                        ordered: bool = False) -> dict:
    """Exact law of the exponential-route selection.

    Keys are frozensets of indices, or index tuples in draw order when
    ``ordered``.  Sums over all ``M!``-many orderings per set.
    """
    q = np.asarray(scores, dtype=np.float64)
    n = q.size
    if M > n:
        raise ValueError(f"M={M} exceeds {n} SNPs")
    if n > 8:
        raise UniverseTooLarge("exact enumeration limited to 8 SNPs")
    probs: dict = {}
    for seq in itertools.permutations(range(n), M):
        rest = q.copy()
        p_seq = 1.0
        for k in seq:
            p_seq *= exponential_weights(rest, epsilon, M, s)[k]
            rest[k] = -np.inf
        key = seq if ordered else frozenset(seq)
        probs[key] = probs.get(key, 0.0) + p_seq
    return probs


def laplace_selection_probabilities(scores, epsilon: float, M: int, s: float) -> dict:
    """Law of the Laplace-route selection by quadrature.

    Supported when the chosen set is fixed by one extreme: ``M == 1`` (the
    noisy argmax), ``M == n - 1`` (everything but the noisy argmin) or
    ``M == n``.
    """
    q = np.asarray(scores, dtype=np.float64)
    n = q.size
    b = 4.0 * M * s / epsilon
    if M == n:
        return {frozenset(range(n)): 1.0}

    def pdf(x):
        return 0.5 / b * math.exp(-abs(x) / b)

    def cdf(x):
        return 0.5 * math.exp(x / b) if x < 0 else 1.0 - 0.5 * math.exp(-x / b)

    def extreme_prob(i: int, top: bool) -> float:
        def integrand(x):
            val = pdf(x - q[i])
            for j in range(n):
                if j != i:
                    c = cdf(x - q[j])
                    val *= c if top else 1.0 - c
            return val
        points = sorted(set(q.tolist()))
        lo, hi = min(points) - 60 * b, max(points) + 60 * b
        val, _ = integrate.quad(integrand, lo, hi, points=points, limit=400,
                                epsabs=1e-14, epsrel=1e-11)
        return val

    if M == 1:
        return {frozenset([i]): extreme_prob(i, top=True) for i in range(n)}
    if M == n - 1:
        everyone = frozenset(range(n))
        return {everyone - {i}: extreme_prob(i, top=False) for i in range(n)}
    raise UniverseTooLarge("Laplace selection law is only computed for M in {1, n-1, n}")


def max_log_ratio(p: dict, p_prime: dict) -> float:
    worst = 0.0
    for key in set(p) | set(p_prime):
        a, b = p.get(key, 0.0), p_prime.get(key, 0.0)
        if a == 0.0 and b == 0.0:
            continue
        if a == 0.0 or b == 0.0:
            return math.inf
        worst = max(worst, abs(math.log(a) - math.log(b)))
    return worst


def dp_ratio_audit(mechanism: str, pairs: Iterable[ScorePair], epsilon: float, M: int,
                   s: float, ordered: bool = False) -> float:
    """Largest ``|log P(D in A) - log P(D' in A)|`` over pairs and outcomes A.

    Outcomes are selected sets (or ordered draws when ``ordered`` and the
    mechanism is exponential).  Both routes are expected to stay within
    ``epsilon / 2``.
    """
    if mechanism == "exponential":
        @lru_cache(maxsize=None)
        def law(scores):
            return exponential_selection_probabilities(scores, epsilon, M, s, ordered=ordered)
    elif mechanism == "laplace":
        if ordered:
            raise ValueError("ordered outcomes are only audited for the exponential route")

        @lru_cache(maxsize=None)
        def law(scores):
            return laplace_selection_probabilities(scores, epsilon, M, s)
    else:
        raise ValueError(f"unknown mechanism {mechanism!r}")

    worst = 0.0
    for d, d_prime in pairs:
        worst = max(worst, max_log_ratio(law(d), law(d_prime)))
    return worst
