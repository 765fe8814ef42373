"""Synthetic cohorts and Monte-Carlo risk-utility curves.

Utility of one private selection ``S`` against the true top-M set ``S0`` is
``|S0 & S| / |S0|``; a curve point averages it over repetitions, each with
its own derived random stream.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .locsig import JS_SENSITIVITY, JsScoreConfig, js_scores
from .mechanisms import MECHANISMS, _tie_rank, select_exponential, select_laplace, top_m_indices
from .rng import make_rng
from .sensitivity import allelic_sensitivity, chi2_sensitivity_general
from .stats import allelic_statistics, chi2_statistics
from .tables import GenotypeTable, validate

MECHANISM_CODES = {name: i for i, name in enumerate(MECHANISMS)}

CURVE_COLUMNS = ("mechanism", "M", "epsilon", "mean_utility", "std_error", "reps")


@dataclass(frozen=True)
class SynthConfig:
    n_snps: int
    R: int
    S: int
    null_maf_range: tuple[float, float] = (0.05, 0.45)
    n_causal: int = 0
    effect_size: float = 1.0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.null_maf_range
        if not 0 < lo <= hi < 0.5:
            raise ValueError(f"MAF range must satisfy 0 < low <= high < 0.5, got {self.null_maf_range}")
        if self.n_snps < 0 or not 0 <= self.n_causal <= self.n_snps:
            raise ValueError("need 0 <= n_causal <= n_snps")
        if self.R < 1 or self.S < 1:
            raise ValueError("cohort sizes must be >= 1")
        if not self.effect_size > 0:
            raise ValueError("effect size must be > 0")


def _snp_ids(n: int, prefix: str = "snp") -> list[str]:
    width = max(5, len(str(n)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def generate_cohort(cfg: SynthConfig, max_retries: int = 200) -> list[GenotypeTable]:
    """Hardy-Weinberg panel; causal SNPs scale case odds by ``effect_size`` per allele."""
    rng = make_rng(cfg.seed)
    n = cfg.n_snps
    if n == 0:
        return []
    maf = rng.uniform(*cfg.null_maf_range, size=n)
    hwe = np.stack([(1 - maf) ** 2, 2 * maf * (1 - maf), maf**2], axis=1)
    case_p = hwe.copy()
    causal = rng.choice(n, size=cfg.n_causal, replace=False) if cfg.n_causal else np.zeros(0, int)
    tilt = cfg.effect_size ** np.arange(3)
    case_p[causal] = hwe[causal] * tilt
    case_p /= case_p.sum(axis=1, keepdims=True)

    cases = rng.multinomial(cfg.R, case_p)
    controls = rng.multinomial(cfg.S, hwe)
    for _ in range(max_retries):
        bad = np.flatnonzero(((cases + controls) == 0).any(axis=1))
        if bad.size == 0:
            break
        cases[bad] = rng.multinomial(cfg.R, case_p[bad])
        controls[bad] = rng.multinomial(cfg.S, hwe[bad])
    else:
        raise ValueError(f"could not draw tables with positive margins for R={cfg.R}, "
                         f"S={cfg.S} after {max_retries} retries")
    ids = _snp_ids(n)
    return [GenotypeTable(ids[i], *cases[i].tolist(), *controls[i].tolist()) for i in range(n)]


def table_with_chi2(target: float, R: int, S: int, maf: float = 0.3,
                    snp_id: str = "") -> GenotypeTable:
    """Hand-built table whose chi-square first reaches ``target``.

    Controls sit at Hardy-Weinberg expectation; cases start there too and
    shift one individual at a time toward more minor alleles.
    """
    hwe = np.array([(1 - maf) ** 2, 2 * maf * (1 - maf), maf**2])

    def rounded(total):
        c = np.floor(hwe * total).astype(int)
        c[0] += total - c.sum()
        return c

    s = rounded(S)
    r = rounded(R)
    counts = np.concatenate([r, s])
    y = float(chi2_statistics(counts))
    while y < target:
        if counts[0] > 0:
            counts[0] -= 1
            counts[1] += 1
        elif counts[1] > 0:
            counts[1] -= 1
            counts[2] += 1
        else:
            raise ValueError(f"chi-square {target} unreachable with R={R}, S={S}")
        y = float(chi2_statistics(counts))
    table = GenotypeTable(snp_id, *counts.tolist())
    if validate(table):
        raise ValueError(f"constructed table is invalid: {validate(table)}")
    return table


GAP_TOP = (61.0, 54.4, 53.6, 52.0, 48.0)


def gap_panel(n_snps: int = 4000, R: int = 1748, S: int = 2938, seed: int = 0,
              top: Sequence[float] = GAP_TOP, tail: Sequence[float] | None = None
              ) -> list[GenotypeTable]:
    """Panel whose chi-squares drop sharply after rank ``len(top)``.

    ``top`` tables are built to hit the given statistics, then a run of
    moderately significant ``tail`` SNPs, then null SNPs.
    """
    if tail is None:
        tail = tuple(np.linspace(34.0, 24.0, 15))
    built = list(top) + list(tail)
    if n_snps < len(built):
        raise ValueError(f"panel needs at least {len(built)} SNPs")
    ids = _snp_ids(n_snps)
    order = make_rng(seed, 1).permutation(n_snps)
    nulls = generate_cohort(SynthConfig(n_snps - len(built), R, S, seed=seed))
    panel: list[GenotypeTable | None] = [None] * n_snps
    for k, target in enumerate(built):
        i = int(order[k])
        panel[i] = table_with_chi2(target, R, S, snp_id=ids[i])
    for t, i in zip(nulls, order[len(built):]):
        panel[int(i)] = GenotypeTable(ids[int(i)], *t.counts)
    return panel  # type: ignore[return-value]


def utility(S0: Iterable[str], S: Iterable[str]) -> float:
    S0 = set(S0)
    if not S0:
        raise ValueError("true top set must be non-empty")
    return len(S0 & set(S)) / len(S0)


@dataclass(frozen=True)
class RiskUtilityPoint:
    epsilon: float
    mechanism: str
    M: int
    mean_utility: float
    std_error: float
    repetitions: int


class ScoredPanel:
    """A panel with its true scores, tie ranks and cached JS scores."""

    def __init__(self, tables: Sequence[GenotypeTable], score: str = "chi2"):
        self.tables = list(tables)
        self.ids = [t.snp_id for t in self.tables]
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("snp ids must be distinct")
        cohorts = {(t.R, t.S) for t in self.tables}
        if len(cohorts) > 1:
            raise ValueError(f"panel mixes cohort sizes: {sorted(cohorts)[:3]}")
        self.R, self.S = cohorts.pop() if cohorts else (0, 0)
        self.score = score
        self.counts = np.array([t.counts for t in self.tables], dtype=np.int64).reshape(-1, 6)
        if score == "chi2":
            self.scores = chi2_statistics(self.counts)
        elif score == "allelic":
            self.scores = allelic_statistics(self.counts)
            if np.isnan(self.scores).any():
                raise ValueError("allelic statistic undefined for a monomorphic SNP in the panel")
        else:
            raise ValueError(f"unknown score {score!r}")
        self.tie_rank = _tie_rank(self.ids)
        self._js: dict[float, np.ndarray] = {}

    def __len__(self):
        return len(self.tables)

    def sensitivity(self) -> float:
        if self.score == "chi2":
            return chi2_sensitivity_general(self.R, self.S)
        return allelic_sensitivity(self.R, self.S)

    def true_top(self, M: int) -> np.ndarray:
        return top_m_indices(self.scores, M, self.tie_rank)

    def js(self, threshold_p: float) -> np.ndarray:
        if threshold_p not in self._js:
            self._js[threshold_p] = js_scores(self.tables, JsScoreConfig(threshold_p))
        return self._js[threshold_p]


def _as_panel(panel, score: str) -> ScoredPanel:
    return panel if isinstance(panel, ScoredPanel) else ScoredPanel(panel, score)


def select_once(panel: ScoredPanel, mechanism: str, M: int, epsilon: float,
                rng: np.random.Generator, sensitivity: float,
                threshold_p: float | None = None) -> np.ndarray:
    """One run of a mechanism's selection stage; returns chosen indices."""
    if mechanism == "laplace":
        return select_laplace(panel.scores, epsilon, M, sensitivity, rng, panel.tie_rank)
    if mechanism == "exponential":
        return select_exponential(panel.scores, epsilon, M, sensitivity, rng)
    if mechanism == "locsig":
        if threshold_p is None:
            raise ValueError("locsig needs a threshold p-value")
        return select_exponential(panel.js(threshold_p), epsilon, M, JS_SENSITIVITY, rng)
    raise ValueError(f"unknown mechanism {mechanism!r}")


def risk_utility_curve(panel, mechanism: str, M: int, epsilon_grid: Sequence[float],
                       repetitions: int = 50, seed: int = 0, score: str = "chi2",
                       sensitivity: float | None = None, threshold_p: float | None = None,
                       workers: int = 1) -> list[RiskUtilityPoint]:
    panel = _as_panel(panel, score)
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not 1 <= M <= len(panel):
        raise ValueError(f"M={M} must be between 1 and the panel size {len(panel)}")
    if mechanism not in MECHANISM_CODES:
        raise ValueError(f"unknown mechanism {mechanism!r}")
    s = sensitivity if sensitivity is not None else panel.sensitivity()
    truth = {panel.ids[i] for i in panel.true_top(M)}
    if mechanism == "locsig":
        if threshold_p is None:
            raise ValueError("locsig needs a threshold p-value")
        panel.js(threshold_p)  # score once, before any threads start
    code = MECHANISM_CODES[mechanism]

    def point(k: int) -> RiskUtilityPoint:
        eps = float(epsilon_grid[k])
        u = np.empty(repetitions)
        for rep in range(repetitions):
            rng = make_rng(seed, code, M, k, rep)
            chosen = select_once(panel, mechanism, M, eps, rng, s, threshold_p)
            u[rep] = utility(truth, (panel.ids[i] for i in chosen))
        se = float(u.std(ddof=1) / math.sqrt(repetitions)) if repetitions > 1 else 0.0
        return RiskUtilityPoint(eps, mechanism, M, float(u.mean()), se, repetitions)

    ks = range(len(epsilon_grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(point, ks))
    return [point(k) for k in ks]


def log_grid(lo: float, hi: float, count: int) -> np.ndarray:
    if not (0 < lo < hi) or count < 2:
        raise ValueError("need 0 < lo < hi and count >= 2")
    return np.geomspace(lo, hi, count)


def parse_grid(spec: str) -> np.ndarray:
    """``lo:hi:count`` -> log-spaced grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"epsilon grid must look like lo:hi:count, got {spec!r}")
    return log_grid(float(parts[0]), float(parts[1]), int(parts[2]))


def curves_to_csv(points: Iterable[RiskUtilityPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for p in points:
        w.writerow([p.mechanism, p.M, repr(p.epsilon), repr(p.mean_utility),
                    repr(p.std_error), p.repetitions])
    return buf.getvalue()


def curves_to_svg(points: Sequence[RiskUtilityPoint]) -> str:
    """One panel per M, utility against log-epsilon, one line per mechanism."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ms = sorted({p.M for p in points})
    fig, axes = plt.subplots(len(ms), 1, figsize=(6, 2.6 * max(1, len(ms))),
                             squeeze=False, sharex=True)
    for ax, m in zip(axes[:, 0], ms):
        for mech in sorted({p.mechanism for p in points if p.M == m}):
            pts = sorted((p for p in points if p.M == m and p.mechanism == mech),
                         key=lambda p: p.epsilon)
            ax.errorbar([p.epsilon for p in pts], [p.mean_utility for p in pts],
                        yerr=[p.std_error for p in pts], marker="o", ms=3, label=mech)
        ax.set_xscale("log")
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel("utility")
        ax.set_title(f"M = {m}")
        ax.legend(loc="lower right", fontsize="small")
    axes[-1, 0].set_xlabel("epsilon")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg")
    plt.close(fig)
    return buf.getvalue()


@dataclass(frozen=True)
class RuntimeRow:
    method: str
    selection_seconds: float
    scoring_seconds: float


@dataclass
class RuntimeConfig:
    m_values: tuple[int, ...] = (3, 5, 10, 15)
    epsilon_grid: Sequence[float] = field(default_factory=lambda: log_grid(0.1, 1e4, 15))
    repetitions: int = 50
    js_alphas: tuple[float, ...] = (0.001, 0.01, 0.05)  # divided by the SNP count
    seed: int = 0


def runtime_report(panel, config: RuntimeConfig | None = None) -> list[RuntimeRow]:
    """Wall-clock cost of scoring and of generating the selection, per mechanism.

    LocSig is timed over every threshold in ``js_alphas``, since each
    threshold gives a different score vector.
    """
    config = config or RuntimeConfig()
    tables = panel.tables if isinstance(panel, ScoredPanel) else list(panel)
    if not tables:
        return []

    t0 = time.perf_counter()
    scored = ScoredPanel(tables, "chi2")
    chi2_seconds = time.perf_counter() - t0
    K = len(scored)
    thresholds = [a / K for a in config.js_alphas]
    t0 = time.perf_counter()
    for thr in thresholds:
        scored.js(thr)
    js_seconds = time.perf_counter() - t0
    s = scored.sensitivity()

    def time_selection(mechanism: str, thresholds_: Sequence[float | None]) -> float:
        start = time.perf_counter()
        for thr in thresholds_:
            for M in config.m_values:
                for k, eps in enumerate(config.epsilon_grid):
                    for rep in range(config.repetitions):
                        rng = make_rng(config.seed, MECHANISM_CODES[mechanism], M, k, rep)
                        select_once(scored, mechanism, M, float(eps), rng, s, thr)
        return time.perf_counter() - start

    return [
        RuntimeRow("laplace", time_selection("laplace", [None]), chi2_seconds),
        RuntimeRow("exponential", time_selection("exponential", [None]), chi2_seconds),
        RuntimeRow("locsig", time_selection("locsig", thresholds), js_seconds),
    ]
