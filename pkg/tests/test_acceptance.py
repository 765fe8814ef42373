"""Acceptance criteria 1 to 11, one test each.

Every test prints a ``[PASS]`` or ``[FAIL]`` line; the lines are collected
again at the end of the run.  Stated runtimes are part of each check.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats as sps

from dpgwas.audit import dp_ratio_audit, exponential_selection_probabilities, neighbor_score_pairs
from dpgwas.harness import (ScoredPanel, SynthConfig, RuntimeConfig, gap_panel, generate_cohort,
                            log_grid, risk_utility_curve, runtime_report)
from dpgwas.locsig import JsScoreConfig, js_score_exhaustive, js_score_greedy
from dpgwas.mechanisms import laplace_sample, projected_release, select_exponential
from dpgwas.rng import make_rng
from dpgwas.sensitivity import (allelic_branches, allelic_sensitivity,
                                chi2_sensitivity_controls_known, chi2_sensitivity_general)
from dpgwas.tables import enumerate_tables, neighbors

import oracles

PAIRS_2_5 = [(R, S) for R in range(2, 6) for S in range(2, 6)]


def test_c1_headline_sensitivity(criterion):
    v = chi2_sensitivity_general(1748, 2938)
    criterion(1, abs(v - 4.27) <= 0.005, f"s(1748, 2938) = {v:.6f}, target 4.27 +- 0.005")


def test_c2_equal_cohort_reduction(criterion):
    t0 = time.perf_counter()
    bad = [k for k in range(2, 501) if chi2_sensitivity_general(k, k) != 4 * (2 * k) / (2 * k + 2)]
    dt = time.perf_counter() - t0
    criterion(2, not bad and dt < 1,
              f"exact equality with 4N/(N+2) for k = 2..500; mismatches {bad[:5]}; {dt:.3f}s")


def test_c3_chi2_oracle(criterion):
    t0 = time.perf_counter()
    off = []
    for R, S in PAIRS_2_5:
        bf = float(oracles.max_neighbor_change(R, S, oracles.chi2, oracles.minor_major_ordered))
        formula = chi2_sensitivity_general(R, S)
        if abs(bf - formula) > 1e-9:
            off.append(f"({R},{S}) brute {bf:.6f} vs formula {formula:.6f}")
    dt = time.perf_counter() - t0
    detail = (f"{len(PAIRS_2_5) - len(off)}/{len(PAIRS_2_5)} cohort pairs match within 1e-9; "
              f"{dt:.1f}s")
    if off:
        detail += "; mismatches: " + ", ".join(off)
    criterion(3, not off and dt < 30, detail)


def test_c4_allelic_oracle(criterion):
    t0 = time.perf_counter()
    exact_33 = oracles.max_neighbor_change(3, 3, oracles.allelic)
    pinned = exact_33 == Fraction(12096, 2205)
    branches = allelic_branches(3, 3)
    dominant = abs(max(branches) - 12096 / 2205) < 1e-12 and branches[1] == max(branches)
    off = []
    for R, S in PAIRS_2_5:
        bf = float(oracles.max_neighbor_change(R, S, oracles.allelic))
        if abs(bf - allelic_sensitivity(R, S)) > 1e-9:
            off.append((R, S, bf, allelic_sensitivity(R, S)))
    dt = time.perf_counter() - t0
    criterion(4, pinned and dominant and not off and dt < 30,
              f"oracle (3,3) = {exact_33} (pinned 12096/2205: {pinned}); "
              f"{len(PAIRS_2_5) - len(off)}/{len(PAIRS_2_5)} pairs match within 1e-9; {dt:.1f}s")


def _case_side_max(R, S):
    """Brute-force max |d chi2| over case moves, per fixed control row."""
    tables = oracles.valid_tables(R, S)
    y = {t: oracles.chi2(t) for t in tables}
    best = {}
    for t in tables:
        for u in oracles.case_steps(t):
            best[t[3:]] = max(best.get(t[3:], Fraction(0)), abs(y[t] - y[u]))
    return best


def test_c5_known_controls(criterion):
    t0 = time.perf_counter()
    violations, rows = [], 0
    for R in range(1, 7):
        for S in range(1, 7):
            for row, bf in _case_side_max(R, S).items():
                rows += 1
                bound = chi2_sensitivity_controls_known(R, S, *row)
                if float(bf) > bound + 1e-12:
                    violations.append((R, S, row, float(bf), bound))
    ratio_ok = True
    for R, S in ((100, 100), (300, 1000), (1748, 2938), (2000, 5000)):
        general = chi2_sensitivity_general(R, S)
        for m in range(-(-S // 3), S + 1):
            r = general / chi2_sensitivity_controls_known(R, S, m, S - m, 0)
            ratio_ok &= 1 - 1e-12 <= r <= (S + 3) / (S + 1) + 1e-12
    dt = time.perf_counter() - t0
    criterion(5, not violations and ratio_ok and dt < 30,
              f"bound holds on {rows - len(violations)}/{rows} control rows (R, S <= 6); "
              f"large-S ratio in [1, (S+3)/(S+1)]: {ratio_ok}; {dt:.1f}s")


def test_c6_dp_audit(criterion):
    t0 = time.perf_counter()
    worst_excess, runs = -math.inf, 0
    for R in range(1, 5):
        for S in range(1, 5):
            n = 3 if R + S <= 6 else 2
            s = chi2_sensitivity_general(R, S)
            pairs = list(neighbor_score_pairs(R, S, n))
            if not pairs:
                continue
            for eps in (0.5, 1.0, 4.0):
                for M in range(1, n + 1):
                    worst = dp_ratio_audit("exponential", pairs, eps, M, s)
                    worst_excess = max(worst_excess, worst - eps / 2)
                    runs += 1
    dt = time.perf_counter() - t0
    criterion(6, worst_excess <= 1e-9 and dt < 120,
              f"{runs} universes x eps x M audited; max(log-ratio - eps/2) = {worst_excess:.3e}; "
              f"{dt:.1f}s")


def test_c7_mechanism_distributions(criterion):
    t0 = time.perf_counter()
    q = np.array([2.0, 1.0, 0.0])
    exact = exponential_selection_probabilities(q, 4.0, 2, 1.0)
    keys = sorted(exact, key=sorted)
    rng = make_rng(7)
    n = 100_000
    counts = dict.fromkeys(keys, 0)
    for _ in range(n):
        counts[frozenset(select_exponential(q, 4.0, 2, 1.0, rng).tolist())] += 1
    gof = sps.chisquare([counts[k] for k in keys], [exact[k] * n for k in keys]).pvalue

    x = laplace_sample(make_rng(8), 1.0, size=1_000_000)
    mean_ok = abs(x.mean()) <= 0.005
    tails = [float(np.mean(np.abs(x) > t)) for t in (1, 2)]
    tails_ok = all(abs(p - math.exp(-t)) <= 0.01 for p, t in zip(tails, (1, 2)))
    dt = time.perf_counter() - t0
    criterion(7, gof > 0.01 and mean_ok and tails_ok and dt < 60,
              f"selection GoF p = {gof:.3f}; Laplace mean {x.mean():+.5f}, "
              f"P(|X|>1) {tails[0]:.4f}, P(|X|>2) {tails[1]:.4f}; {dt:.1f}s")


def test_c8_projection(criterion):
    t0 = time.perf_counter()
    n = 1_000_000
    rng = make_rng(9)
    C, eps, s = 10.0, 1.0, 2.0
    h = rng.uniform(0, 20, size=n)
    out = projected_release(h, C, s, eps, rng)
    floor_ok = bool(out.min() >= C)
    # point mass at a fixed h_C > C
    h_C = 12.0
    at = projected_release(np.full(n, h_C), C, s, eps, make_rng(10))
    p = 0.5 * math.exp((C - h_C) * eps / s)
    emp = float(np.mean(at == C))
    z = (emp - p) / math.sqrt(p * (1 - p) / n)
    dt = time.perf_counter() - t0
    criterion(8, floor_ok and abs(z) <= 3 and dt < 60,
              f"min output {out.min():.4f} >= C = {C}; P(out = C) = {emp:.5f} vs {p:.5f} "
              f"(z = {z:+.2f}); {dt:.1f}s")


def test_c9_js_scores(criterion):
    t0 = time.perf_counter()
    tables = list(enumerate_tables(4, 4))
    ex = JsScoreConfig(0.05, search="exhaustive")
    ref = {t: js_score_exhaustive(t, ex) for t in tables}
    greedy = {t: js_score_greedy(t, JsScoreConfig(0.05)) for t in tables}
    diffs = [abs(greedy[t]) - abs(ref[t]) for t in tables]
    greedy_ok = min(diffs) >= 0 and max(diffs) <= 2
    lipschitz = all(abs(abs(ref[t]) - abs(ref[u])) <= 1 for t in tables for u in neighbors(t))
    looser = [ref]
    for thr in (0.1, 0.2):
        cfg = JsScoreConfig(thr, search="exhaustive")
        looser.append({t: js_score_exhaustive(t, cfg) for t in tables})
    monotone = all(a[t] <= b[t] for a, b in zip(looser, looser[1:]) for t in tables if a[t] > 0)
    dt = time.perf_counter() - t0
    n_diff = sum(d != 0 for d in diffs)
    criterion(9, greedy_ok and lipschitz and monotone and dt < 120,
              f"{len(tables)} tables; greedy >= exhaustive with {n_diff} discrepancies "
              f"(max +{max(diffs)}); Lipschitz-1: {lipschitz}; monotone in threshold: {monotone}; "
              f"{dt:.1f}s")


# -- criteria 10 and 11 share a five minute budget ---------------------------

BUDGET = {"seconds": 0.0}
M_VALUES = (3, 5, 10, 15)


@pytest.fixture(scope="module")
def synth_panel():
    t0 = time.perf_counter()
    panel = ScoredPanel(generate_cohort(
        SynthConfig(4000, 1748, 2938, n_causal=30, effect_size=1.25, seed=0)))
    BUDGET["seconds"] += time.perf_counter() - t0
    return panel


def _gap_band(panel: ScoredPanel):
    """Mid-range epsilons where rank 5 is resolved but rank 3 is not.

    Low end: Laplace scale 4*5*s/eps at a quarter of the rank 5/6 gap.
    High end: scale 4*3*s/eps at half of the rank 3/4 gap.
    """
    y = np.sort(panel.scores)[::-1]
    s = panel.sensitivity()
    return 4 * 5 * s / ((y[4] - y[5]) / 4), 4 * 3 * s / ((y[2] - y[3]) / 2)


def test_c10_risk_utility(criterion, synth_panel):
    t0 = time.perf_counter()
    grid = log_grid(0.1, 1e6, 15)
    lines, a_ok, b_ok = [], True, True
    for M in M_VALUES:
        lap = risk_utility_curve(synth_panel, "laplace", M, grid, 50, seed=0)
        exp = risk_utility_curve(synth_panel, "exponential", M, grid, 50, seed=0)
        worst = min((e.mean_utility - l.mean_utility) / max(math.hypot(e.std_error, l.std_error), 1e-12)
                    for l, e in zip(lap, exp))
        below = [f"{l.epsilon:.3g}" for l, e in zip(lap, exp)
                 if e.mean_utility < l.mean_utility - 2 * math.hypot(e.std_error, l.std_error)]
        a_ok &= not below
        b_ok &= lap[-1].mean_utility >= 0.99 and exp[-1].mean_utility >= 0.99
        lines.append(f"M={M}: min z(E-L) {worst:+.2f}" + (f" below at eps {below}" if below else ""))

    gp = ScoredPanel(gap_panel(seed=0))
    lo, hi = _gap_band(gp)
    grid_c = log_grid(1, 1e4, 15)
    band = [k for k, e in enumerate(grid_c) if lo <= e <= hi]
    c_ok = bool(band)
    for mech in ("laplace", "exponential"):
        u = {M: risk_utility_curve(gp, mech, M, grid_c, 200, seed=0) for M in (3, 5, 15)}
        for k in band:
            p5 = u[5][k]
            for other in (3, 15):
                p = u[other][k]
                c_ok &= p5.mean_utility - p.mean_utility > 3 * math.hypot(p5.std_error, p.std_error)
    dt = time.perf_counter() - t0
    BUDGET["seconds"] += dt
    criterion(10, a_ok and b_ok and c_ok and BUDGET["seconds"] < 300,
              f"(a) exponential >= Laplace within 2 SE: {a_ok} [{'; '.join(lines)}]; "
              f"(b) utility >= 0.99 at eps = 1e6: {b_ok}; "
              f"(c) M=5 above M=3 and M=15 at 3 sigma over eps band [{lo:.1f}, {hi:.1f}] "
              f"({len(band)} grid points): {c_ok}; {dt:.1f}s")


def test_c11_runtime_ordering(criterion, synth_panel):
    t0 = time.perf_counter()
    rows = {r.method: r for r in runtime_report(synth_panel.tables, RuntimeConfig())}
    sel = [rows[m].selection_seconds for m in ("laplace", "exponential", "locsig")]
    ratio = rows["laplace"].scoring_seconds / rows["locsig"].scoring_seconds
    dt = time.perf_counter() - t0
    BUDGET["seconds"] += dt
    ok = sel[0] < sel[1] < sel[2] and ratio < 0.01 and BUDGET["seconds"] < 300
    criterion(11, ok,
              f"selection s: Laplace {sel[0]:.2f} < exponential {sel[1]:.2f} < LocSig {sel[2]:.2f}; "
              f"chi2/JS scoring time {ratio:.4%}; criteria 10+11 took {BUDGET['seconds']:.0f}s")
