#!/usr/bin/env python3
"""Closed-form sensitivities next to brute-force neighbor maxima on small cohorts.

The chi-square column restricts the search to tables with r0 >= r2 and
s0 >= s2, the assumption behind the closed form.  With only two cases or
two controls the maximising table cannot be built, and the closed form is
then strictly larger than the brute-force value.
"""

import argparse

from dpgwas.sensitivity import allelic_sensitivity, chi2_sensitivity_general
from dpgwas.stats import allelic_statistic, chi2_statistic
from dpgwas.tables import enumerate_tables, neighbors


def brute_max(R, S, stat, restrict=None):
    best = 0.0
    for t in enumerate_tables(R, S):
        if restrict and not restrict(t):
            continue
        y = stat(t)
        for u in neighbors(t):
            if restrict and not restrict(u):
                continue
            best = max(best, abs(y - stat(u)))
    return best


def ordered(t):
    return t.r0 >= t.r2 and t.s0 >= t.s2


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-cohort", type=int, default=5)
    args = ap.parse_args()
    print(f"{'R':>3} {'S':>3} {'chi2 brute':>11} {'chi2 formula':>13} "
          f"{'allelic brute':>14} {'allelic formula':>16}")
    for R in range(2, args.max_cohort + 1):
        for S in range(2, args.max_cohort + 1):
            print(f"{R:>3} {S:>3} {brute_max(R, S, chi2_statistic, ordered):>11.6f} "
                  f"{chi2_sensitivity_general(R, S):>13.6f} "
                  f"{brute_max(R, S, allelic_statistic):>14.6f} {allelic_sensitivity(R, S):>16.6f}")


if __name__ == "__main__":
    main()
