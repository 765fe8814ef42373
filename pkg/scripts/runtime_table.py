#!/usr/bin/env python3
"""Wall-clock cost of scoring and selection for the three mechanisms.

Default scale: 4000 SNPs, 4 values of M, 15 epsilons, 50 repetitions, and
LocSig over three thresholds (alpha / K for alpha in 0.001, 0.01, 0.05).
"""

import argparse

from dpgwas.harness import RuntimeConfig, SynthConfig, generate_cohort, runtime_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-snps", type=int, default=4000)
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    panel = generate_cohort(SynthConfig(args.n_snps, 1748, 2938, n_causal=30, effect_size=1.25,
                                        seed=args.seed))
    rows = runtime_report(panel, RuntimeConfig(repetitions=args.reps, seed=args.seed))
    print(f"{'method':<12} {'selection (min)':>16} {'scoring (min)':>14}")
    for r in rows:
        print(f"{r.method:<12} {r.selection_seconds / 60:>16.3f} {r.scoring_seconds / 60:>14.4f}")


if __name__ == "__main__":
    main()
