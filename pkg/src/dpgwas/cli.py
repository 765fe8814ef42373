"""Command line entry point: ``dpgwas <subcommand> ...``.

Exit codes: 0 success, 1 audit bound exceeded, 2 bad input.  Errors go to
stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

from . import audit as audit_mod
from .harness import (CURVE_COLUMNS, ScoredPanel, SynthConfig, curves_to_csv, curves_to_svg,
                      generate_cohort, parse_grid, risk_utility_curve)
from .locsig import JsScoreConfig, JsScoreUnreachable, js_scores, locsig_release
from .mechanisms import ReleaseConfig, top_m_exponential, top_m_laplace
from .rng import MAX_SEED, fresh_seed
from .sensitivity import (SensitivityModel, allelic_sensitivity, chi2_max,
                          chi2_sensitivity_general, projected_chi2_sensitivity)
from .stats import (AllelicMarginError, allelic_statistic, chi2_statistic, chi2_survival,
                    score_tables)
from .tables import InvalidTableError, TableFormatError, format_tables, read_tables


class UsageError(Exception):
    def __init__(self, message: str, **details):
        self.details = details
        super().__init__(message)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, kind="usage")


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _records_text(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _seed(args) -> int:
    if args.seed is not None:
        if not 0 <= args.seed <= MAX_SEED:
            raise UsageError(f"--seed must be in [0, 2**64 - 1], got {args.seed}", flag="--seed")
        return args.seed
    if args.entropy:
        seed = fresh_seed()
        print(json.dumps({"note": "seed drawn from entropy", "seed": seed}), file=sys.stderr)
        return seed
    raise UsageError("randomized subcommand needs --seed (or --entropy)", flag="--seed")


def _positive(name: str, value, strict: bool = True):
    if value is None:
        return value
    if (strict and not value > 0) or (not strict and not value >= 0):
        raise UsageError(f"{name} must be {'> 0' if strict else '>= 0'}, got {value}", flag=name)
    return value


def _load(path: str):
    try:
        tables = read_tables(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}", kind="io", path=path) from None
    if not tables:
        raise UsageError(f"{path} holds no SNPs", kind="input", path=path)
    return tables


def _cohort(tables) -> tuple[int, int]:
    cohorts = {(t.R, t.S) for t in tables}
    if len(cohorts) != 1:
        raise UsageError(f"all SNPs must share cohort sizes, found {sorted(cohorts)[:3]}",
                         kind="input")
    return cohorts.pop()


# -- subcommands ------------------------------------------------------------

def cmd_score(args) -> int:
    if args.js:
        if args.threshold_pvalue is None:
            raise UsageError("--js needs --threshold-pvalue", flag="--threshold-pvalue")
        if not 0 < args.threshold_pvalue < 1:
            raise UsageError("--threshold-pvalue must be in (0, 1)", flag="--threshold-pvalue")
        if args.max_depth is not None and args.max_depth < 1:
            raise UsageError("--max-depth must be >= 1", flag="--max-depth")
    tables = _load(args.input)
    if args.js:
        cfg = JsScoreConfig(args.threshold_pvalue, search=args.search, max_depth=args.max_depth)
        scores = js_scores(tables, cfg)
        rows = [(t.snp_id, int(v)) for t, v in zip(tables, scores)]
        _emit(_records_text(("snp_id", "js_score"), rows, args.format), args.out)
        return 0
    if args.stat == "pvalue":
        rows = [(sc.snp_id, repr(chi2_survival(sc.score, 2)) if args.format == "csv"
                 else chi2_survival(sc.score, 2)) for sc in score_tables(tables, "chi2")]
    else:
        rows = [(sc.snp_id, repr(sc.score) if args.format == "csv" else sc.score)
                for sc in score_tables(tables, args.stat)]
    _emit(_records_text(("snp_id", "score"), rows, args.format), args.out)
    return 0


def cmd_sensitivity(args) -> int:
    stat = args.statistic.replace("-", "_")
    known = None
    if args.known_controls:
        try:
            known = tuple(int(x) for x in args.known_controls.split(","))
        except ValueError:
            raise UsageError("--known-controls must be s0,s1,s2", flag="--known-controls") from None
    try:
        model = SensitivityModel(stat, args.cases, args.controls, controls_known=known,
                                 projection_C=args.project_at, y_max=args.y_max, c=args.c)
        value = model.value()
    except ValueError as exc:
        raise UsageError(str(exc), kind="validation") from None
    if args.format == "json":
        text = json.dumps({"statistic": stat, "cases": args.cases, "controls": args.controls,
                           "value": value}) + "\n"
    else:
        text = repr(value) + "\n"
    _emit(text, args.out)
    return 0


def _auto_sensitivity(score: str, R: int, S: int, project_at: float | None) -> float:
    if project_at is not None:
        if score != "chi2":
            raise UsageError("--project-at is defined for the chi2 score only", flag="--project-at")
        return projected_chi2_sensitivity(R, S, project_at, chi2_max(R, S))
    if score == "chi2":
        return chi2_sensitivity_general(R, S)
    return allelic_sensitivity(R, S)


def _input_digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_release(args) -> int:
    if args.config:
        try:
            sidecar = json.loads(Path(args.config).read_text(encoding="utf-8"))
            config = ReleaseConfig.from_dict(sidecar["config"])
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"unusable --config {args.config}: {exc}", flag="--config") from None
        tables = _load(args.input)
        digest = sidecar.get("input_sha256")
        if digest is not None and digest != _input_digest(args.input):
            raise UsageError(f"{args.input} differs from the input recorded in {args.config}",
                             flag="--config")
        R, S = _cohort(tables)
    else:
        missing = [f for f, v in (("--epsilon", args.epsilon), ("--top-m", args.top_m)) if v is None]
        if missing:
            raise UsageError(f"missing {', '.join(missing)}", flag=missing[0])
        if not args.top_m >= 1:
            raise UsageError(f"--top-m must be >= 1, got {args.top_m}", flag="--top-m")
        _positive("--epsilon", args.epsilon)
        _positive("--sensitivity", args.sensitivity)
        _positive("--project-at", args.project_at)
        if args.mechanism == "locsig" and args.threshold_pvalue is None:
            raise UsageError("--mechanism locsig needs --threshold-pvalue", flag="--threshold-pvalue")
        seed = _seed(args)
        tables = _load(args.input)
        R, S = _cohort(tables)
        if args.top_m > len(tables):
            raise UsageError(f"--top-m must be <= number of SNPs ({len(tables)}), got {args.top_m}",
                             flag="--top-m")
        s = args.sensitivity
        if s is None:
            try:
                s = _auto_sensitivity(args.score, R, S, args.project_at)
            except ValueError as exc:
                raise UsageError(str(exc), flag="--project-at") from None
        try:
            config = ReleaseConfig(epsilon=args.epsilon, M=args.top_m, mechanism=args.mechanism,
                                   score=args.score, sensitivity=s, projection_C=args.project_at,
                                   seed=seed, threshold_p=args.threshold_pvalue)
        except ValueError as exc:
            raise UsageError(str(exc), kind="validation") from None
    try:
        config.check_panel(len(tables))
    except ValueError as exc:
        raise UsageError(str(exc), flag="--top-m") from None

    if config.mechanism == "locsig":
        output = locsig_release(tables, JsScoreConfig(config.threshold_p), config)
    else:
        scores = score_tables(tables, config.score)
        run = top_m_laplace if config.mechanism == "laplace" else top_m_exponential
        output = run(scores, config)

    rows = [(snp, repr(v) if args.format == "csv" else v) for snp, v in output.released]
    _emit(_records_text(("snp_id", "noisy_score"), rows, args.format), args.out)
    sidecar_path = args.sidecar or (f"{args.out}.json" if args.out else None)
    if sidecar_path:
        sidecar = {
            "config": config.to_dict(),
            "sensitivity": config.sensitivity,
            "cases": R,
            "controls": S,
            "n_snps": len(tables),
            "input_sha256": _input_digest(args.input),
        }
        write_atomic(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_risk_utility(args) -> int:
    seed = _seed(args)
    try:
        grid = parse_grid(args.epsilon_grid)
    except ValueError as exc:
        raise UsageError(str(exc), flag="--epsilon-grid") from None
    try:
        m_values = [int(m) for m in args.m_values.split(",")]
    except ValueError:
        raise UsageError(f"--m-values must be comma-separated integers, got {args.m_values!r}",
                         flag="--m-values") from None
    mechanisms = [m.strip() for m in args.mechanisms.split(",") if m.strip()]
    if not mechanisms:
        raise UsageError("--mechanisms is empty", flag="--mechanisms")
    for m in mechanisms:
        if m not in ("laplace", "exponential", "locsig"):
            raise UsageError(f"unknown mechanism {m!r}", flag="--mechanisms")
    if args.reps < 1:
        raise UsageError("--reps must be >= 1", flag="--reps")
    if args.workers < 1:
        raise UsageError("--workers must be >= 1", flag="--workers")
    if args.threshold_pvalue is not None and not 0 < args.threshold_pvalue < 1:
        raise UsageError("--threshold-pvalue must be in (0, 1)", flag="--threshold-pvalue")
    tables = _load(args.input)
    for m in m_values:
        if not 1 <= m <= len(tables):
            raise UsageError(f"M={m} must be between 1 and {len(tables)}", flag="--m-values")
    panel = ScoredPanel(tables, args.score)
    threshold = args.threshold_pvalue if args.threshold_pvalue is not None else 0.05 / len(tables)
    points = []
    for mech in mechanisms:
        for M in m_values:
            points += risk_utility_curve(panel, mech, M, grid, args.reps, seed, args.score,
                                         threshold_p=threshold if mech == "locsig" else None,
                                         workers=args.workers)
    if args.format == "json":
        text = json.dumps([{c: getattr(p, {"reps": "repetitions"}.get(c, c)) for c in CURVE_COLUMNS}
                           for p in points], indent=2) + "\n"
    else:
        text = curves_to_csv(points)
    _emit(text, args.out)
    if args.svg:
        write_atomic(args.svg, curves_to_svg(points))
    return 0


def cmd_synth(args) -> int:
    seed = _seed(args)
    try:
        lo, hi = (float(x) for x in args.maf_range.split(":"))
        cfg = SynthConfig(args.n_snps, args.cases, args.controls, (lo, hi), args.n_causal,
                          args.effect_size, seed)
    except ValueError as exc:
        raise UsageError(str(exc), kind="validation") from None
    tables = generate_cohort(cfg)
    if args.format == "json":
        text = json.dumps([{"snp_id": t.snp_id, **dict(zip(("r0", "r1", "r2", "s0", "s1", "s2"),
                                                              t.counts))} for t in tables],
                          indent=2) + "\n"
    else:
        text = format_tables(tables)
    _emit(text, args.out)
    return 0


def cmd_audit(args) -> int:
    _positive("--epsilon", args.epsilon)
    _positive("--sensitivity", args.sensitivity)
    for flag, v in (("--cases", args.cases), ("--controls", args.controls), ("--n-snps", args.n_snps)):
        if v < 1:
            raise UsageError(f"{flag} must be >= 1, got {v}", flag=flag)
    score = chi2_statistic if args.statistic == "chi2" else allelic_statistic
    if args.top_m < 1 or args.top_m > args.n_snps:
        raise UsageError("--top-m must be between 1 and --n-snps", flag="--top-m")
    s = args.sensitivity
    if s is None:
        s = (chi2_sensitivity_general if args.statistic == "chi2" else allelic_sensitivity)(
            args.cases, args.controls)
    try:
        pairs = audit_mod.neighbor_score_pairs(args.cases, args.controls, args.n_snps, score)
        worst = audit_mod.dp_ratio_audit(args.mechanism, pairs, args.epsilon, args.top_m, s)
    except audit_mod.UniverseTooLarge as exc:
        raise UsageError(str(exc), kind="guardrail") from None
    bound = args.epsilon / 2
    record = {"mechanism": args.mechanism, "epsilon": args.epsilon, "M": args.top_m,
              "sensitivity": s, "max_log_ratio": worst, "bound": bound,
              "ok": bool(worst <= bound + 1e-9)}
    if args.format == "json":
        text = json.dumps(record) + "\n"
    else:
        text = _records_text(tuple(record), [tuple(record.values())], "csv")
    _emit(text, args.out)
    return 0 if record["ok"] else 1


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed")
    common.add_argument("--entropy", action="store_true",
                        help="allow an OS-entropy seed when --seed is absent")
    common.add_argument("--out", default=None, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    parser = _Parser(prog="dpgwas", description="Differentially private GWAS top-M release.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", parents=[common], help="per-SNP statistics or JS scores")
    p.add_argument("input")
    p.add_argument("--stat", choices=("chi2", "allelic", "pvalue"), default="chi2")
    p.add_argument("--js", action="store_true", help="emit JS scores instead")
    p.add_argument("--threshold-pvalue", type=float, default=None)
    p.add_argument("--search", choices=("greedy", "exhaustive"), default="greedy")
    p.add_argument("--max-depth", type=int, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sensitivity", parents=[common], help="closed-form sensitivity")
    p.add_argument("--statistic", default="chi2",
                   choices=("chi2", "allelic", "pvalue2df", "projected-pvalue", "projected-chi2"))
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--controls", type=int, required=True)
    p.add_argument("--known-controls", default=None, help="s0,s1,s2 (chi2 only)")
    p.add_argument("--project-at", type=float, default=None, help="projection threshold C")
    p.add_argument("--y-max", type=float, default=None)
    p.add_argument("--c", type=float, default=None, help="p-value projection constant (>= 3)")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("release", parents=[common], help="private top-M release")
    p.add_argument("input")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--top-m", type=int)
    p.add_argument("--mechanism", choices=("laplace", "exponential", "locsig"),
                   default="exponential")
    p.add_argument("--score", choices=("chi2", "allelic"), default="chi2")
    p.add_argument("--project-at", type=float, default=None)
    p.add_argument("--sensitivity", type=float, default=None, help="override derived value")
    p.add_argument("--threshold-pvalue", type=float, default=None, help="locsig threshold")
    p.add_argument("--config", default=None, help="replay a JSON sidecar")
    p.add_argument("--sidecar", default=None, help="sidecar path (default <out>.json)")
    p.set_defaults(func=cmd_release)

    p = sub.add_parser("risk-utility", parents=[common], help="Monte-Carlo utility curves")
    p.add_argument("input")
    p.add_argument("--mechanisms", default="laplace,exponential")
    p.add_argument("--m-values", default="3,5,10,15")
    p.add_argument("--epsilon-grid", default="0.1:100000:15", help="lo:hi:count, log spaced")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--score", choices=("chi2", "allelic"), default="chi2")
    p.add_argument("--threshold-pvalue", type=float, default=None,
                   help="locsig threshold (default 0.05 / number of SNPs)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_risk_utility)

    p = sub.add_parser("synth", parents=[common], help="synthetic case/control panel")
    p.add_argument("--n-snps", type=int, required=True)
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--controls", type=int, required=True)
    p.add_argument("--maf-range", default="0.05:0.45")
    p.add_argument("--n-causal", type=int, default=0)
    p.add_argument("--effect-size", type=float, default=1.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("audit", parents=[common], help="exact selection-stage privacy audit")
    p.add_argument("--mechanism", choices=("exponential", "laplace"), default="exponential")
    p.add_argument("--cases", type=int, default=2)
    p.add_argument("--controls", type=int, default=2)
    p.add_argument("--n-snps", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--top-m", type=int, default=1)
    p.add_argument("--statistic", choices=("chi2", "allelic"), default="chi2")
    p.add_argument("--sensitivity", type=float, default=None)
    p.set_defaults(func=cmd_audit)
    return parser


def _fail(kind: str, message: str, **details) -> int:
    print(json.dumps({"error": kind, "message": message, **details}), file=sys.stderr)
    return 2


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail(exc.details.pop("kind", "validation"), str(exc), **exc.details)
    except TableFormatError as exc:
        return _fail("invalid_table", str(exc), row=exc.row_number, violations=exc.violations)
    except (InvalidTableError, AllelicMarginError, JsScoreUnreachable) as exc:
        return _fail("invalid_input", str(exc))


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
