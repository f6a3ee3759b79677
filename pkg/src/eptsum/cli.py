"""Command-line entry point.

Machine-readable results go to stdout as single ``key=value`` lines, prose
goes to stderr.  Exit codes: 0 success, 1 bad input or usage, 2 oracle cap
exceeded, 3 I/O failure, 4 a checked invariant was falsified.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import harness
from .balanced import build_balanced_fast, build_balanced_naive
from .ept import ept_from_json, ept_sum_edges, ept_sum_leaves, ept_to_json, validate_ept
from .oracle import DEFAULT_CAP, HARD_CAP, OracleCapError, optimal_ept_sum
from .tree import InvalidTreeError, WeightOverflowError, format_tree, parse_tree

EXIT_OK, EXIT_INPUT, EXIT_CAP, EXIT_IO, EXIT_FALSIFIED = 0, 1, 2, 3, 4


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_tree(path: str):
    try:
        return parse_tree(_read(path))
    except (InvalidTreeError, WeightOverflowError) as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc}") from exc


def _load_ept(path: str):
    try:
        return ept_from_json(_read(path))
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: malformed EPT: {exc}") from exc


def _range(text: str, name: str) -> tuple[int, int]:
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{name} must be N or LO:HI, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"{name} range {text!r} is empty")
    return lo, hi


def _sizes(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers, got {text!r}") from None


def _outdir(path: Optional[str]) -> str:
    path = path or "."
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise _Fail(EXIT_IO, f"cannot create {path}: {exc.strerror or exc}") from exc
    return path


# -- subcommands -------------------------------------------------------------

def cmd_build(args) -> int:
    g = _load_tree(args.input)
    if args.algo == "exact":
        try:
            cost, t = optimal_ept_sum(g, args.oracle_cap)
        except OracleCapError as exc:
            raise _Fail(EXIT_CAP, f"{exc}; raise --oracle-cap (hard limit {HARD_CAP})") from exc
    else:
        t = (build_balanced_fast if args.algo == "balanced-fast" else build_balanced_naive)(g)
        cost = ept_sum_edges(g, t).total
    if args.output:
        _write(args.output, ept_to_json(t) + "\n")
    print(f"cost={cost}")
    return EXIT_OK


def cmd_eval(args) -> int:
    g = _load_tree(args.input)
    t = _load_ept(args.ept)
    report = validate_ept(g, t)
    if not report:
        print("valid=false")
        _say(str(report))
        return EXIT_INPUT
    d1 = ept_sum_edges(g, t).total
    if g.edge_weights is not None:
        print(f"def1={d1} valid=true")
        return EXIT_OK
    d2 = ept_sum_leaves(g, t)
    print(f"def1={d1} def2={d2} valid=true")
    if d1 != d2:
        _say("the two cost definitions disagree")
        return EXIT_FALSIFIED
    return EXIT_OK


def cmd_validate(args) -> int:
    g = _load_tree(args.input)
    if not args.ept:
        print(f"valid=true n={g.n} total_weight={g.total_weight}")
        return EXIT_OK
    report = validate_ept(g, _load_ept(args.ept))
    print(f"valid={'true' if report else 'false'}")
    if not report:
        _say(str(report))
        return EXIT_INPUT
    return EXIT_OK


def _specs(args):
    if args.exhaustive:
        if not 2 <= args.max_n <= 8:
            raise _Fail(EXIT_INPUT, "--max-n must be between 2 and 8")
        return list(harness.exhaustive_specs(args.max_n))
    if args.trials < 1:
        raise _Fail(EXIT_INPUT, "empty experiment: --trials must be at least 1")
    return list(harness.random_specs(args.n, args.trials, args.weights, args.seed))


def _falsified(outdir: str, exc: harness.InvariantViolation) -> int:
    path = os.path.join(outdir, "falsifying_instance.tree")
    _write(path, f"# {exc.instance_id}: {exc.detail}\n" + format_tree(exc.tree))
    _say(f"invariant falsified on {exc.instance_id}: {exc.detail} (saved to {path})")
    print(f"falsified={exc.instance_id}")
    return EXIT_FALSIFIED


def cmd_ratio(args) -> int:
    outdir = _outdir(args.output)
    try:
        if args.exhaustive:
            if not 2 <= args.max_n <= 8:
                raise _Fail(EXIT_INPUT, "--max-n must be between 2 and 8")
            records, summary = harness.run_ratio_exhaustive(args.max_n, jobs=args.jobs)
        else:
            if args.n[1] > args.oracle_cap:
                raise _Fail(EXIT_CAP, f"--n up to {args.n[1]} exceeds the oracle cap {args.oracle_cap}")
            records, summary = harness.run_ratio_random(
                args.n, args.trials, args.weights, args.seed, jobs=args.jobs, cap=args.oracle_cap
            )
    except harness.InvariantViolation as exc:
        _write(os.path.join(outdir, "ratio.csv"), harness.ratio_csv(exc.records))
        return _falsified(outdir, exc)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc
    _write(os.path.join(outdir, "ratio.csv"), harness.ratio_csv(records))
    _write(os.path.join(outdir, "summary.json"), harness.summary_json(summary))
    print(
        f"count={summary['count']} max_ratio={summary['max_ratio_num']}/{summary['max_ratio_den']} "
        f"max_ratio_decimal={summary['max_ratio_decimal']} argmax={summary['argmax_instance']}"
    )
    return EXIT_OK


def cmd_audit(args) -> int:
    outdir = _outdir(args.output)
    specs = _specs(args)
    checks = args.checks.split(",") if args.checks else harness.CHECKS
    try:
        records = harness.run_audits(specs, checks, jobs=args.jobs, cap=args.oracle_cap)
    except harness.InvariantViolation as exc:
        _write(os.path.join(outdir, "audit.csv"), harness.audit_csv(exc.records))
        return _falsified(outdir, exc)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc
    _write(os.path.join(outdir, "audit.csv"), harness.audit_csv(records))
    summary = {"count": len(records), "instances": len(specs), "failed": 0}
    _write(os.path.join(outdir, "audit_summary.json"), harness.summary_json(summary))
    print(f"records={len(records)} instances={len(specs)} failed=0")
    return EXIT_OK


def cmd_bench(args) -> int:
    outdir = _outdir(args.output)
    try:
        records, slopes = harness.run_bench(args.sizes, [args.shape], args.repeats, [args.algo], args.seed)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, str(exc)) from exc
    _write(os.path.join(outdir, "bench.csv"), harness.bench_csv(records))
    _write(os.path.join(outdir, "bench_summary.json"), json.dumps({"slopes": slopes}, separators=(",", ":")) + "\n")
    slope = slopes.get(f"{args.algo}/{args.shape}")
    print(f"records={len(records)} slope={'nan' if slope is None else f'{slope:.4f}'}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def _supply_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--exhaustive", action="store_true", help="every labelled tree with 2 <= n <= --max-n")
    p.add_argument("--max-n", type=int, default=None, help="largest n for --exhaustive (2..8)")
    p.add_argument("--n", type=lambda s: _range(s, "--n"), default=None, help="random tree size N or LO:HI (default 16)")
    p.add_argument("--trials", type=int, default=None, help="random instances (default 1000)")
    p.add_argument("--weights", type=lambda s: _range(s, "--weights"), default=(1, 1),
                   help="vertex weight range LO:HI (default 1:1); LO=0 adds zero-weight vertices")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes; output is identical for any value")
    p.add_argument("--oracle-cap", type=int, default=DEFAULT_CAP, help=f"exact solver size limit (default {DEFAULT_CAP})")
    p.add_argument("--output", default=".", help="output directory (default .)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eptsum", description="Balanced and optimal edge partition trees of vertex-weighted trees.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="build an EPT and print its cost")
    p.add_argument("--input", required=True, help="tree file")
    p.add_argument("--algo", choices=("balanced-fast", "balanced-naive", "exact"), default="balanced-fast")
    p.add_argument("--output", help="where to write the EPT as JSON")
    p.add_argument("--oracle-cap", type=int, default=DEFAULT_CAP, help=f"exact solver size limit (default {DEFAULT_CAP})")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="validate an EPT and print both cost definitions")
    p.add_argument("--input", required=True, help="tree file")
    p.add_argument("--ept", required=True, help="EPT JSON file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="validate a tree file, and optionally an EPT of it")
    p.add_argument("--input", required=True, help="tree file")
    p.add_argument("--ept", help="EPT JSON file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("experiment", help="ratio sweeps and lemma audits")
    exp = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    q = exp.add_parser("ratio", help="balanced vs optimal cost")
    _supply_flags(q)
    q.set_defaults(func=cmd_ratio)
    q = exp.add_parser("audit", help="lemma and definition audits")
    _supply_flags(q)
    q.add_argument("--checks", help="comma-separated subset of " + ",".join(harness.CHECKS))
    q.set_defaults(func=cmd_audit)

    p = sub.add_parser("audit", help="alias for 'experiment audit'")
    _supply_flags(p)
    p.add_argument("--checks", help="comma-separated subset of " + ",".join(harness.CHECKS))
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bench", help="time a builder over growing trees")
    p.add_argument("--algo", choices=("fast", "naive"), default="fast")
    p.add_argument("--shape", choices=("random", "path", "star"), default="path")
    p.add_argument("--sizes", type=_sizes, required=True, help="ascending comma-separated vertex counts")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=".", help="output directory (default .)")
    p.set_defaults(func=cmd_bench)
    return parser


def _check_supply(parser: argparse.ArgumentParser, args) -> None:
    if not hasattr(args, "exhaustive"):
        return
    if args.exhaustive:
        if args.n is not None or args.trials is not None or args.weights != (1, 1):
            parser.error("--exhaustive cannot be combined with --n, --trials or --weights")
        if args.max_n is None:
            parser.error("--exhaustive needs --max-n")
    else:
        if args.max_n is not None:
            parser.error("--max-n only applies with --exhaustive")
        args.n = args.n or (16, 16)
        args.trials = 1000 if args.trials is None else args.trials
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    if not 1 <= args.oracle_cap <= HARD_CAP:
        parser.error(f"--oracle-cap must be between 1 and {HARD_CAP}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_supply(parser, args)
    try:
        return args.func(args)
    except _Fail as exc:
        _say(f"eptsum: {exc}")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
