"""Command line front end: solve, round, suite, check, generate."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from .. import _kernel as K
from ..errors import OnlinePDError
from .instances import KINDS, generate_instance, load_instance, save_instance
from .suite import RunSpec, parse_seeds, reports_to_csv, run_suite, summarize, write_csv
from .trials import TrialSettings, run_trial, solve_fractional


def default_seed() -> int:
    return int(os.environ.get("ONLINEPD_SEED", "0"))


def _settings(args, record_trace=False) -> TrialSettings:
    return TrialSettings(mode=args.mode, eps_step=args.eps_step, feas_tol=args.feas_tol,
                         delta=args.delta, rho=args.rho, record_trace=record_trace)


def _engine_flags(p):
    p.add_argument("--mode", default="with_decrease", help="with_decrease, monotone or minimize_certify")
    p.add_argument("--delta", type=float, default=None, help="dual scaling (default: chosen per objective)")
    p.add_argument("--rho", type=float, default=None, help="column ratio bound for monotone mode")
    p.add_argument("--eps-step", type=float, default=1e-3)
    p.add_argument("--feas-tol", type=float, default=1e-9)


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    frac = solve_fractional(inst, _settings(args, record_trace=args.trace is not None))
    rep = frac.state.duality_report()
    out = dict(rep.as_dict(), steps=frac.state.steps_total(), rows=frac.state.n_rows,
               audit_pass=frac.audit.passed, failures=frac.audit.failures)
    print(json.dumps(out, indent=1))
    if args.trace:
        with open(args.trace, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(K.TRACE_FIELDS)
            for rec in frac.state.trace_array():
                w.writerow([repr(float(v)) for v in rec])
    return 0 if frac.audit.passed else 1


def cmd_round(args) -> int:
    inst = load_instance(args.instance)
    settings = _settings(args)
    frac = solve_fractional(inst, settings)
    seeds = parse_seeds(args.seeds) if args.seeds else [default_seed()]
    reports = [run_trial(inst, s, settings, frac) for s in seeds]
    text = reports_to_csv(reports)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0 if all(r.audit_pass for r in reports) else 1


def cmd_suite(args) -> int:
    spec = RunSpec.load(args.runspec)
    reports = run_suite(spec, jobs=args.jobs)
    out = args.output or spec.output
    if out:
        write_csv(reports, out)
    else:
        sys.stdout.write(reports_to_csv(reports))
    summary = summarize(reports)
    print(json.dumps(summary), file=sys.stderr)
    for r in reports:
        for f in r.failures:
            print(f"seed {r.seed}: {f}", file=sys.stderr)
    return 0 if summary["failed"] == 0 else 1


CHECK_CORPUS = (
    ("covering", {"n": 6, "rows": 20, "d": 4}, {}),
    ("covering", {"n": 6, "rows": 20, "d": 4}, {"mode": "monotone"}),
    ("covering", {"n": 6, "rows": 20, "d": 4}, {"mode": "minimize_certify"}),
    ("mixed_pc", {"n": 5, "K": 3, "p": 2, "rows": 15, "d": 3}, {}),
    ("mixed_pc", {"n": 5, "K": 3, "p": 4, "rows": 15, "d": 3}, {}),
    ("setcover_multicost", {"n": 12, "universe": 20, "K": 2, "p": 2, "d": 3}, {}),
    ("ccfl", {"m": 4, "clients": 8}, {}),
    ("pmpc", {"m": 4, "buyers": 8, "R": 10}, {}),
)


def cmd_check(args) -> int:
    failed = 0
    for kind, params, settings in CHECK_CORPUS:
        spec = RunSpec(kind=kind, params=params, seeds=list(range(args.seeds)), settings=settings)
        reports = run_suite(spec, jobs=args.jobs)
        summary = summarize(reports)
        ok = summary["failed"] == 0
        failed += not ok
        mode = reports[0].mode
        print(f"{'PASS' if ok else 'FAIL'} {kind:<20} {mode:<17} trials={summary['trials']} "
              f"max ratio/bound={summary['ratio_over_bound_max']:.3g}")
    return 0 if failed == 0 else 1


def _param(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k, json.loads(v)
    except json.JSONDecodeError:
        return k, v


def cmd_generate(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    inst = generate_instance(args.kind, dict(args.param or []), seed)
    if args.output:
        save_instance(inst, args.output)
    else:
        from .instances import instance_to_dict
        print(json.dumps(instance_to_dict(inst), indent=1))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onlinepd", description="Online primal-dual covering solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the fractional algorithm and print the duality report")
    p.add_argument("instance")
    _engine_flags(p)
    p.add_argument("--trace", help="write per-step trace records to this CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("round", help="fractional run plus rounding for a range of seeds")
    p.add_argument("instance")
    p.add_argument("--seeds", help="a..b, a comma list, or one seed (default $ONLINEPD_SEED or 0)")
    p.add_argument("-o", "--output")
    _engine_flags(p)
    p.set_defaults(func=cmd_round)

    p = sub.add_parser("suite", help="run a JSON run specification")
    p.add_argument("runspec")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("check", help="run the built-in invariant corpus")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("generate", help="write a random instance as JSON")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--param", action="append", type=_param, metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OnlinePDError, ValueError, RuntimeError, OSError) as exc:
        print(f"onlinepd: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
