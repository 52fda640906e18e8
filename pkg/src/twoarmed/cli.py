"""Command-line entry point: ``twoarmed <subcommand> [options]``.

Every option can also come from a JSON config file (``--config``); flags given
on the command line win.  ``TWOARMED_SEED`` sets the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import _jsonio
from .bandit import BanditParams, simulate_path
from .bounds import LIMIT, NotApplicable, Which, report
from .markov import absorption_solve
from .montecarlo import ClassifierConfig, run_batch
from .polya import urn_bandit_equivalence, urn_path
from .schedule import (
    Fallibility,
    classify_schedule,
    diagnostics_fallibility,
    schedule_from_dict,
)
from .stopping import InapplicableSchedule, monitor_path


def parse_schedule(text) -> object:
    """A schedule from a JSON object or the shorthand ``constant:G``, ``power:C,A``, ``ratio:C,A,P``."""
    if isinstance(text, dict):
        return schedule_from_dict(text)
    text = text.strip()
    if text.startswith("{"):
        return schedule_from_dict(json.loads(text))
    kind, _, rest = text.partition(":")
    vals = [float(v) for v in rest.split(",") if v]
    fields = {"constant": ["gamma"], "power": ["C", "alpha"], "ratio": ["C", "alpha", "p"]}
    if kind not in fields or len(vals) != len(fields[kind]):
        raise argparse.ArgumentTypeError(f"bad schedule {text!r}; try constant:0.1, power:1,1 or ratio:1,1,0.5")
    return schedule_from_dict({"kind": kind, **dict(zip(fields[kind], vals))})


def _default_seed() -> int:
    return int(os.environ.get("TWOARMED_SEED", "0"))


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _params(a) -> BanditParams:
    return BanditParams(a.pA, a.pB, a.x0)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(a) -> int:
    traj = simulate_path(_params(a), parse_schedule(a.schedule), a.N, a.seed, a.thin)
    if a.format == "json":
        _emit(_jsonio.dumps(traj.summary()), a.out)
    else:
        _emit(traj.to_csv(complement=a.complement), a.out)
    return 0


def _classifier(a) -> ClassifierConfig:
    return ClassifierConfig(a.eps_zero, a.eps_one, tuple(a.band), a.require_monotone)


def cmd_mc(a) -> int:
    est = run_batch(
        _params(a), parse_schedule(a.schedule), a.N, a.M, a.seed, _classifier(a), a.workers, a.level,
        keep_paths=bool(a.paths_csv),
    )
    if a.paths_csv:
        with open(a.paths_csv, "w", newline="") as fh:
            fh.write(est.paths_csv())
    _emit(est.to_json(), a.out)
    return 0


def cmd_bounds(a) -> int:
    kw = {}
    if a.kind in ("failure", "success"):
        kw = {"x": a.x0, "pB": a.pB, "gamma": a.gamma}
        if a.kind == "success":
            kw["pA"] = a.pA
    elif a.kind == "interior":
        n = LIMIT if a.n == "limit" else int(a.n)
        kw = {"x": a.x0, "pA": a.pA, "schedule": parse_schedule(a.schedule), "n": n}
    elif a.kind == "moment":
        kw = {"x": a.x0, "schedule": parse_schedule(a.schedule), "m": a.m, "which": Which(a.which)}
    elif a.kind == "beta":
        kw = {"x": a.x0, "Delta": a.delta, "m": a.m}
    try:
        rep = report(a.kind, **kw)
    except NotApplicable as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return 3
    _emit(_jsonio.dumps(rep.to_dict()), a.out)
    return 0


def cmd_solve(a) -> int:
    sol = absorption_solve(a.gamma, a.pA, a.pB, a.points, a.tol, a.max_iter)
    if a.csv:
        with open(a.csv, "w", newline="") as fh:
            fh.write(sol.to_csv())
    _emit(_jsonio.dumps(sol.to_dict()), a.out)
    return 0


def cmd_polya(a) -> int:
    urn = urn_path(a.r, a.b, a.N, a.seed)
    _emit(urn.to_csv(), a.out)
    if a.check:
        d = urn_bandit_equivalence(a.r, a.b, a.N, a.seed)
        print(_jsonio.dumps({"max_discrepancy": d, "ok": d <= 1e-12}, indent=None), file=sys.stderr)
        return 0 if d <= 1e-12 else 1
    return 0


def cmd_stop(a) -> int:
    try:
        res = monitor_path(_params(a), parse_schedule(a.schedule), a.N, a.seed, a.epsilon)
    except InapplicableSchedule as exc:
        print(f"inapplicable: {exc}", file=sys.stderr)
        return 3
    _emit(res.to_json(), a.out)
    return 0


def cmd_classify(a) -> int:
    sched = parse_schedule(a.schedule)
    verdict = classify_schedule(sched, a.pB)
    if a.diagnostics:
        d = diagnostics_fallibility(sched, a.pB, a.n_max).summary()
        _emit(_jsonio.dumps({"schedule": sched.to_dict(), "pB": a.pB, "class": verdict.value, "diagnostics": d}), a.out)
    else:
        _emit(verdict.value, a.out)
    return 0 if verdict is not Fallibility.UNKNOWN else 2


def cmd_accept(a) -> int:
    from .acceptance import run_suite

    only = [int(v) for v in a.only.split(",")] if a.only else None
    results = run_suite(a.suite, a.workers, only, echo=print)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(_jsonio.dumps([r.to_dict() for r in results]))
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# parser


def _add_params(p, x0=0.5):
    p.add_argument("--pA", type=float, default=0.6)
    p.add_argument("--pB", type=float, default=0.4)
    p.add_argument("--x0", type=float, default=x0)


def _add_schedule(p, default="power:1,1"):
    p.add_argument("--schedule", default=default, help="JSON object or constant:G | power:C,A | ratio:C,A,P")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--workers", type=int, default=1, help="threads; never changes results")
    common.add_argument("--seed", type=int, default=_default_seed())

    parser = argparse.ArgumentParser(prog="twoarmed", description="Two-armed bandit stochastic approximation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="one path as CSV")
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--thin", type=int, default=None)
    p.add_argument("--complement", action="store_true", help="add a 1 - X_n column")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc", parents=[common], help="batch estimate as JSON")
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--M", type=int, default=1_000)
    p.add_argument("--eps-zero", type=float, default=1e-6)
    p.add_argument("--eps-one", type=float, default=1e-6)
    p.add_argument("--band", type=float, nargs=2, default=[0.01, 0.99], metavar=("LO", "HI"))
    p.add_argument("--require-monotone", action="store_true")
    p.add_argument("--level", type=float, default=0.99)
    p.add_argument("--paths-csv", help="also write per-path terminal states here")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("bounds", parents=[common], help="closed-form bound as JSON")
    p.add_argument("kind", choices=["failure", "success", "interior", "moment", "beta"])
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--n", default="limit", help="integer or 'limit'")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--which", choices=[w.value for w in Which], default=Which.X_INFINITY.value)
    p.add_argument("--delta", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("solve", parents=[common], help="grid absorption solver")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--pA", type=float, default=0.6)
    p.add_argument("--pB", type=float, default=0.4)
    p.add_argument("--points", type=int, default=4097)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=10**6)
    p.add_argument("--csv", help="write (x, u(x)) here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("polya", parents=[common], help="urn path as CSV")
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--N", type=int, default=100)
    p.add_argument("--check", action="store_true", help="compare with the bandit recursion")
    p.set_defaults(func=cmd_polya)

    p = sub.add_parser("stop", parents=[common], help="stopping certificate as JSON")
    _add_params(p)
    _add_schedule(p)
    p.add_argument("--N", type=int, default=10**5)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.set_defaults(func=cmd_stop)

    p = sub.add_parser("classify", parents=[common], help="fallible / infallible")
    _add_schedule(p)
    p.add_argument("--pB", type=float, default=0.5)
    p.add_argument("--diagnostics", action="store_true")
    p.add_argument("--n-max", type=int, default=10**5)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("accept", parents=[common], help="acceptance suite")
    p.add_argument("--suite", choices=["quick", "full"], default="quick")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=cmd_accept)
    return parser


def _apply_config(parser, argv, args):
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if "schedule" in cfg and isinstance(cfg["schedule"], dict):
        cfg["schedule"] = json.dumps(cfg["schedule"])
    if "params" in cfg:
        cfg.update(cfg.pop("params"))
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = set(cfg) - known - {"command", "subcommand"}
    if unknown:
        parser.error(f"unknown config keys: {sorted(unknown)}")
    sub.set_defaults(**{k: v for k, v in cfg.items() if k in known})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _apply_config(parser, argv, args)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except (ValueError, TypeError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
