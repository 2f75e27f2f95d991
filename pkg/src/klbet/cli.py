"""Command-line entry point: ``klbet params | simulate | verify``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .chooser import ChooserParams, params_from_k
from .core import InvariantViolation, PreconditionError
from .game import GAMBLERS, make_gambler, run_game
from .strategy import BetError
from .verify import SUITES, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=1))


def _error(kind: str, message: str, code: int) -> int:
    _emit({"error": kind, "message": message})
    return code


def _load_params(args) -> ChooserParams:
    if args.desk_params:
        return ChooserParams.from_json(json.loads(Path(args.desk_params).read_text()))
    return params_from_k(args.k)


def cmd_params(args) -> int:
    p = params_from_k(args.k)
    out = p.to_json()
    out["xi"] = f"{p.xi.numerator}/{p.xi.denominator}"
    out["max_choices"] = p.max_choices
    _emit(out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        params = _load_params(args)
    except (PreconditionError, ValueError, KeyError, OSError) as err:
        return _error("bad-params", str(err), EXIT_USAGE)
    fits = params.ell <= args.budget
    if args.dry_run:
        _emit({"params": params.to_json(), "preconditions": params.preconditions(), "would_run": fits, "position_budget": args.budget})
        return EXIT_OK
    if not fits:
        return _error("too-large", f"ell = {params.ell} exceeds the position budget {args.budget}", EXIT_USAGE)
    try:
        gambler = make_gambler(args.gambler, args.seed)
    except PreconditionError as err:
        return _error("bad-gambler", str(err), EXIT_USAGE)
    enforce = args.enforce_conservative or args.gambler.startswith("savings-")
    try:
        tr = run_game(params, gambler, args.horizon, enforce_conservative=enforce, seed=args.seed, kl_every=args.kl_every)
    except (InvariantViolation, BetError) as err:
        return _error(type(err).__name__, str(err), EXIT_FAIL)
    if args.out:
        out = Path(args.out)
        out.write_text(tr.dumps())
        out.with_suffix(".csv").write_text(tr.to_csv())
    _emit({"turns": len(tr.turns), "verdict": tr.verdict, "out": args.out})
    return EXIT_OK


def cmd_verify(args) -> int:
    rep = run_suite(args.suite, args.cases, args.seed)
    body = rep.to_json()
    if args.out:
        Path(args.out).write_text(json.dumps(body, sort_keys=True, indent=1) + "\n")
    _emit({"suite": rep.suite, "passed": rep.passed, "failed": rep.failed, "elapsed": round(rep.elapsed, 3)})
    return EXIT_OK if rep.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="klbet", description="Betting game on open sets: simulation and lemma checks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print the parameters derived from k")
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_params)

    s = sub.add_parser("simulate", help="play the chooser against a packaged gambler")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--k", type=int)
    src.add_argument("--desk-params", metavar="FILE")
    s.add_argument("--gambler", default="null", choices=GAMBLERS)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--horizon", type=int, default=10_000)
    s.add_argument("--out", metavar="PATH")
    s.add_argument("--dry-run", action="store_true")
    s.add_argument("--budget", type=int, default=10 ** 6, help="largest ell that may be simulated")
    s.add_argument("--enforce-conservative", action="store_true")
    s.add_argument("--kl-every", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="run a seeded property suite")
    v.add_argument("--suite", required=True, choices=sorted(SUITES))
    v.add_argument("--cases", type=int)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", metavar="PATH")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "k", None) is not None and args.k < 0:
        return _error("bad-params", "k must be >= 0", EXIT_USAGE)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
