"""Command-line front end: ``hopdr prestar|member|game|buchi|mucheck|oracle|dot``.

Exit codes: 0 success (or accepted), 1 rejected (``member`` only), 2 input
error, 3 unsupported feature.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .applications.buchi import BuchiPds, buchi_region, lasso_region
from .applications.games import Prg, attractor_oracle, totalize, winning_region
from .applications.mucalc import mu_check, mu_oracle, parse_formula
from .automata import (
    NestedMultiAutomaton,
    parse_automaton,
    prune_automaton,
    render_automaton,
    to_dot,
    with_controls,
)
from .errors import HopdrError, OrderUnsupported
from .saturation import pre_star
from .stores import parse_configuration
from .systems import SystemFile, oracle_forward_reach, oracle_pre_star, parse_system
from .universe import get_universe

EXIT_OK, EXIT_REJECTED, EXIT_INPUT, EXIT_UNSUPPORTED = 0, 1, 2, 3


class InputError(Exception):
    """A command-line argument is missing or inconsistent."""


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_system(args) -> tuple[SystemFile, Path]:
    if not args.system:
        raise InputError("--system is required")
    return parse_system(_read(args.system)), Path(args.system).resolve().parent


def _load_automaton(path: str) -> NestedMultiAutomaton:
    return parse_automaton(_read(path))


def _targets(args, sf: SystemFile, base: Path) -> NestedMultiAutomaton:
    if args.targets:
        return _load_automaton(args.targets)
    if sf.target:
        return _load_automaton(str(base / sf.target))
    raise InputError("a target automaton is needed (--targets or a 'target' line)")


def _game(sf: SystemFile, args, base: Path) -> Prg:
    return Prg(sf.pds(), dict(sf.owners), _targets(args, sf, base))


def _formula_text(args) -> str:
    if not args.formula:
        raise InputError("--formula is required")
    p = Path(args.formula)
    return _read(args.formula) if p.is_file() else args.formula


def _valuations(sf: SystemFile, base: Path) -> dict:
    return {x: _load_automaton(str(base / path)) for x, path in sorted(sf.valuations.items())}


def _parse_bound(text: str, order: int) -> tuple:
    try:
        parts = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"bad --bound {text!r}; expected e.g. 3,3") from None
    if order == 1 and len(parts) == 2:
        parts = parts[1:]
    if len(parts) != order:
        raise InputError(f"--bound needs {order} comma-separated numbers for an order-{order} system")
    return parts


def _emit_region(A: NestedMultiAutomaton, args) -> int:
    _write(args.out, render_automaton(A))
    if args.dot:
        Path(args.dot).write_text(to_dot(A), encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Subcommands


def cmd_prestar(args) -> int:
    sf, base = _load_system(args)
    A0 = _targets(args, sf, base)
    if args.trace:
        A, trace = pre_star(sf.apds(), A0, trace=True)
        Path(args.trace).write_text(trace.render(), encoding="utf-8")
    else:
        A = pre_star(sf.apds(), A0)
    return _emit_region(A, args)


def cmd_member(args) -> int:
    if not args.automaton or not args.config:
        raise InputError("usage: hopdr member AUTOMATON CONFIGURATION")
    A = _load_automaton(args.automaton)
    c = parse_configuration(args.config, A.order)
    ok = A.accepts_config(c.control, c.store)
    sys.stdout.write("yes\n" if ok else "no\n")
    return EXIT_OK if ok else EXIT_REJECTED


def cmd_game(args) -> int:
    sf, base = _load_system(args)
    g = _game(sf, args, base)
    region = winning_region(totalize(g))
    return _emit_region(prune_automaton(with_controls(region, g.pds.controls)), args)


def cmd_buchi(args) -> int:
    sf, _ = _load_system(args)
    region = buchi_region(BuchiPds(sf.pds(), sf.accepting), complement_result=args.complement)
    return _emit_region(region, args)


def cmd_mucheck(args) -> int:
    sf, base = _load_system(args)
    f = parse_formula(_formula_text(args))
    return _emit_region(mu_check(sf.pds(), sf.labels, _valuations(sf, base), f), args)


def cmd_oracle(args) -> int:
    sf, base = _load_system(args)
    if args.mode == "forward":
        if not args.config:
            raise InputError("--mode forward needs a start configuration")
        c = parse_configuration(args.config, sf.order)
        sets = oracle_forward_reach(sf.apds(), c, args.depth)
        lines = sorted("{" + ", ".join(sorted(str(x) for x in s)) + "}" for s in sets)
        _write(args.out, "".join(line + "\n" for line in lines) + f"# sets: {len(lines)}\n")
        return EXIT_OK
    bound = _parse_bound(args.bound, sf.order)
    universe = get_universe(sf.order, tuple(sf.alphabet), bound, sf.bottom)
    if args.mode == "prestar":
        res = oracle_pre_star(sf.apds(), _targets(args, sf, base), universe)
    elif args.mode == "game":
        res = attractor_oracle(_game(sf, args, base), universe)
    elif args.mode == "buchi":
        res = lasso_region(BuchiPds(sf.pds(), sf.accepting), universe)
    else:
        f = parse_formula(_formula_text(args))
        res = mu_oracle(sf.pds(), sf.labels, _valuations(sf, base), f, universe)
    members = sorted(str(c) for c in res.low.configurations())
    if args.sample is not None and args.sample < len(members):
        members = sorted(random.Random(args.seed).sample(members, args.sample))
    out = "".join(m + "\n" for m in members) + f"# poisoned: {res.poisoned}\n"
    _write(args.out, out)
    return EXIT_OK


def cmd_dot(args) -> int:
    path = args.automaton or args.targets
    if not path:
        raise InputError("usage: hopdr dot AUTOMATON")
    _write(args.out, to_dot(_load_automaton(path)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hopdr", description="Reachability and model checking for order-2 pushdown systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, system=True, region=True):
        if system:
            p.add_argument("--system", help="system file")
            p.add_argument("--targets", help="target automaton file (overrides a 'target' line)")
        p.add_argument("--out", help="output file (default: stdout)")
        if region:
            p.add_argument("--dot", help="also write the result as Graphviz DOT")

    p = sub.add_parser("prestar", help="saturate a target automaton into Pre*")
    common(p)
    p.add_argument("--trace", help="write the saturation trace here")
    p.set_defaults(func=cmd_prestar)

    p = sub.add_parser("member", help="test one configuration against an automaton")
    p.add_argument("automaton")
    p.add_argument("config", help='e.g. "p1 [[a b][a]]" or "p1 UNDEF"')
    p.set_defaults(func=cmd_member)

    p = sub.add_parser("game", help="Eloise's winning region of a reachability game")
    common(p)
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("buchi", help="configurations with an accepting run")
    common(p)
    p.add_argument("--complement", action="store_true", help="return configurations where no run accepts")
    p.set_defaults(func=cmd_buchi)

    p = sub.add_parser("mucheck", help="configurations satisfying an alternation-free formula")
    common(p)
    p.add_argument("--formula", help="formula file or literal prefix-syntax formula")
    p.set_defaults(func=cmd_mucheck)

    p = sub.add_parser("oracle", help="explicit-state answer on a bounded store universe")
    common(p, region=False)
    p.add_argument("--mode", choices=["prestar", "game", "buchi", "mucheck", "forward"], default="prestar")
    p.add_argument("--bound", default="3,3", help="maximal lengths per level, outermost first (default 3,3)")
    p.add_argument("--formula", help="formula for --mode mucheck")
    p.add_argument("--depth", type=int, default=4, help="step bound for --mode forward")
    p.add_argument("--sample", type=int, help="print only this many members, chosen with --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("config", nargs="?", help="start configuration for --mode forward")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("dot", help="render an automaton as Graphviz DOT")
    p.add_argument("automaton", nargs="?")
    p.add_argument("--targets", help=argparse.SUPPRESS)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except OrderUnsupported as exc:
        print(f"hopdr: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (HopdrError, InputError, ValueError, OSError) as exc:
        print(f"hopdr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
