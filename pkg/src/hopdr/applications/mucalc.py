"""Alternation-free modal μ-calculus over higher-order pushdown systems.

Formulas are written in prefix form, e.g. ``(mu X (or (prop pi) (dia X)))``.
Model checking reduces an all-μ formula to a reachability game on the
product of the system with the formula's closure.  Nested ν-subformulae are
solved first (through the dual all-μ game and a complement) and handed to
the outer game as fresh free variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce
from typing import Mapping

import numpy as np

from ..automata import (
    Builder,
    NestedMultiAutomaton,
    complement,
    universal_automaton,
    universe_membership,
    with_controls,
    without_nabla,
    rename_controls,
)
from ..errors import MissingBottomSymbol, NotAllMu, NotAlternationFree, NotMonotone, ParseError
from ..stores import PushW
from ..systems import Pds, PdsCommand
from ..universe import OUTSIDE, ConfigRegion, OracleResult, StoreUniverse
from .games import ABELARD, ELOISE, Prg, totalize, winning_region

# ---------------------------------------------------------------------------
# Syntax


class Formula:
    __slots__ = ()

    def __str__(self) -> str:
        return render_formula(self)


@dataclass(frozen=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True)
class Prop(Formula):
    name: str


@dataclass(frozen=True)
class NProp(Formula):
    name: str


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class NVar(Formula):
    """A negated free variable: the complement of its valuation."""

    name: str


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Dia(Formula):
    body: Formula


@dataclass(frozen=True)
class Box(Formula):
    body: Formula


@dataclass(frozen=True)
class Mu(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Nu(Formula):
    var: str
    body: Formula


TRUE, FALSE = Const(True), Const(False)


def render_formula(f: Formula) -> str:
    match f:
        case Const(v):
            return "true" if v else "false"
        case Prop(n):
            return f"(prop {n})"
        case NProp(n):
            return f"(not (prop {n}))"
        case Var(n):
            return n
        case NVar(n):
            return f"(not {n})"
        case Not(b):
            return f"(not {render_formula(b)})"
        case Or(l, r):
            return f"(or {render_formula(l)} {render_formula(r)})"
        case And(l, r):
            return f"(and {render_formula(l)} {render_formula(r)})"
        case Dia(b):
            return f"(dia {render_formula(b)})"
        case Box(b):
            return f"(box {render_formula(b)})"
        case Mu(x, b):
            return f"(mu {x} {render_formula(b)})"
        case Nu(x, b):
            return f"(nu {x} {render_formula(b)})"
    raise TypeError(f"not a formula: {f!r}")


_TOKEN = re.compile(r"\s*(?:(?P<open>\()|(?P<close>\))|(?P<atom>[A-Za-z0-9_$']+))")
_KEYWORDS = {"prop", "not", "or", "and", "dia", "box", "mu", "nu", "true", "false"}


def parse_formula(text: str) -> Formula:
    """Parse prefix syntax: ``(prop p)``, ``X``, ``true``, ``false``, ``(not f)``,
    ``(or f g ...)``, ``(and f g ...)``, ``(dia f)``, ``(box f)``, ``(mu X f)``, ``(nu X f)``."""
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    at = 0

    def expect_atom() -> tuple[str, int]:
        nonlocal at
        if at >= len(tokens) or tokens[at][0] != "atom":
            raise ParseError("expected a name", tokens[at][2] if at < len(tokens) else len(text))
        _, val, where = tokens[at]
        at += 1
        return val, where

    def expr() -> Formula:
        nonlocal at
        if at >= len(tokens):
            raise ParseError("unexpected end of formula", len(text))
        kind, val, where = tokens[at]
        if kind == "close":
            raise ParseError("unexpected ')'", where)
        at += 1
        if kind == "atom":
            if val == "true":
                return TRUE
            if val == "false":
                return FALSE
            if val in _KEYWORDS:
                raise ParseError(f"keyword {val!r} needs parentheses", where)
            return Var(val)
        head, hpos = expect_atom()
        if head == "prop":
            name, _ = expect_atom()
            out: Formula = Prop(name)
        elif head in ("not", "dia", "box"):
            body = expr()
            out = {"not": Not, "dia": Dia, "box": Box}[head](body)
        elif head in ("or", "and"):
            parts = [expr()]
            while at < len(tokens) and tokens[at][0] != "close":
                parts.append(expr())
            if len(parts) < 2:
                raise ParseError(f"{head} needs at least two operands", hpos)
            cls = Or if head == "or" else And
            out = reduce(cls, parts)
        elif head in ("mu", "nu"):
            var, vpos = expect_atom()
            if var in _KEYWORDS:
                raise ParseError(f"cannot bind keyword {var!r}", vpos)
            out = (Mu if head == "mu" else Nu)(var, expr())
        else:
            raise ParseError(f"unknown operator {head!r}", hpos)
        if at >= len(tokens) or tokens[at][0] != "close":
            raise ParseError("expected ')'", tokens[at][2] if at < len(tokens) else len(text))
        at += 1
        return out

    f = expr()
    if at != len(tokens):
        raise ParseError("trailing input after formula", tokens[at][2])
    return f


# ---------------------------------------------------------------------------
# Structure


def children(f: Formula) -> tuple:
    match f:
        case Not(b) | Dia(b) | Box(b) | Mu(_, b) | Nu(_, b):
            return (b,)
        case Or(l, r) | And(l, r):
            return (l, r)
    return ()


def subformulas(f: Formula):
    yield f
    for c in children(f):
        yield from subformulas(c)


def size(f: Formula) -> int:
    return sum(1 for _ in subformulas(f))


def free_vars(f: Formula) -> frozenset:
    match f:
        case Var(x) | NVar(x):
            return frozenset({x})
        case Mu(x, b) | Nu(x, b):
            return free_vars(b) - {x}
    return frozenset().union(*(free_vars(c) for c in children(f)))


def _rebuild(f: Formula, kids: tuple) -> Formula:
    match f:
        case Not():
            return Not(kids[0])
        case Dia():
            return Dia(kids[0])
        case Box():
            return Box(kids[0])
        case Mu(x, _):
            return Mu(x, kids[0])
        case Nu(x, _):
            return Nu(x, kids[0])
        case Or():
            return Or(*kids)
        case And():
            return And(*kids)
    return f


def substitute(f: Formula, x: str, g: Formula) -> Formula:
    """Replace the free occurrences of variable ``x`` in ``f`` by ``g``.

    Binder names are pairwise distinct after :func:`pnf`, so no capture can
    happen.
    """
    match f:
        case Var(y) if y == x:
            return g
        case Mu(y, _) | Nu(y, _) if y == x:
            return f
    kids = children(f)
    if not kids:
        return f
    return _rebuild(f, tuple(substitute(c, x, g) for c in kids))


def replace(f: Formula, table: Mapping[Formula, Formula]) -> Formula:
    """Replace whole subformulas (outermost first)."""
    if f in table:
        return table[f]
    kids = children(f)
    if not kids:
        return f
    return _rebuild(f, tuple(replace(c, table) for c in kids))


def pnf(f: Formula) -> Formula:
    """Positive normal form with pairwise distinct binder names.

    Negations are pushed to propositions and free variables.  A bound
    variable must sit under an even number of negations relative to its
    binder, otherwise :class:`NotMonotone` is raised.
    """
    used = set(free_vars(f))

    def fresh(x: str) -> str:
        name, k = x, 1
        while name in used:
            name, k = f"{x}_{k}", k + 1
        used.add(name)
        return name

    def go(g: Formula, neg: bool, env: dict) -> Formula:
        match g:
            case Const(v):
                return Const(v != neg)
            case Prop(n):
                return NProp(n) if neg else g
            case NProp(n):
                return Prop(n) if neg else g
            case NVar(x):
                if x in env:
                    raise NotMonotone(f"negated bound variable {x}")
                return Var(x) if neg else g
            case Var(x):
                if x in env:
                    parity, name = env[x]
                    if parity != neg:
                        raise NotMonotone(f"variable {x} occurs under an odd number of negations")
                    return Var(name)
                return NVar(x) if neg else g
            case Not(b):
                return go(b, not neg, env)
            case Or(l, r):
                return (And if neg else Or)(go(l, neg, env), go(r, neg, env))
            case And(l, r):
                return (Or if neg else And)(go(l, neg, env), go(r, neg, env))
            case Dia(b):
                return (Box if neg else Dia)(go(b, neg, env))
            case Box(b):
                return (Dia if neg else Box)(go(b, neg, env))
            case Mu(x, b) | Nu(x, b):
                name = fresh(x)
                body = go(b, neg, {**env, x: (neg, name)})
                least = isinstance(g, Mu) != neg
                return (Mu if least else Nu)(name, body)
        raise TypeError(f"not a formula: {g!r}")

    return go(f, False, {})


def negate(f: Formula) -> Formula:
    """PNF of the negation of a PNF formula (binder names kept)."""
    return pnf_dual(f, frozenset())


def pnf_dual(f: Formula, bound: frozenset) -> Formula:
    match f:
        case Const(v):
            return Const(not v)
        case Prop(n):
            return NProp(n)
        case NProp(n):
            return Prop(n)
        case Var(x):
            return f if x in bound else NVar(x)
        case NVar(x):
            return Var(x)
        case Or(l, r):
            return And(pnf_dual(l, bound), pnf_dual(r, bound))
        case And(l, r):
            return Or(pnf_dual(l, bound), pnf_dual(r, bound))
        case Dia(b):
            return Box(pnf_dual(b, bound))
        case Box(b):
            return Dia(pnf_dual(b, bound))
        case Mu(x, b):
            return Nu(x, pnf_dual(b, bound | {x}))
        case Nu(x, b):
            return Mu(x, pnf_dual(b, bound | {x}))
    raise ValueError(f"{f} is not in positive normal form")


def closure(f: Formula) -> frozenset:
    """The smallest set holding ``f``, closed under taking operands and unfolding fixpoints."""
    out = set()
    work = [f]
    while work:
        g = work.pop()
        if g in out:
            continue
        out.add(g)
        match g:
            case Or(l, r) | And(l, r):
                work += [l, r]
            case Dia(b) | Box(b):
                work.append(b)
            case Mu(x, b) | Nu(x, b):
                work.append(substitute(b, x, g))
    return frozenset(out)


def check_alternation_free(f: Formula) -> None:
    """Every ν-subformula of a μ-formula, and every μ-subformula of a ν-formula, is proper."""
    for g in subformulas(f):
        if isinstance(g, (Mu, Nu)):
            opposite = Nu if isinstance(g, Mu) else Mu
            for h in subformulas(g.body):
                if isinstance(h, opposite) and g.var in free_vars(h):
                    raise NotAlternationFree(f"{h} uses {g.var}, bound by the enclosing {render_formula(g)}")


def is_all_mu(f: Formula) -> bool:
    return not any(isinstance(g, Nu) for g in subformulas(f))


def maximal_nu(f: Formula) -> list[Formula]:
    """ν-subformulas not nested inside another ν-subformula, in first-occurrence order."""
    out: list[Formula] = []

    def walk(g: Formula):
        if isinstance(g, Nu):
            if g not in out:
                out.append(g)
            return
        for c in children(g):
            walk(c)

    walk(f)
    return out


# ---------------------------------------------------------------------------
# Product game


@dataclass
class MuGame:
    game: Prg
    names: dict  # (control, formula) -> product control
    closure: tuple


def _owner(f: Formula) -> str:
    return ABELARD if isinstance(f, (And, Box)) else ELOISE


def mu_game(sys: Pds, labels: Mapping[str, frozenset], valuation: Mapping[str, NestedMultiAutomaton],
            f: Formula) -> MuGame:
    """The reachability game whose Eloise region at ``(p, f)`` is the meaning of ``f`` at ``p``.

    ``f`` must be an all-μ PNF formula; its free variables (possibly negated)
    are read from ``valuation``.
    """
    if not is_all_mu(f):
        raise NotAllMu(f"{f} contains a greatest fixpoint")
    if sys.bottom is None:
        raise MissingBottomSymbol("mu-calculus checking needs a declared bottom symbol")
    missing = free_vars(f) - set(valuation)
    if missing:
        raise ValueError(f"no valuation for {sorted(missing)}")
    cl = tuple(sorted(closure(f), key=render_formula))
    index = {g: k for k, g in enumerate(cl)}
    names = {(p, g): f"{p}~{index[g]}" for p in sys.controls for g in cl}
    controls = tuple(names[(p, g)] for p in sys.controls for g in cl)
    by_source: dict[str, list] = {}
    for c in sys.commands:
        by_source.setdefault(c.control, []).append(c)

    cmds = []
    for p in sys.controls:
        for g in cl:
            here = names[(p, g)]
            match g:
                case Or(l, r) | And(l, r):
                    nexts = [l, r]
                case Mu(x, b):
                    nexts = [substitute(b, x, g)]
                case Dia(b) | Box(b):
                    nexts = []
                    for c in by_source.get(p, ()):
                        cmds.append(PdsCommand(here, c.symbol, c.op, names[(c.target, b)]))
                case _:
                    nexts = []
            for nxt in nexts:
                for a in sys.alphabet:
                    cmds.append(PdsCommand(here, a, PushW((a,)), names[(p, nxt)]))
    product = Pds(sys.order, controls, sys.alphabet, tuple(cmds), sys.bottom)
    owners = {names[(p, g)]: _owner(g) for p in sys.controls for g in cl}

    b = Builder(sys.order, sys.alphabet)
    universal = universal_automaton(sys.order, sys.alphabet, ("u",))
    b.absorb(universal, lambda l, q: f"u.{q}")
    absorbed: dict[tuple, NestedMultiAutomaton] = {}

    def source(kind: str, x: str) -> NestedMultiAutomaton:
        key = (kind, x)
        if key not in absorbed:
            A = with_controls(valuation[x], sys.controls)
            if kind == "neg":
                A = without_nabla(complement(A))
            prefix = f"{kind}.{x}."
            b.absorb(A, lambda l, q, prefix=prefix: prefix + q)
            absorbed[key] = A
        return absorbed[key]

    for p in sys.controls:
        for g in cl:
            name = names[(p, g)]
            props = labels.get(p, frozenset())
            match g:
                case Const(True):
                    start = "u." + universal.initials[0]
                case Prop(n) if n in props:
                    start = "u." + universal.initials[0]
                case NProp(n) if n not in props:
                    start = "u." + universal.initials[0]
                case Var(x):
                    start = f"pos.{x}." + source("pos", x).initial(p)
                case NVar(x):
                    start = f"neg.{x}." + source("neg", x).initial(p)
                case _:
                    start = None
            if start is None:
                b.set_initial(name, b.add_state(sys.order, f"none:{name}"))
            else:
                b.set_initial(name, b.clone(sys.order, start, f"in:{name}"))
    target = b.build(prune=True)
    return MuGame(Prg(product, owners, target), names, cl)


def _solve_all_mu(sys: Pds, labels, valuation, f: Formula) -> NestedMultiAutomaton:
    mg = mu_game(sys, labels, valuation, f)
    region = winning_region(totalize(mg.game))
    projected = rename_controls(region, {p: mg.names[(p, f)] for p in sys.controls})
    return without_nabla(projected)


def mu_check(sys: Pds, labels: Mapping[str, frozenset], valuation: Mapping[str, NestedMultiAutomaton],
             f: Formula) -> NestedMultiAutomaton:
    """Automaton accepting every configuration of ``sys`` that satisfies ``f``.

    ``labels`` maps controls to their propositions, ``valuation`` maps the
    free variables of ``f`` to multi-automata.  Undefined stores are never
    accepted.
    """
    f = pnf(f)
    check_alternation_free(f)
    missing = free_vars(f) - set(valuation)
    if missing:
        raise ValueError(f"no valuation for {sorted(missing)}")
    labels = {p: frozenset(v) for p, v in labels.items()}
    val = {x: with_controls(A, sys.controls) for x, A in valuation.items()}
    counter = [0]

    def region(g: Formula, val: dict) -> NestedMultiAutomaton:
        if isinstance(g, Nu):
            return without_nabla(complement(region(negate(g), val)))
        table = {}
        val = dict(val)
        for h in maximal_nu(g):
            name = f"$U{counter[0]}"
            counter[0] += 1
            val[name] = region(h, val)
            table[h] = Var(name)
        return _solve_all_mu(sys, labels, val, replace(g, table))

    return region(f, val)


# ---------------------------------------------------------------------------
# Explicit-state oracle


def mu_oracle(sys: Pds, labels: Mapping[str, frozenset], valuation: Mapping[str, NestedMultiAutomaton],
              f: Formula, universe: StoreUniverse) -> OracleResult:
    """Direct fixpoint evaluation of ``f`` over the configurations of ``universe``.

    ``low`` treats moves leaving the universe as failing, ``high`` as
    succeeding; bound variables carry both bounds.
    """
    f = pnf(f)
    k, n = len(sys.controls), len(universe)
    ctrl = {p: j for j, p in enumerate(sys.controls)}
    moves = []
    for c in sys.commands:
        rows = universe.rows_with_top(c.symbol)
        moves.append((ctrl[c.control], rows, universe.successors(c.op)[rows], ctrl[c.target]))
    vals = {x: universe_membership(with_controls(A, sys.controls), universe, sys.controls).mask
            for x, A in valuation.items()}

    def prop_mask(name: str) -> np.ndarray:
        m = np.zeros((k, n), dtype=bool)
        for p, props in labels.items():
            if name in props and p in ctrl:
                m[ctrl[p]] = True
        return m

    def modal(body: tuple, diamond: bool) -> tuple:
        out = []
        for x, outside in zip(body, (False, True)):
            r = np.zeros((k, n), dtype=bool) if diamond else np.ones((k, n), dtype=bool)
            for j, rows, succ, q in moves:
                v = np.zeros(rows.size, dtype=bool)
                inside = succ >= 0
                v[inside] = x[q, succ[inside]]
                if diamond:
                    v[succ == OUTSIDE] = outside
                    r[j, rows] |= v
                else:
                    # Undefined results are not moves, so they never block a box.
                    v[succ < 0] = True
                    v[succ == OUTSIDE] = outside
                    r[j, rows] &= v
            out.append(r)
        return tuple(out)

    def ev(g: Formula, env: dict) -> tuple:
        match g:
            case Const(v):
                m = np.full((k, n), v, dtype=bool)
                return m, m
            case Prop(name):
                m = prop_mask(name)
                return m, m
            case NProp(name):
                m = ~prop_mask(name)
                return m, m
            case Var(x) if x in env:
                return env[x]
            case Var(x):
                return vals[x], vals[x]
            case NVar(x):
                return ~vals[x], ~vals[x]
            case Or(l, r):
                a, b = ev(l, env), ev(r, env)
                return a[0] | b[0], a[1] | b[1]
            case And(l, r):
                a, b = ev(l, env), ev(r, env)
                return a[0] & b[0], a[1] & b[1]
            case Dia(b):
                return modal(ev(b, env), True)
            case Box(b):
                return modal(ev(b, env), False)
            case Mu(x, b) | Nu(x, b):
                start = np.full((k, n), isinstance(g, Nu), dtype=bool)
                cur = (start, start)
                while True:
                    nxt = ev(b, {**env, x: cur})
                    if np.array_equal(nxt[0], cur[0]) and np.array_equal(nxt[1], cur[1]):
                        return cur
                    cur = nxt
        raise TypeError(f"not a formula: {g!r}")

    low, high = ev(f, {})
    none = np.zeros(k, dtype=bool)
    return OracleResult(ConfigRegion(universe, sys.controls, low, none.copy()),
                        ConfigRegion(universe, sys.controls, high, none.copy()))
