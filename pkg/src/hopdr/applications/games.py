"""Two-player reachability games on higher-order pushdown graphs.

Eloise's winning region is the set of configurations from which she can
force a visit to the target set.  It is computed as Pre* of an alternating
system in which each Abelard position moves to the set of all its
successors at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..automata import Builder, NestedMultiAutomaton, union, universal_automaton, with_controls, without_nabla
from ..errors import MissingBottomSymbol
from ..saturation import pre_star
from ..stores import PushW
from ..systems import Apds, ApdsCommand, Pds, PdsCommand
from ..universe import OUTSIDE, UNDEFINED, ConfigRegion, OracleResult, StoreUniverse, region_from_targets

ELOISE, ABELARD = "E", "A"


@dataclass(frozen=True)
class Prg:
    """A pushdown reachability game: a system, an owner per control, and a target automaton."""

    pds: Pds
    owners: dict = field(hash=False)
    target: NestedMultiAutomaton = field(hash=False)

    def __post_init__(self):
        missing = set(self.pds.controls) - set(self.owners)
        extra = set(self.owners) - set(self.pds.controls)
        if missing or extra:
            raise ValueError(f"owners must cover exactly the controls (missing {sorted(missing)}, extra {sorted(extra)})")
        bad = {v for v in self.owners.values()} - {ELOISE, ABELARD}
        if bad:
            raise ValueError(f"owners must be {ELOISE!r} or {ABELARD!r}, got {sorted(bad)}")
        if self.target.order != self.pds.order:
            raise ValueError("target order differs from the system order")
        object.__setattr__(self, "target", with_controls(self.target, self.pds.controls))

    def controls_of(self, who: str) -> tuple:
        return tuple(p for p in self.pds.controls if self.owners[p] == who)


def _fresh_control(base: str, taken) -> str:
    name = base
    while name in taken:
        name += "_"
    return name


def totalize(g: Prg) -> Prg:
    """Route every (control, symbol) without a command to a losing sink of its owner.

    ``lose_E`` and ``lose_A`` loop forever; every configuration of
    ``lose_A`` becomes a target, so a stuck Abelard loses and a stuck Eloise
    never reaches the target.
    """
    pds = g.pds
    if pds.bottom is None:
        raise MissingBottomSymbol("games need a declared bottom symbol")
    lose = {ELOISE: _fresh_control("lose_E", pds.controls), ABELARD: _fresh_control("lose_A", pds.controls)}
    controls = tuple(pds.controls) + (lose[ELOISE], lose[ABELARD])
    owned = {(c.control, c.symbol) for c in pds.commands}
    cmds = list(pds.commands)
    for p in pds.controls:
        for a in pds.alphabet:
            if (p, a) not in owned:
                cmds.append(PdsCommand(p, a, PushW((a,)), lose[g.owners[p]]))
    for sink in lose.values():
        for a in pds.alphabet:
            cmds.append(PdsCommand(sink, a, PushW((a,)), sink))
    total = Pds(pds.order, controls, pds.alphabet, tuple(cmds), pds.bottom)
    owners = dict(g.owners)
    owners[lose[ELOISE]], owners[lose[ABELARD]] = ELOISE, ABELARD
    sink_targets = universal_automaton(pds.order, pds.alphabet, (lose[ABELARD],))
    target = union(with_controls(g.target, controls), with_controls(sink_targets, controls))
    return Prg(total, owners, target)


def game_to_apds(g: Prg) -> tuple[Apds, NestedMultiAutomaton]:
    """The alternating system of the game and the automaton of Abelard's undefined configurations."""
    pds = g.pds
    cmds = []
    grouped: dict[tuple, set] = {}
    for c in pds.commands:
        if g.owners[c.control] == ELOISE:
            cmds.append(ApdsCommand(c.control, c.symbol, frozenset({(c.op, c.target)})))
        else:
            grouped.setdefault((c.control, c.symbol), set()).add((c.op, c.target))
    for (p, a), moves in sorted(grouped.items()):
        cmds.append(ApdsCommand(p, a, frozenset(moves)))
    apds = Apds(pds.order, pds.controls, pds.alphabet, tuple(cmds), pds.bottom)
    b = Builder(pds.order, pds.alphabet)
    for p in pds.controls:
        b.set_initial(p, b.add_state(pds.order, f"stuck:{p}"))
    b.nabla = set(g.controls_of(ABELARD))
    return apds, b.build()


def winning_region(g: Prg) -> NestedMultiAutomaton:
    """Eloise's winning region of a totalized game, without Abelard's undefined configurations."""
    apds, stuck = game_to_apds(g)
    region = pre_star(apds, union(g.target, stuck))
    return without_nabla(region, g.controls_of(ABELARD))


# ---------------------------------------------------------------------------
# Explicit-state oracle


def _attractor(g: Prg, universe: StoreUniverse, base: ConfigRegion, outside_wins: bool) -> np.ndarray:
    pds = g.pds
    ctrl = {p: j for j, p in enumerate(pds.controls)}
    abelard = np.array([g.owners[p] == ABELARD for p in pds.controls])
    # Undefined successors keep the source control: stuck for Abelard, a target only if the target says so.
    undefined_wins = abelard | base.nabla
    moves: dict[tuple, list] = {}
    for c in pds.commands:
        moves.setdefault((ctrl[c.control], c.symbol), []).append((universe.successors(c.op), ctrl[c.target]))
    x = base.mask.copy()
    while True:
        nxt = x.copy()
        for (j, a), ms in moves.items():
            rows = universe.rows_with_top(a)
            vals = []
            for succ, q in ms:
                s = succ[rows]
                v = np.zeros(rows.size, dtype=bool)
                inside = s >= 0
                v[inside] = x[q, s[inside]]
                v[s == UNDEFINED] = undefined_wins[j]
                if outside_wins:
                    v[s == OUTSIDE] = True
                vals.append(v)
            hit = np.logical_and.reduce(vals) if abelard[j] else np.logical_or.reduce(vals)
            nxt[j, rows] |= hit
        # Abelard positions without any command are stuck: Eloise wins there.
        for j in np.flatnonzero(abelard):
            has_move = np.zeros(len(universe), dtype=bool)
            for (jj, a), _ in moves.items():
                if jj == j:
                    has_move[universe.rows_with_top(a)] = True
            nxt[j, ~has_move] = True
        if np.array_equal(nxt, x):
            return x
        x = nxt


def attractor_oracle(g: Prg, universe: StoreUniverse) -> OracleResult:
    """Stage-by-stage attractor of the target over the truncated configuration graph.

    Undefined configurations are included exactly for Eloise controls whose
    target accepts them.
    """
    pds = g.pds
    base = region_from_targets(g.target, universe, pds.controls)
    nabla = base.nabla & np.array([g.owners[p] == ELOISE for p in pds.controls])
    low = _attractor(g, universe, base, outside_wins=False)
    high = _attractor(g, universe, base, outside_wins=True)
    return OracleResult(ConfigRegion(universe, pds.controls, low, nabla.copy()),
                        ConfigRegion(universe, pds.controls, high, nabla.copy()))
