"""Backwards reachability (Pre*) by automaton saturation.

Order 2 runs in three stages:

1. Alternate two updates.  The top-level update turns every command into
   "recipes", one per top-level edge (q, Q) leaving an initial state.  The
   level-1 update gives each recipe a fresh state in a shared level-1 arena
   and derives that state's edges from the recipe.  Recipes of generation
   i+1 mention the automata of generation i.
2. Stop once generation i+1 equals generation i after renumbering.  From
   then on the recipes point at the generation-i states themselves, and the
   level-1 arena is saturated in place until no edge can be added.
3. Label each top-level recipe edge with its state in the saturated arena.

Order 1 uses the classic saturation of a single alternating automaton.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Union

from .automata import (
    Builder,
    NestedMultiAutomaton,
    expand_front,
    minimal_sets,
    minimal_unions,
    prune_automaton,
    two_step_paths_in,
)
from .errors import OrderUnsupported, UnresolvedDesignator
from .stores import PopL, PushL, PushW
from .systems import Apds, Pds, as_apds

# ---------------------------------------------------------------------------
# Designators, elements and recipes


@dataclass(frozen=True, order=True)
class BaseRef:
    """A level-1 state of the initial arena, used as an automaton."""

    state: str

    def __str__(self) -> str:
        return self.state


@dataclass(frozen=True, order=True)
class IdentRef:
    """The recipe automaton for top-level edge ``source -> targets`` at ``generation``."""

    generation: int
    source: str
    targets: tuple

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(sorted(self.targets)))

    @property
    def key(self) -> tuple:
        return (self.source, frozenset(self.targets))

    def __str__(self) -> str:
        return f"G{self.generation}({self.source},{'+'.join(self.targets)})"


Designator = Union[BaseRef, IdentRef]


@dataclass(frozen=True)
class Ref:
    designator: Designator

    def sort_key(self):
        return (0, "", (), _designator_key(self.designator))

    def __str__(self) -> str:
        return str(self.designator)


@dataclass(frozen=True)
class PushTriple:
    """Top symbol ``symbol`` rewritten to ``word`` must be accepted by ``designator``."""

    symbol: str
    word: tuple
    designator: Designator

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))

    def sort_key(self):
        return (1, self.symbol, self.word, _designator_key(self.designator))

    def __str__(self) -> str:
        return f"({self.symbol},push[{' '.join(self.word)}],{self.designator})"


Element = Union[Ref, PushTriple]


def _designator_key(d: Designator) -> tuple:
    if isinstance(d, BaseRef):
        return (0, 0, d.state, ())
    return (1, d.generation, d.source, d.targets)


def element_set_key(S: frozenset) -> tuple:
    return tuple(sorted(e.sort_key() for e in S))


def render_element_set(S: frozenset) -> str:
    return "{" + ", ".join(str(e) for e in sorted(S, key=lambda e: e.sort_key())) + "}"


def key_sort(key: tuple) -> tuple:
    return (key[0], tuple(sorted(key[1])))


@dataclass
class IdentifierGeneration:
    """Recipes of one generation: edge key (q, Q) to a set of element sets.

    Element sets of generation ``index`` refer to identifiers of generation
    ``index - 1``.
    """

    index: int
    recipes: dict = field(default_factory=dict)

    def keys(self) -> list[tuple]:
        return sorted(self.recipes, key=key_sort)

    def render(self) -> str:
        lines = []
        for q, Q in self.keys():
            sets = sorted(self.recipes[(q, Q)], key=element_set_key)
            body = ", ".join(render_element_set(S) for S in sets)
            lines.append(f"G{self.index}({q},{'+'.join(sorted(Q))}) = {{{body}}}")
        return "\n".join(lines)


def substitute(x, j: int, i: int):
    """Re-index generation-``i`` identifier designators to generation ``j``.

    Works on designators, elements, element sets, recipe sets and whole
    generations.  Base designators are left alone.
    """
    if isinstance(x, IdentRef):
        return IdentRef(j, x.source, x.targets) if x.generation == i else x
    if isinstance(x, BaseRef):
        return x
    if isinstance(x, Ref):
        return Ref(substitute(x.designator, j, i))
    if isinstance(x, PushTriple):
        return PushTriple(x.symbol, x.word, substitute(x.designator, j, i))
    if isinstance(x, IdentifierGeneration):
        return IdentifierGeneration(x.index, {k: substitute(v, j, i) for k, v in x.recipes.items()})
    if isinstance(x, (frozenset, set)):
        return frozenset(substitute(e, j, i) for e in x)
    raise TypeError(f"cannot substitute into {type(x).__name__}")


def sim_leq(Gi: IdentifierGeneration, Gj: IdentifierGeneration) -> bool:
    """Every element set of ``Gi``, renumbered, occurs under the same key of ``Gj``."""
    if set(Gi.recipes) != set(Gj.recipes):
        return False
    for key, sets in Gi.recipes.items():
        target = Gj.recipes[key]
        for S in sets:
            if substitute(S, Gj.index - 1, Gi.index - 1) not in target:
                return False
    return True


def sim_equal(Gi: IdentifierGeneration, Gj: IdentifierGeneration) -> bool:
    return sim_leq(Gi, Gj) and sim_leq(Gj, Gi)


# ---------------------------------------------------------------------------
# Normalisation


def normalize_a0(A: NestedMultiAutomaton) -> NestedMultiAutomaton:
    return normalize_with_specials(A)[0]


def normalize_with_specials(A: NestedMultiAutomaton) -> tuple[NestedMultiAutomaton, str | None, str | None]:
    """Give initial states no incoming edges and add the two special final states.

    An initial state with incoming edges is split: a shadow copy takes over
    its outgoing edges and finality and receives every incoming edge.  At
    orders above 1 initial states are then made non-final, which is harmless
    because a store is never the empty sequence.  The top level gains
    ``qeps`` (final, no edges) and ``qstar`` (final, loops on a universal
    lower-level label).  Returns the automaton with the names of ``qeps``
    and ``qstar`` (both None at order 1).
    """
    n = A.order
    b = Builder.from_automaton(A)
    for q in A.initials:
        top_edges = b.edges[n - 1]
        if not any(q in tgt for _, _, tgt in top_edges):
            continue
        shadow = b.add_state(n, b.fresh(n, q + "^"), q in A.top.finals)
        copies = {(shadow, lab, tgt) for src, lab, tgt in top_edges if src == q}
        b.replace_edges(n, [(src, lab, (tgt - {q}) | {shadow} if q in tgt else tgt)
                            for src, lab, tgt in top_edges | copies])
    if n == 1:
        return b.build(), None, None
    b.finals[n - 1] -= set(A.initials)
    qeps = b.add_state(n, b.fresh(n, "qeps"), True)
    qstar = b.add_state(n, b.fresh(n, "qstar"), True)
    b.add_edge(n, qstar, b.universal(n - 1), {qstar})
    return b.build(), qeps, qstar


# ---------------------------------------------------------------------------
# Order-2 engine


@dataclass
class SaturationTrace:
    skeletons: list = field(default_factory=list)  # per A_i: sorted (src, designator, targets)
    generations: list = field(default_factory=list)  # IdentifierGeneration 1..
    fixpoint_generation: int = 0
    frozen_iterations: int = 0
    level1_edge_counts: list = field(default_factory=list)

    def render(self) -> str:
        lines = []
        for i, sk in enumerate(self.skeletons):
            lines.append(f"# skeleton A{i}")
            lines.append("level 2")
            for src, d, tgt in sk:
                lines.append(f"edge {src} @{d} -> {{{','.join(sorted(tgt))}}}")
            if i + 1 <= len(self.generations):
                lines.append(f"# recipes G{i + 1}")
                text = self.generations[i].render()
                if text:
                    lines.append(text)
        lines.append(f"# fixpoint at generation {self.fixpoint_generation}")
        lines.append(f"# frozen iterations {self.frozen_iterations}")
        lines.append("# level-1 edge counts " + " ".join(str(c) for c in self.level1_edge_counts))
        return "\n".join(lines) + "\n"


class _Arena:
    """The shared level-1 arena: letters to sets of target sets, per state."""

    def __init__(self, alphabet):
        self.alphabet = tuple(alphabet)
        self.states: set[str] = set()
        self.finals: set[str] = set()
        self.out: dict[str, dict[str, set]] = {}

    def add_state(self, q: str, final: bool = False):
        self.states.add(q)
        self.out.setdefault(q, {})
        if final:
            self.finals.add(q)

    def add_edge(self, q: str, a: str, tgt: frozenset) -> bool:
        """Add ``q -a-> tgt`` unless a smaller target set is already there.

        Acceptance is monotone in the target set, so edges whose targets
        contain another edge's targets are dropped.
        """
        bucket = self.out[q].setdefault(a, set())
        if any(t <= tgt for t in bucket):
            return False
        bucket.difference_update([t for t in bucket if tgt <= t])
        bucket.add(tgt)
        return True

    def edge_count(self) -> int:
        return sum(len(v) for d in self.out.values() for v in d.values())

    def edge_index(self) -> dict:
        return {q: tuple((a, t) for a, ts in d.items() for t in ts) for q, d in self.out.items()}


class Saturation:
    """One order-2 Pre* computation.  Call :meth:`run` once."""

    def __init__(self, sys: Apds | Pds, A0: NestedMultiAutomaton, max_generations: int | None = None):
        sys = as_apds(sys)
        if sys.order != 2 or A0.order != 2:
            raise ValueError("the order-2 engine needs an order-2 system and automaton")
        if set(A0.alphabet) - set(sys.alphabet):
            raise ValueError("automaton alphabet exceeds the system alphabet")
        self.sys = sys
        A0 = _align(A0, sys)
        self.A0, self.qeps, self.qstar = normalize_with_specials(A0)
        self.initial = dict(zip(self.A0.controls, self.A0.initials))
        self.nabla = set(self.A0.nabla)
        self.arena = _Arena(sys.alphabet)
        lvl1 = self.A0.level(1)
        for q in lvl1.states:
            self.arena.add_state(q, q in lvl1.finals)
        for src, a, tgt in lvl1.edges:
            self.arena.add_edge(src, a, tgt)
        self.top_symbol_state = {}
        univ = [q for q in lvl1.states if q in lvl1.finals and all(
            (q, a) in lvl1.by_label and frozenset({q}) in lvl1.by_label[(q, a)] for a in sys.alphabet)]
        sink = univ[0] if univ else None
        if sink is None:
            sink = self._fresh("U*")
            self.arena.add_state(sink, True)
            for a in sys.alphabet:
                self.arena.add_edge(sink, a, frozenset({sink}))
        for a in sys.alphabet:
            q = self._fresh(f"top_{a}")
            self.arena.add_state(q)
            self.arena.add_edge(q, a, frozenset({sink}))
            self.top_symbol_state[a] = q
        self.base_edges = sorted(
            ((src, BaseRef(lab), tgt) for src, lab, tgt in self.A0.top.edges),
            key=lambda e: (e[0], _designator_key(e[1]), tuple(sorted(e[2]))),
        )
        self.g_names: dict[tuple, str] = {}
        self.trace = SaturationTrace()
        n_top = len(self.A0.top.states)
        self.max_generations = max_generations or min(10_000, n_top * n_top * len(sys.alphabet) * 2 ** n_top + 2)

    def _fresh(self, base: str) -> str:
        name = base
        while name in self.arena.states:
            name += "'"
        return name

    def g_state(self, generation: int, key: tuple) -> str:
        name = self.g_names.get((generation, key))
        if name is None:
            q, Q = key
            name = self._fresh(f"g{generation}:{q}>{'+'.join(sorted(Q))}")
            self.g_names[(generation, key)] = name
        return name

    def resolve(self, d: Designator) -> str:
        if isinstance(d, BaseRef):
            if d.state not in self.arena.states:
                raise UnresolvedDesignator(f"no level-1 state {d.state!r}")
            return d.state
        name = self.g_names.get((d.generation, d.key))
        if name is None or name not in self.arena.states:
            raise UnresolvedDesignator(f"identifier {d} has no state yet")
        return name

    # -- top-level update ---------------------------------------------------

    def skeleton(self, gen: IdentifierGeneration) -> list[tuple]:
        edges = list(self.base_edges)
        for q, Q in gen.keys():
            edges.append((q, IdentRef(gen.index, q, tuple(Q)), Q))
        return edges

    def td_step(self, gen: IdentifierGeneration) -> IdentifierGeneration:
        """Recipes of generation ``gen.index + 1`` from the skeleton labelled by ``gen``."""
        out: dict[str, list] = {}
        for src, d, tgt in self.skeleton(gen):
            out.setdefault(src, []).append((d, tgt))
        recipes: dict[tuple, set] = {key: set() for key in gen.recipes}
        bits: dict = {}

        def mask(elements) -> int:
            m = 0
            for e in elements:
                m |= 1 << bits.setdefault(e, len(bits))
            return m

        for cmd in self.sys.commands:
            qj = self.initial[cmd.control]
            top_a = Ref(BaseRef(self.top_symbol_state[cmd.symbol]))
            per_move = []
            for op, target in cmd.sorted_moves():
                qk = self.initial[target]
                opts = set()
                if isinstance(op, PushL):
                    for th1, _, th2, Qt in two_step_paths_in(out, qk):
                        opts.add((mask([top_a, *(Ref(t) for t in th1 | th2)]), Qt))
                elif isinstance(op, PopL):
                    opts.add((mask([top_a]), frozenset({qk})))
                    if cmd.control in self.nabla:
                        opts.add((mask([top_a]), frozenset({self.qeps})))
                else:
                    for th, Qt in out.get(qk, ()):
                        opts.add((mask([PushTriple(cmd.symbol, op.word, th)]), Qt))
                if not opts:
                    break
                per_move.append(opts)
            else:
                for Q, masks in _combine_moves(per_move).items():
                    recipes.setdefault((qj, Q), set()).update(masks)
        element = sorted(bits, key=bits.get)

        def decode(m: int) -> frozenset:
            out = []
            while m:
                low = m & -m
                out.append(element[low.bit_length() - 1])
                m ^= low
            return frozenset(out)

        return IdentifierGeneration(
            gen.index + 1, {k: frozenset(decode(m) for m in minimal_masks(v)) for k, v in recipes.items()})

    # -- level-1 update -----------------------------------------------------

    def _derive_edges(self, recipes: dict, generation: int) -> list[tuple]:
        """Edges demanded by ``recipes`` against the current arena (not yet added)."""
        arena = self.arena
        word_cache: dict[tuple, set] = {}
        index = arena.edge_index()

        def runs(state: str, word: tuple) -> set:
            key = (state, word)
            got = word_cache.get(key)
            if got is None:
                fronts = {frozenset({state})}
                for a in word:
                    nxt = set()
                    for f in fronts:
                        nxt |= {t for _, t in expand_front(index, f, a)}
                    fronts = nxt
                    if not fronts:
                        break
                got = minimal_sets(fronts)
                word_cache[key] = got
            return got

        new = []
        for key in sorted(recipes, key=key_sort):
            g = self.g_state(generation, key)
            for S in sorted(recipes[key], key=element_set_key):
                symbols = {e.symbol for e in S if isinstance(e, PushTriple)}
                letters = sorted(symbols) if symbols else arena.alphabet
                for b in letters:
                    per = []
                    for e in sorted(S, key=lambda e: e.sort_key()):
                        q = self.resolve(e.designator)
                        if isinstance(e, Ref):
                            opts = arena.out[q].get(b, ())
                        else:
                            opts = runs(q, e.word) if b == e.symbol else ()
                        if not opts:
                            break
                        per.append(sorted(opts, key=lambda t: tuple(sorted(t))))
                    else:
                        new.extend((g, b, t) for t in minimal_unions(per))
        return new

    def tg_step(self, gen: IdentifierGeneration) -> None:
        """Add the states of ``gen`` to the arena with inherited and derived edges."""
        j = gen.index
        for key in gen.keys():
            g = self.g_state(j, key)
            self.arena.add_state(g)
        derived = self._derive_edges(gen.recipes, j)
        for key in gen.keys():
            g = self.g_state(j, key)
            prev = self.g_names.get((j - 1, key))
            if prev is not None:
                for a, ts in self.arena.out[prev].items():
                    for t in ts:
                        self.arena.add_edge(g, a, t)
        for g, b, tgt in derived:
            self.arena.add_edge(g, b, tgt)

    def saturate_frozen(self, gen: IdentifierGeneration) -> int:
        """Saturate the arena under the recipes of ``gen`` pointing at its own states."""
        frozen = substitute(gen, gen.index, gen.index - 1).recipes
        limit = max(1, len(self.arena.states)) ** 2 * len(self.sys.alphabet) * 64 + 16
        rounds = 0
        while True:
            rounds += 1
            if rounds > limit:
                raise RuntimeError(f"frozen saturation exceeded {limit} rounds")
            added = False
            for g, b, tgt in self._derive_edges(frozen, gen.index):
                added |= self.arena.add_edge(g, b, tgt)
            if not added:
                return rounds

    # -- driver -------------------------------------------------------------

    def run(self) -> NestedMultiAutomaton:
        gen = IdentifierGeneration(0, {})
        self.trace.skeletons.append(self.skeleton(gen))
        self.trace.level1_edge_counts.append(self.arena.edge_count())
        while True:
            if gen.index >= self.max_generations:
                raise RuntimeError(f"no fixed point after {gen.index} generations")
            nxt = self.td_step(gen)
            self.trace.generations.append(nxt)
            if set(nxt.recipes) == set(gen.recipes) and sim_equal(gen, nxt):
                break
            self.tg_step(nxt)
            gen = nxt
            self.trace.skeletons.append(self.skeleton(gen))
            self.trace.level1_edge_counts.append(self.arena.edge_count())
        self.trace.fixpoint_generation = gen.index
        if gen.index > 0:
            self.trace.frozen_iterations = self.saturate_frozen(gen)
            self.trace.level1_edge_counts.append(self.arena.edge_count())
        return self.assemble(gen)

    def assemble(self, gen: IdentifierGeneration) -> NestedMultiAutomaton:
        b = Builder(2, self.sys.alphabet)
        for q in sorted(self.arena.states):
            b.add_state(1, q, q in self.arena.finals)
            for a, ts in self.arena.out[q].items():
                for t in ts:
                    b.add_edge(1, q, a, t)
        top = self.A0.top
        for q in top.states:
            b.add_state(2, q, q in top.finals)
        for src, d, tgt in self.skeleton(gen):
            label = d.state if isinstance(d, BaseRef) else self.g_state(gen.index, d.key)
            b.add_edge(2, src, label, tgt)
        for p in self.A0.controls:
            b.set_initial(p, self.initial[p])
        b.nabla = set(self.nabla)
        return prune_automaton(b.build())


def minimal_masks(masks) -> set[int]:
    """The inclusion-minimal members of a collection of bitmask sets."""
    kept: set[int] = set()
    for m in sorted(set(masks), key=int.bit_count):
        if 1 << m.bit_count() < len(kept):
            # Fewer proper submasks than kept sets: look each one up.
            sub, hit = m, False
            while sub and not hit:
                sub = (sub - 1) & m
                hit = sub in kept
        else:
            hit = any(k & ~m == 0 for k in kept)
        if not hit:
            kept.add(m)
    return kept


def _combine_moves(per_move: list) -> dict:
    """Pick one (element mask, targets) option per move; union both sides of each pick.

    Returns targets -> minimal element masks.  A larger element set under
    the same targets only adds requirements, and the arena keeps minimal
    edges anyway, so dropping it changes no derived edge.
    """
    acc = {frozenset(): {0}}
    for opts in per_move:
        nxt: dict[frozenset, set] = {}
        for Q, masks in acc.items():
            for m_o, Q_o in opts:
                nxt.setdefault(Q | Q_o, set()).update(m | m_o for m in masks)
        acc = {Q: minimal_masks(ms) for Q, ms in nxt.items()}
    return acc


def _align(A0: NestedMultiAutomaton, sys: Apds) -> NestedMultiAutomaton:
    """Index ``A0`` by the system's controls, widening its alphabet to the system's."""
    if tuple(A0.controls) == tuple(sys.controls) and tuple(A0.alphabet) == tuple(sys.alphabet):
        return A0
    extra = set(A0.controls) - set(sys.controls)
    if extra:
        raise ValueError(f"automaton mentions unknown controls {sorted(extra)}")
    b = Builder.from_automaton(A0)
    b.alphabet = tuple(sys.alphabet)
    b.controls, b.initials = [], []
    for p in sys.controls:
        if p in A0.initial_map:
            b.set_initial(p, A0.initial(p))
        else:
            b.set_initial(p, b.add_state(A0.order, b.fresh(A0.order, f"none:{p}")))
    b.nabla = set(A0.nabla)
    return b.build()


# ---------------------------------------------------------------------------
# Order 1


def _pre_star_order1(sys: Apds, A0: NestedMultiAutomaton) -> NestedMultiAutomaton:
    A = normalize_a0(_align(A0, sys))
    b = Builder.from_automaton(A)
    out: dict[str, set] = {}
    for src, a, tgt in b.edges[0]:
        out.setdefault(src, set()).add((a, tgt))
    initial = dict(zip(A.controls, A.initials))
    for cmd in sys.commands:
        for op, _ in cmd.moves:
            if not isinstance(op, PushW):
                raise ValueError(f"{op} is not an order-1 operation")
    changed = True
    while changed:
        changed = False
        for cmd in sys.commands:
            per = []
            for op, target in cmd.sorted_moves():
                fronts = {frozenset({initial[target]})}
                for a in op.word:
                    nxt = set()
                    for f in fronts:
                        nxt |= {t for _, t in expand_front(out, f, a)}
                    fronts = nxt
                if not fronts:
                    break
                per.append(sorted(fronts, key=lambda t: tuple(sorted(t))))
            else:
                src = initial[cmd.control]
                for combo in itertools.product(*per):
                    edge = (cmd.symbol, frozenset().union(*combo))
                    if edge not in out.setdefault(src, set()):
                        out[src].add(edge)
                        changed = True
    b.replace_edges(1, ((src, a, t) for src, es in out.items() for a, t in es))
    return prune_automaton(b.build())


def pre_star(sys: Apds | Pds, A0: NestedMultiAutomaton, *, trace: bool = False):
    """An automaton for every configuration that can be driven into ``L(A0)``.

    With ``trace=True`` returns ``(automaton, SaturationTrace)``; the trace is
    empty at order 1.
    """
    apds = as_apds(sys)
    if apds.order != A0.order:
        raise ValueError("system and automaton orders differ")
    if apds.order > 2:
        raise OrderUnsupported(f"saturation is implemented for orders 1 and 2, not {apds.order}")
    if apds.order == 1:
        result, tr = _pre_star_order1(apds, A0), SaturationTrace()
    else:
        engine = Saturation(apds, A0)
        result, tr = engine.run(), engine.trace
    return (result, tr) if trace else result
