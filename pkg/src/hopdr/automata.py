"""Alternating nested store automata.

An order-n automaton has one state arena per level.  Level-1 edges read
symbols.  A level-l edge (l > 1) is labelled by a state of the level-(l-1)
arena, and that state accepts the (l-1)-store the edge reads.  Every edge goes
to a non-empty set of targets, and all of them must accept the rest of the
word.  The top level assigns one initial state to each control.  A control
listed in ``nabla`` also accepts the undefined store.

Automata are immutable.  :class:`Builder` is the mutable companion used by
every construction in this module and by the saturation engine.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyMember, ParseError
from .stores import SYMBOL_RE, UNDEF, StoreOrUndef

ID_RE = re.compile(r"[^\s{},=@#][^\s{},=#]*")

UNIVERSAL = "U*"
SINK = "!sink"


def _targets_key(t: frozenset) -> tuple:
    return tuple(sorted(t))


@dataclass(frozen=True)
class Level:
    """One state arena.  ``edges`` holds canonical (source, label, targets) triples."""

    states: tuple
    finals: frozenset
    edges: tuple

    @cached_property
    def out(self) -> dict[str, tuple]:
        d: dict[str, list] = {s: [] for s in self.states}
        for src, label, tgt in self.edges:
            d[src].append((label, tgt))
        return {s: tuple(v) for s, v in d.items()}

    @cached_property
    def by_label(self) -> dict[tuple, tuple]:
        d: dict[tuple, list] = {}
        for src, label, tgt in self.edges:
            d.setdefault((src, label), []).append(tgt)
        return {k: tuple(v) for k, v in d.items()}

    @cached_property
    def state_set(self) -> frozenset:
        return frozenset(self.states)


@dataclass(frozen=True)
class NestedMultiAutomaton:
    order: int
    alphabet: tuple
    levels: tuple  # levels[l - 1] is the level-l arena
    controls: tuple
    initials: tuple
    nabla: frozenset = frozenset()

    def __post_init__(self):
        if len(self.levels) != self.order:
            raise ValueError("one arena per level is required")
        if len(self.controls) != len(self.initials):
            raise ValueError("one initial state per control is required")
        if len(set(self.initials)) != len(self.initials):
            raise ValueError("initial states must be pairwise distinct")
        top = self.levels[-1].state_set
        for q in self.initials:
            if q not in top:
                raise ValueError(f"initial state {q!r} is not a top-level state")
        if not set(self.nabla) <= set(self.controls):
            raise ValueError("undefined-store acceptance refers to an unknown control")
        alpha = set(self.alphabet)
        for l, lvl in enumerate(self.levels, start=1):
            states = lvl.state_set
            lower = self.levels[l - 2].state_set if l > 1 else None
            for src, label, tgt in lvl.edges:
                if src not in states or not tgt or not tgt <= states:
                    raise ValueError(f"bad level-{l} edge {src} {label} -> {sorted(tgt)}")
                if l == 1 and label not in alpha:
                    raise ValueError(f"edge label {label!r} is not in the alphabet")
                if l > 1 and label not in lower:
                    raise ValueError(f"designator {label!r} is not a level-{l - 1} state")

    # -- lookups -----------------------------------------------------------

    def level(self, l: int) -> Level:
        return self.levels[l - 1]

    @property
    def top(self) -> Level:
        return self.levels[-1]

    def initial(self, control) -> str:
        if isinstance(control, int):
            return self.initials[control]
        return self.initials[self.controls.index(control)]

    @cached_property
    def initial_map(self) -> dict:
        return dict(zip(self.controls, self.initials))

    # -- membership --------------------------------------------------------

    @cached_property
    def _accept_cache(self) -> list[dict]:
        return [dict() for _ in self.levels]

    def accepting_states(self, level: int, content) -> frozenset:
        """States of ``level`` that accept the raw word ``content`` (backward sweep)."""
        cache = self._accept_cache[level - 1]
        hit = cache.get(content)
        if hit is not None:
            return hit
        lvl = self.levels[level - 1]
        current = lvl.finals
        if level == 1:
            for a in reversed(content):
                current = frozenset(src for src, label, tgt in lvl.edges if label == a and tgt <= current)
        else:
            for child in reversed(content):
                labels = self.accepting_states(level - 1, child)
                current = frozenset(src for src, label, tgt in lvl.edges if label in labels and tgt <= current)
        if len(cache) < 200_000:
            cache[content] = current
        return current

    def accepts_config(self, control: str, s: StoreOrUndef) -> bool:
        if control not in self.initial_map:
            return False
        if s is UNDEF:
            return control in self.nabla
        if s.order != self.order:
            raise ValueError("store order differs from the automaton order")
        return self.initial_map[control] in self.accepting_states(self.order, s.content)

    def accepts_from(self, state: str, s: StoreOrUndef) -> bool:
        if s is UNDEF:
            return any(q == state and p in self.nabla for p, q in self.initial_map.items())
        if s.order > self.order:
            raise ValueError("store order exceeds the automaton order")
        return state in self.accepting_states(s.order, s.content)

    def __eq__(self, other):
        if not isinstance(other, NestedMultiAutomaton):
            return NotImplemented
        return (self.order, self.alphabet, self.levels, self.controls, self.initials, self.nabla) == (
            other.order, other.alphabet, other.levels, other.controls, other.initials, other.nabla)

    def __hash__(self):
        return hash((self.order, self.alphabet, self.levels, self.controls, self.initials, self.nabla))

    def size(self) -> tuple[int, int]:
        return sum(len(l.states) for l in self.levels), sum(len(l.edges) for l in self.levels)


def accepts(A: NestedMultiAutomaton, entry, s: StoreOrUndef) -> bool:
    """Membership from a control (by name or index) or from a state id.

    A string naming both a control and a state resolves to the control.
    """
    if isinstance(entry, int):
        return A.accepts_config(A.controls[entry], s)
    if entry in A.initial_map and (s is UNDEF or s.order == A.order):
        return A.accepts_config(entry, s)
    return A.accepts_from(entry, s)


# ---------------------------------------------------------------------------
# Builder


class Builder:
    """Mutable arenas with helpers for fresh names, conjunction states and universal states."""

    def __init__(self, order: int, alphabet: Sequence[str]):
        self.order = order
        self.alphabet = tuple(alphabet)
        self.states: list[set] = [set() for _ in range(order)]
        self.finals: list[set] = [set() for _ in range(order)]
        self.edges: list[set] = [set() for _ in range(order)]
        self.controls: list[str] = []
        self.initials: list[str] = []
        self.nabla: set[str] = set()
        self._conj: dict = {}
        self._out: list[dict] = [{} for _ in range(order)]

    @classmethod
    def from_automaton(cls, A: NestedMultiAutomaton, rename=None) -> "Builder":
        b = cls(A.order, A.alphabet)
        b.absorb(A, rename)
        b.controls = list(A.controls)
        b.initials = [rename(A.order, q) if rename else q for q in A.initials]
        b.nabla = set(A.nabla)
        return b

    def absorb(self, A: NestedMultiAutomaton, rename=None) -> None:
        """Copy every arena of ``A`` (optionally renaming states per level)."""
        r = rename or (lambda l, q: q)
        for l, lvl in enumerate(A.levels, start=1):
            for q in lvl.states:
                self.add_state(l, r(l, q), q in lvl.finals)
            for src, label, tgt in lvl.edges:
                lab = label if l == 1 else r(l - 1, label)
                self.add_edge(l, r(l, src), lab, (r(l, t) for t in tgt))

    def has(self, level: int, q: str) -> bool:
        return q in self.states[level - 1]

    def fresh(self, level: int, base: str) -> str:
        name = base
        while name in self.states[level - 1]:
            name += "'"
        return name

    def add_state(self, level: int, q: str, final: bool = False) -> str:
        self.states[level - 1].add(q)
        if final:
            self.finals[level - 1].add(q)
        return q

    def add_edge(self, level: int, src: str, label: str, targets: Iterable[str]) -> None:
        tgt = frozenset(targets)
        if not tgt:
            raise ValueError("edge targets must be non-empty")
        edge = (src, label, tgt)
        if edge not in self.edges[level - 1]:
            self.edges[level - 1].add(edge)
            self._out[level - 1].setdefault(src, []).append((label, tgt))

    def replace_edges(self, level: int, edges: Iterable[tuple]) -> None:
        self.edges[level - 1] = set()
        self._out[level - 1] = {}
        for src, label, tgt in edges:
            self.add_edge(level, src, label, tgt)

    def out(self, level: int, q: str) -> list[tuple]:
        return list(self._out[level - 1].get(q, ()))

    def universal(self, level: int) -> str:
        """A state accepting every word at ``level`` (created once)."""
        key = ("U", level)
        if key in self._conj:
            return self._conj[key]
        q = self.fresh(level, UNIVERSAL)
        self._conj[key] = q
        self.add_state(level, q, True)
        if level == 1:
            for a in self.alphabet:
                self.add_edge(1, q, a, {q})
        else:
            self.add_edge(level, q, self.universal(level - 1), {q})
        return q

    def conj(self, level: int, components: Iterable[str]) -> str:
        """A state accepting the intersection of the components' languages.

        With no component this is the universal state, with one it is the
        component itself.  Otherwise a fresh state takes every combination of
        one edge per component; at levels above 1 the combined label is the
        conjunction of the chosen labels one level down.
        """
        comps = frozenset(components)
        if not comps:
            return self.universal(level)
        if len(comps) == 1:
            return next(iter(comps))
        key = ("C", level, comps)
        if key in self._conj:
            return self._conj[key]
        q = self.fresh(level, "&(" + "|".join(sorted(comps)) + ")")
        self._conj[key] = q
        self.add_state(level, q, comps <= self.finals[level - 1])
        per = [sorted(self.out(level, c), key=lambda e: (e[0], _targets_key(e[1]))) for c in sorted(comps)]
        if level == 1:
            for a in self.alphabet:
                options = [[t for lab, t in edges if lab == a] for edges in per]
                if all(options):
                    for tgt in minimal_unions(options):
                        self.add_edge(1, q, a, tgt)
            return q
        for choice in itertools.product(*per):
            tgt = frozenset().union(*(t for _, t in choice))
            self.add_edge(level, q, self.conj(level - 1, {lab for lab, _ in choice}), tgt)
        return q

    def clone(self, level: int, q: str, base: str) -> str:
        """A fresh state with the finality and outgoing edges of ``q``."""
        c = self.add_state(level, self.fresh(level, base), q in self.finals[level - 1])
        for lab, tgt in self.out(level, q):
            self.add_edge(level, c, lab, tgt)
        return c

    def set_initial(self, control: str, state: str) -> None:
        if control in self.controls:
            self.initials[self.controls.index(control)] = state
        else:
            self.controls.append(control)
            self.initials.append(state)

    def build(self, prune: bool = False) -> NestedMultiAutomaton:
        levels = tuple(
            Level(
                tuple(sorted(self.states[i])),
                frozenset(self.finals[i] & self.states[i]),
                tuple(sorted(self.edges[i], key=lambda e: (e[0], e[1], _targets_key(e[2])))),
            )
            for i in range(self.order)
        )
        A = NestedMultiAutomaton(self.order, self.alphabet, levels, tuple(self.controls),
                                 tuple(self.initials), frozenset(self.nabla))
        return prune_automaton(A) if prune else A


def prune_automaton(A: NestedMultiAutomaton, keep: Iterable[tuple[int, str]] = ()) -> NestedMultiAutomaton:
    """Drop states unreachable from the initial states (and from ``keep``)."""
    live = [set() for _ in A.levels]
    work = [(A.order, q) for q in A.initials] + list(keep)
    while work:
        l, q = work.pop()
        if q in live[l - 1]:
            continue
        live[l - 1].add(q)
        for label, tgt in A.level(l).out.get(q, ()):
            work.extend((l, t) for t in tgt)
            if l > 1:
                work.append((l - 1, label))
    levels = []
    for i, lvl in enumerate(A.levels):
        levels.append(Level(
            tuple(s for s in lvl.states if s in live[i]),
            frozenset(lvl.finals & live[i]),
            tuple(e for e in lvl.edges if e[0] in live[i]),
        ))
    return NestedMultiAutomaton(A.order, A.alphabet, tuple(levels), A.controls, A.initials, A.nabla)


# ---------------------------------------------------------------------------
# Text format


def render_automaton(A: NestedMultiAutomaton) -> str:
    lines = [f"order {A.order}", "alphabet " + " ".join(A.alphabet)]
    for l, lvl in enumerate(A.levels, start=1):
        lines.append(f"level {l}")
        for q in lvl.states:
            lines.append(f"state {q} final" if q in lvl.finals else f"state {q}")
        for src, label, tgt in lvl.edges:
            lab = label if l == 1 else "@" + label
            lines.append(f"edge {src} {lab} -> {{{','.join(sorted(tgt))}}}")
    lines.append("top")
    for p, q in zip(A.controls, A.initials):
        lines.append(f"initial {p}={q}")
    for p in A.controls:
        if p in A.nabla:
            lines.append(f"nabla {p}")
    return "\n".join(lines) + "\n"


_EDGE_RE = re.compile(r"edge\s+(\S+)\s+(\S+)\s*->\s*\{([^}]*)\}\s*$")


def parse_automaton(text: str) -> NestedMultiAutomaton:
    order = None
    alphabet = None
    states: dict[int, dict[str, bool]] = {}
    edges: dict[int, list] = {}
    controls, initials, nabla = [], [], []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        key = words[0]
        if key == "order":
            order = int(words[1])
        elif key == "alphabet":
            alphabet = tuple(words[1:])
        elif key == "level":
            if len(words) != 2 or not words[1].isdigit() or int(words[1]) < 1:
                raise ParseError("expected 'level <l>'", line=lineno)
            current = int(words[1])
            states.setdefault(current, {})
            edges.setdefault(current, [])
        elif key == "top":
            current = None
        elif key == "state":
            if current is None:
                raise ParseError("'state' outside a level section", line=lineno)
            if len(words) not in (2, 3) or (len(words) == 3 and words[2] != "final"):
                raise ParseError("expected 'state <id> [final]'", line=lineno)
            if not ID_RE.fullmatch(words[1]):
                raise ParseError(f"invalid state id {words[1]!r}", line=lineno)
            states[current][words[1]] = states[current].get(words[1], False) or len(words) == 3
        elif key == "edge":
            if current is None:
                raise ParseError("'edge' outside a level section", line=lineno)
            m = _EDGE_RE.fullmatch(line)
            if not m:
                raise ParseError("expected 'edge <src> <label> -> {<t1>,...}'", line=lineno)
            src, label, tgts = m.group(1), m.group(2), [t.strip() for t in m.group(3).split(",") if t.strip()]
            if not tgts:
                raise ParseError("edge with an empty target set", line=lineno)
            if current == 1:
                if label.startswith("@") or not SYMBOL_RE.fullmatch(label):
                    raise ParseError(f"level-1 labels are symbols, got {label!r}", line=lineno)
            else:
                if not label.startswith("@"):
                    raise ParseError(f"level-{current} labels are '@<state>', got {label!r}", line=lineno)
                label = label[1:]
            edges[current].append((lineno, src, label, tgts))
        elif key == "initial":
            if len(words) != 2 or "=" not in words[1]:
                raise ParseError("expected 'initial <control>=<state>'", line=lineno)
            p, q = words[1].split("=", 1)
            controls.append(p)
            initials.append(q)
        elif key == "nabla":
            nabla.extend(words[1:])
        else:
            raise ParseError(f"unknown directive {key!r}", line=lineno)
    if order is None:
        order = max(states) if states else 1
    if alphabet is None:
        alphabet = tuple(sorted({e[2] for e in edges.get(1, [])}))
    b = Builder(order, alphabet)
    for l in range(1, order + 1):
        for q, fin in states.get(l, {}).items():
            b.add_state(l, q, fin)
    for l, es in edges.items():
        if l > order:
            raise ParseError(f"level {l} exceeds order {order}", line=es[0][0] if es else 1)
        for lineno, src, label, tgts in es:
            for q in [src] + tgts:
                if not b.has(l, q):
                    raise ParseError(f"undeclared level-{l} state {q!r}", line=lineno)
            if l > 1 and not b.has(l - 1, label):
                raise ParseError(f"designator {label!r} is not a level-{l - 1} state", line=lineno)
            if l == 1 and label not in alphabet:
                raise ParseError(f"symbol {label!r} is not in the alphabet", line=lineno)
            b.add_edge(l, src, label, tgts)
    for p, q in zip(controls, initials):
        if not b.has(order, q):
            raise ParseError(f"initial state {q!r} of {p} is not a top-level state")
        b.set_initial(p, q)
    b.nabla = set(nabla)
    try:
        return b.build()
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# ---------------------------------------------------------------------------
# Run expansion


def expand_front(out: Mapping[str, Sequence[tuple]], front: frozenset, label=None) -> set[tuple[frozenset, frozenset]]:
    """Combine one outgoing edge per member of ``front``.

    ``out`` maps a state to its (label, targets) pairs.  With ``label`` given
    only edges carrying that label are used.  Returns (label set, union of
    targets) pairs.  The empty front yields the single pair (∅, ∅).
    """
    per = []
    for q in sorted(front):
        opts = [(lab, t) for lab, t in out.get(q, ()) if label is None or lab == label]
        if not opts:
            return set()
        per.append(opts)
    results = set()
    for choice in itertools.product(*per):
        labels = frozenset(lab for lab, _ in choice)
        results.add((labels, frozenset().union(*(t for _, t in choice))))
    return results


def expand(A: NestedMultiAutomaton, level: int, label, fronts: Iterable[frozenset]) -> set[frozenset]:
    """Frontiers reachable by reading one ``label`` from any member of ``fronts``."""
    out = A.level(level).out
    res = set()
    for f in fronts:
        res |= {t for _, t in expand_front(out, frozenset(f), label)}
    return res


def expand_labels(A: NestedMultiAutomaton, level: int, fronts: Iterable[frozenset]) -> set[tuple[frozenset, frozenset]]:
    """Level-l variant of :func:`expand` recording the label set crossed."""
    out = A.level(level).out
    res = set()
    for f in fronts:
        res |= expand_front(out, frozenset(f))
    return res


def expand_word(A: NestedMultiAutomaton, level: int, word: Sequence, start: Iterable[str]) -> set[frozenset]:
    fronts = {frozenset(start)}
    for a in word:
        fronts = expand(A, level, a, fronts)
        if not fronts:
            break
    return fronts


def two_step_paths_in(out: Mapping[str, Sequence[tuple]], start: str) -> set[tuple]:
    """All (labels1, middle, labels2, end) for two-edge alternating paths from ``start``."""
    res = set()
    for lab1, mid in out.get(start, ()):
        for labels2, end in expand_front(out, mid):
            res.add((frozenset({lab1}), mid, labels2, end))
    return res


def two_step_paths(A: NestedMultiAutomaton, level: int, start: str) -> set[tuple]:
    if level < 2:
        raise ValueError("two-step label paths are defined above level 1")
    return two_step_paths_in(A.level(level).out, start)


def minimal_sets(sets) -> set:
    """The inclusion-minimal members of ``sets``."""
    pool = sorted(set(sets), key=len)
    if len(pool) > 32 and len(pool[-1]) <= 10:
        # Many small sets: look up every proper subset instead of scanning.
        kept: set[frozenset] = set()
        for s in pool:
            items = tuple(s)
            if not any(frozenset(c) in kept
                       for k in range(len(items)) for c in itertools.combinations(items, k)):
                kept.add(s)
        return kept
    out: list[frozenset] = []
    for s in pool:
        if not any(t <= s for t in out):
            out.append(s)
    return set(out)


def minimal_unions(options: list) -> list[frozenset]:
    """Minimal sets among the unions picking one member from each option list."""
    acc = {frozenset()}
    for opts in options:
        acc = minimal_sets(a | o for a in acc for o in minimal_sets(opts))
    return sorted(acc, key=lambda t: (len(t), tuple(sorted(t))))


def invert(qs: Iterable[Iterable[str]]) -> set[frozenset]:
    """Every set picking one member from each of ``qs`` (duplicates collapse)."""
    family = [sorted(set(q)) for q in qs]
    if any(not q for q in family):
        raise EmptyMember("cannot choose from an empty set")
    return {frozenset(c) for c in itertools.product(*family)}


def minimal_choices(qs: Iterable[Iterable[str]]) -> list[frozenset]:
    """The inclusion-minimal members of ``invert(qs)``, without enumerating all of it."""
    family = [sorted(set(q)) for q in qs]
    if any(not q for q in family):
        raise EmptyMember("cannot choose from an empty set")
    return minimal_unions([[frozenset({x}) for x in q] for q in family])


# ---------------------------------------------------------------------------
# Standard automata


def universal_automaton(order: int, alphabet: Sequence[str], controls: Sequence[str], nabla: bool = False) -> NestedMultiAutomaton:
    """Accepts every store from every control (and the undefined store if ``nabla``)."""
    b = Builder(order, alphabet)
    u_low = b.universal(order - 1) if order > 1 else None
    for p in controls:
        q = b.add_state(order, f"all:{p}", order == 1)
        b.set_initial(p, q)
        if order == 1:
            for a in alphabet:
                b.add_edge(1, q, a, {b.universal(1)})
        else:
            b.add_edge(order, q, u_low, {b.universal(order)})
    if nabla:
        b.nabla = set(controls)
    return b.build()


def empty_automaton(order: int, alphabet: Sequence[str], controls: Sequence[str]) -> NestedMultiAutomaton:
    b = Builder(order, alphabet)
    for p in controls:
        b.set_initial(p, b.add_state(order, f"none:{p}"))
    return b.build()


def _add_b_top(b: Builder, a: str, level: int) -> str:
    if level == 1:
        s0 = b.add_state(1, b.fresh(1, f"top_{a}"))
        b.add_edge(1, s0, a, {b.universal(1)})
        return s0
    lower = _add_b_top(b, a, level - 1)
    x = b.add_state(level, b.fresh(level, f"top_{a}"))
    b.add_edge(level, x, lower, {b.universal(level)})
    return x


def b_top(a: str, level: int, alphabet: Sequence[str], controls: Sequence[str] = ("p",)) -> NestedMultiAutomaton:
    """Accepts exactly the ``level``-stores whose top symbol is ``a``, from every control."""
    if a not in alphabet:
        raise ValueError(f"{a!r} is not in the alphabet")
    b = Builder(level, alphabet)
    first = _add_b_top(b, a, level)
    for i, p in enumerate(controls):
        if i == 0:
            b.set_initial(p, first)
        else:
            q = b.add_state(level, f"{first}:{p}")
            for lab, tgt in b.out(level, first):
                b.add_edge(level, q, lab, tgt)
            b.set_initial(p, q)
    return b.build()


def finite_language(order: int, alphabet: Sequence[str], controls: Sequence[str], configs) -> NestedMultiAutomaton:
    """Accepts exactly the given configurations (undefined ones included)."""
    b = Builder(order, alphabet)
    leaf = {}

    def chain(level: int, content) -> str:
        # A deterministic path spelling ``content`` and ending in a final state.
        key = (level, content)
        if key in leaf:
            return leaf[key]
        start = b.add_state(level, b.fresh(level, f"w{len(leaf)}"))
        leaf[key] = start
        cur = start
        for i, x in enumerate(content):
            lab = x if level == 1 else chain(level - 1, x)
            nxt = b.add_state(level, b.fresh(level, f"{start}.{i + 1}"))
            b.add_edge(level, cur, lab, {nxt})
            cur = nxt
        b.finals[level - 1].add(cur)
        return start

    for p in controls:
        b.set_initial(p, b.add_state(order, f"in:{p}"))
    for c in sorted(configs, key=lambda c: (c.control, str(c.store))):
        if c.control not in controls:
            raise ValueError(f"unknown control {c.control!r}")
        if c.store is UNDEF:
            b.nabla.add(c.control)
            continue
        q0 = b.initials[b.controls.index(c.control)]
        content = c.store.content
        if order == 1:
            if not content:
                b.finals[0].add(q0)
                continue
            rest = chain(1, content[1:])
            b.add_edge(1, q0, content[0], {rest})
        else:
            rest = chain(order, content[1:])
            b.add_edge(order, q0, chain(order - 1, content[0]), {rest})
    return b.build()


# ---------------------------------------------------------------------------
# Boolean operations


def _prefixed(tag: str):
    return lambda l, q: f"{tag}{q}"


def _merge_controls(A: NestedMultiAutomaton, B: NestedMultiAutomaton):
    if A.order != B.order:
        raise ValueError("automata of different orders")
    if set(A.alphabet) != set(B.alphabet):
        raise ValueError("automata over different alphabets")
    if set(A.controls) != set(B.controls):
        raise ValueError("automata over different control sets")


def union(A: NestedMultiAutomaton, B: NestedMultiAutomaton) -> NestedMultiAutomaton:
    _merge_controls(A, B)
    b = Builder(A.order, A.alphabet)
    b.absorb(A, _prefixed("1."))
    b.absorb(B, _prefixed("2."))
    n = A.order
    for p in A.controls:
        qa, qb = "1." + A.initial(p), "2." + B.initial(p)
        q = b.add_state(n, b.fresh(n, f"or:{p}"), qa in b.finals[n - 1] or qb in b.finals[n - 1])
        for src in (qa, qb):
            for lab, tgt in b.out(n, src):
                b.add_edge(n, q, lab, tgt)
        b.set_initial(p, q)
        if p in A.nabla or p in B.nabla:
            b.nabla.add(p)
    return b.build(prune=True)


def intersect(A: NestedMultiAutomaton, B: NestedMultiAutomaton) -> NestedMultiAutomaton:
    _merge_controls(A, B)
    b = Builder(A.order, A.alphabet)
    b.absorb(A, _prefixed("1."))
    b.absorb(B, _prefixed("2."))
    n = A.order
    for p in A.controls:
        q = b.conj(n, {"1." + A.initial(p), "2." + B.initial(p)})
        if q in b.initials:
            # Both sides share a state already used by another control: copy it.
            copy = b.add_state(n, b.fresh(n, f"and:{p}"), q in b.finals[n - 1])
            for lab, tgt in b.out(n, q):
                b.add_edge(n, copy, lab, tgt)
            q = copy
        b.set_initial(p, q)
        if p in A.nabla and p in B.nabla:
            b.nabla.add(p)
    return b.build(prune=True)


def complement(A: NestedMultiAutomaton) -> NestedMultiAutomaton:
    """Language complement per control, including the undefined store.

    Level 1 is completed with a non-final sink.  Then each state is dualised
    by flipping its finality and replacing its same-letter edge targets by
    their choice sets.  Above level 1, every subset of a state's edges yields
    one edge.  Its label accepts exactly the letters that the chosen labels
    accept and the others reject.  The empty subset leads to the universal
    state.
    """
    b = Builder.from_automaton(A)
    sink = b.add_state(1, b.fresh(1, SINK))
    for a in A.alphabet:
        b.add_edge(1, sink, a, {sink})
    for q in A.level(1).states:
        for a in A.alphabet:
            if (q, a) not in A.level(1).by_label:
                b.add_edge(1, q, a, {sink})
    neg: list[dict] = [dict() for _ in range(A.order)]
    for l in range(1, A.order + 1):
        states = sorted(b.states[l - 1])
        for q in states:
            neg[l - 1][q] = b.add_state(l, b.fresh(l, "~" + q), q not in b.finals[l - 1])
    # Level 1: dualise per letter over the totalised edge relation.
    edges1: dict[tuple, list] = {}
    for src, lab, tgt in b.edges[0]:
        edges1.setdefault((src, lab), []).append(tgt)
    for q, nq in list(neg[0].items()):
        for a in A.alphabet:
            for choice in minimal_choices(edges1[(q, a)]):
                b.add_edge(1, nq, a, {neg[0][t] for t in choice})
    for l in range(2, A.order + 1):
        original = {q: b.out(l, q) for q in neg[l - 1]}
        for q, nq in neg[l - 1].items():
            es = sorted(original[q], key=lambda e: (e[0], _targets_key(e[1])))
            for mask in itertools.product((False, True), repeat=len(es)):
                chosen = [e for e, m in zip(es, mask) if m]
                parts = [e[0] if m else neg[l - 2][e[0]] for e, m in zip(es, mask)]
                label = b.conj(l - 1, parts)
                if not chosen:
                    b.add_edge(l, nq, label, {b.universal(l)})
                    continue
                for choice in minimal_choices(t for _, t in chosen):
                    b.add_edge(l, nq, label, {neg[l - 1][t] for t in choice})
    top = neg[A.order - 1]
    b.initials = [top[q] for q in A.initials]
    b.nabla = set(A.controls) - set(A.nabla)
    return b.build(prune=True)


def _subset_name(states: frozenset) -> str:
    return "<" + "|".join(sorted(states)) + ">"


def dealternate(A: NestedMultiAutomaton) -> NestedMultiAutomaton:
    """Subset construction at every level; every target set of the result is a singleton.

    A subset state accepts what all of its members accept, so a chosen set
    of lower labels becomes the single lower subset state naming it.
    """
    b = Builder(A.order, A.alphabet)
    done: list[set] = [set() for _ in A.levels]

    def build(level: int, subset: frozenset) -> str:
        name = _subset_name(subset)
        if subset in done[level - 1]:
            return name
        done[level - 1].add(subset)
        lvl = A.level(level)
        b.add_state(level, name, subset <= lvl.finals)
        for labels, tgt in sorted(expand_front(lvl.out, subset), key=lambda e: (sorted(e[0]), sorted(e[1]))):
            if level == 1:
                if len(labels) > 1:
                    continue
                if labels:
                    lab_list = list(labels)
                else:
                    lab_list = list(A.alphabet)
                for lab in lab_list:
                    b.add_edge(1, name, lab, {_subset_name(tgt)})
            else:
                b.add_edge(level, name, build(level - 1, labels), {_subset_name(tgt)})
            build(level, tgt)
        return name

    for p in A.controls:
        b.set_initial(p, build(A.order, frozenset({A.initial(p)})))
    b.nabla = set(A.nabla)
    return b.build()


def with_controls(A: NestedMultiAutomaton, controls: Sequence[str]) -> NestedMultiAutomaton:
    """Re-index by ``controls``: missing controls get a fresh rejecting initial state, extra ones are dropped."""
    b = Builder.from_automaton(A)
    b.controls, b.initials = [], []
    for p in controls:
        if p in A.initial_map:
            b.set_initial(p, A.initial(p))
        else:
            b.set_initial(p, b.add_state(A.order, b.fresh(A.order, f"none:{p}")))
    b.nabla = set(A.nabla) & set(controls)
    return b.build()


def rename_controls(A: NestedMultiAutomaton, source: Mapping[str, str]) -> NestedMultiAutomaton:
    """Control ``p`` of the result accepts what control ``source[p]`` of ``A`` accepts, undefined store included."""
    b = Builder(A.order, A.alphabet)
    b.absorb(A)
    for p, old in source.items():
        b.set_initial(p, b.clone(A.order, A.initial(old), f"in:{p}"))
        if old in A.nabla:
            b.nabla.add(p)
    return b.build(prune=True)


def without_nabla(A: NestedMultiAutomaton, controls: Iterable[str] | None = None) -> NestedMultiAutomaton:
    """Remove undefined-store acceptance for ``controls`` (all by default)."""
    drop = set(A.controls if controls is None else controls)
    return NestedMultiAutomaton(A.order, A.alphabet, A.levels, A.controls, A.initials, A.nabla - drop)


# ---------------------------------------------------------------------------
# Bulk membership


def universe_membership(A: NestedMultiAutomaton, universe, controls: Sequence[str] | None = None):
    """Membership of every (control, store) of ``universe`` as a ConfigRegion."""
    from .universe import ConfigRegion

    controls = tuple(A.controls if controls is None else controls)
    if universe.order != A.order:
        raise ValueError("universe order differs from the automaton order")
    region = ConfigRegion.empty(universe, controls)
    inits = [A.initial_map.get(p) for p in controls]
    for j, p in enumerate(controls):
        region.nabla[j] = p in A.nabla
    intern: dict[frozenset, int] = {}
    ids = np.empty(len(universe), dtype=np.int64)
    if A.order == 2:
        top = A.top
        acc1 = [A.accepting_states(1, w) for w in universe.one_stores]
        step_cache: dict[tuple, frozenset] = {}
        by_label: dict[str, list] = {}
        for src, label, tgt in top.edges:
            by_label.setdefault(label, []).append((src, tgt))
        acc_of_store: list = [None] * len(universe)
        first = universe._first
        lengths = universe._lengths
        offsets = universe._offset_arr
        n1 = universe._n1
        for i in range(len(universe)):
            k = int(lengths[i])
            g = int(first[i])
            if k == 1:
                rest = top.finals
            else:
                v = i - int(offsets[k - 1]) - g * n1 ** (k - 1)
                rest = acc_of_store[int(offsets[k - 2]) + v]
            key = (id(acc1[g]), id(rest))
            got = step_cache.get(key)
            if got is None:
                s = set()
                for lab in acc1[g]:
                    for src, tgt in by_label.get(lab, ()):
                        if tgt <= rest:
                            s.add(src)
                got = intern_set(intern, frozenset(s))
                step_cache[key] = got
            acc_of_store[i] = got
        sets = acc_of_store
    else:
        sets = [intern_set(intern, A.accepting_states(A.order, s)) for s in universe.stores]
    table = list(intern)
    index = {id(s): k for k, s in enumerate(table)}
    for i, s in enumerate(sets):
        ids[i] = index[id(s)]
    for j, q in enumerate(inits):
        if q is None:
            continue
        hits = np.array([q in s for s in table], dtype=bool)
        region.mask[j] = hits[ids]
    return region


def intern_set(pool: dict, s: frozenset) -> frozenset:
    got = pool.get(s)
    if got is None:
        pool[s] = s
        got = s
    return got


# ---------------------------------------------------------------------------
# DOT


def _dot_id(level: int, q: str) -> str:
    return '"' + f"L{level}:{q}".replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot_label(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(A: NestedMultiAutomaton) -> str:
    if not any(l.states for l in A.levels):
        return "digraph automaton {\n}\n"
    lines = ["digraph automaton {", "  rankdir=LR;"]
    hyper = 0
    for l, lvl in enumerate(A.levels, start=1):
        lines.append(f"  subgraph cluster_level{l} {{")
        lines.append(f"    label={_dot_label(f'level {l}')};")
        for q in lvl.states:
            shape = "doublecircle" if q in lvl.finals else "circle"
            lines.append(f"    {_dot_id(l, q)} [label={_dot_label(q)}, shape={shape}];")
        for src, label, tgt in lvl.edges:
            lab = label if l == 1 else "@" + label
            if len(tgt) == 1:
                (t,) = tgt
                lines.append(f"    {_dot_id(l, src)} -> {_dot_id(l, t)} [label={_dot_label(lab)}];")
            else:
                h = f'"h{hyper}"'
                hyper += 1
                lines.append(f"    {h} [shape=point];")
                lines.append(f"    {_dot_id(l, src)} -> {h} [label={_dot_label(lab)}, arrowhead=none];")
                for t in sorted(tgt):
                    lines.append(f"    {h} -> {_dot_id(l, t)};")
        lines.append("  }")
    for p, q in zip(A.controls, A.initials):
        src = _dot_label(f"ctl:{p}")
        lines.append(f"  {{ rank=source; {src} [shape=plaintext, label={_dot_label(p)}]; }}")
        lines.append(f"  {src} -> {_dot_id(A.order, q)};")
        if p in A.nabla:
            lines.append(f"  {_dot_label(f'undef:{p}')} [shape=box, label=\"UNDEF\"];")
            lines.append(f"  {_dot_id(A.order, q)} -> {_dot_label(f'undef:{p}')} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
