"""Seeded random systems and automata for property tests and demos."""

from __future__ import annotations

import random
from typing import Sequence

from .automata import Builder, NestedMultiAutomaton
from .stores import PopL, PushL, PushW, Store
from .systems import Apds, ApdsCommand, Pds, PdsCommand

BOTTOM = "_bot"


def _random_op(rng: random.Random, order: int, alphabet: Sequence[str], symbol: str, bottom: str | None):
    kinds = ["pushw"] + (["push", "pop"] if order >= 2 else [])
    kind = rng.choice(kinds)
    if kind == "push":
        return PushL(rng.randint(2, order))
    if kind == "pop":
        return PopL(rng.randint(2, order))
    body = [a for a in alphabet if a != bottom]
    length = rng.choice([0, 1, 1, 2])
    if symbol == bottom:
        return PushW(tuple(rng.choice(body) for _ in range(length - 1 if length else 0)) + (bottom,))
    return PushW(tuple(rng.choice(body) for _ in range(length)))


def random_alphabet(rng: random.Random, max_symbols: int = 3, bottom: bool = False) -> tuple:
    n = rng.randint(1, max(1, max_symbols - (1 if bottom else 0)))
    letters = tuple("abc"[:n])
    return letters + ((BOTTOM,) if bottom else ())


def random_apds(rng: random.Random, *, order: int = 2, max_controls: int = 3, max_symbols: int = 3,
                max_commands: int = 6, max_ops: int = 2, bottom: bool = False, min_commands: int = 0) -> Apds:
    alphabet = random_alphabet(rng, max_symbols, bottom)
    controls = tuple(f"p{i}" for i in range(1, rng.randint(1, max_controls) + 1))
    cmds = []
    for _ in range(rng.randint(min_commands, max_commands)):
        p, a = rng.choice(controls), rng.choice(alphabet)
        moves = frozenset(
            (_random_op(rng, order, alphabet, a, BOTTOM if bottom else None), rng.choice(controls))
            for _ in range(rng.randint(1, max_ops))
        )
        cmds.append(ApdsCommand(p, a, moves))
    return Apds(order, controls, alphabet, tuple(cmds), BOTTOM if bottom else None)


def random_pds(rng: random.Random, *, order: int = 2, max_controls: int = 3, max_symbols: int = 3,
               max_commands: int = 6, bottom: bool = False, min_commands: int = 0) -> Pds:
    alphabet = random_alphabet(rng, max_symbols, bottom)
    controls = tuple(f"p{i}" for i in range(1, rng.randint(1, max_controls) + 1))
    cmds = []
    for _ in range(rng.randint(min_commands, max_commands)):
        p, a = rng.choice(controls), rng.choice(alphabet)
        op = _random_op(rng, order, alphabet, a, BOTTOM if bottom else None)
        cmds.append(PdsCommand(p, a, op, rng.choice(controls)))
    return Pds(order, controls, alphabet, tuple(cmds), BOTTOM if bottom else None)


def random_automaton(rng: random.Random, order: int, alphabet: Sequence[str], controls: Sequence[str], *,
                     states_per_level: int = 3, edges_per_level: int = 5, max_targets: int = 2,
                     nabla_prob: float = 0.3, final_prob: float = 0.4) -> NestedMultiAutomaton:
    """A random alternating automaton with one initial state per control."""
    b = Builder(order, alphabet)
    per_level = []
    for l in range(1, order + 1):
        names = [f"s{l}_{i}" for i in range(states_per_level)]
        if l == order:
            names += [f"i_{p}" for p in controls]
        for q in names:
            b.add_state(l, q, rng.random() < final_prob and not q.startswith("i_"))
        per_level.append(names)
    for l in range(1, order + 1):
        names = per_level[l - 1]
        inner = [q for q in names if not q.startswith("i_")] or names
        for _ in range(edges_per_level + (len(controls) if l == order else 0)):
            src = rng.choice(names)
            label = rng.choice(list(alphabet)) if l == 1 else rng.choice(per_level[l - 2])
            k = rng.randint(1, max_targets)
            b.add_edge(l, src, label, rng.sample(inner, min(k, len(inner))))
    for p in controls:
        b.set_initial(p, f"i_{p}")
        if rng.random() < nabla_prob:
            b.nabla.add(p)
    return b.build()


def random_store(rng: random.Random, order: int, alphabet: Sequence[str], bound: Sequence[int],
                 bottom: str | None = None) -> Store:
    def gen(level: int):
        if level == 1:
            body = [a for a in alphabet if a != bottom]
            if bottom is not None:
                return tuple(rng.choice(body) for _ in range(rng.randint(0, bound[-1] - 1))) + (bottom,)
            return tuple(rng.choice(alphabet) for _ in range(rng.randint(0, bound[-1])))
        return tuple(gen(level - 1) for _ in range(rng.randint(1, bound[order - level])))

    return Store(order, gen(order))


def random_formula(rng: random.Random, depth: int = 2, props: Sequence[str] = ("pi", "rho"),
                   free: Sequence[str] = ()):
    """A random alternation-free formula.

    ``depth`` bounds the nesting of modalities and fixpoint binders; at most
    two boolean connectives appear per level.  A binder hides the variables
    of the opposite kind, which keeps the result alternation-free.
    """
    from .applications import mucalc as m

    counter = [0]

    def literal(scope):
        names = [x for x, _ in scope] + list(free)
        r = rng.random()
        if r < 0.3:
            return m.Prop(rng.choice(props))
        if r < 0.5:
            return m.Not(m.Prop(rng.choice(props)))
        if r < 0.6 or not names:
            return rng.choice([m.TRUE, m.FALSE, m.Prop(rng.choice(props))])
        return m.Var(rng.choice(names))

    def gen(d, scope, budget, top=False):
        r = rng.random()
        if d == 0 or (r < 0.15 and not top):
            return literal(scope)
        if r < 0.35 and budget > 0:
            op = rng.choice([m.Or, m.And])
            return op(gen(d, scope, budget - 1), gen(d, scope, budget - 1))
        if r < 0.55:
            return rng.choice([m.Dia, m.Box])(gen(d - 1, scope, 2))
        least = rng.random() < 0.5
        x = f"X{counter[0]}"
        counter[0] += 1
        inner = [(y, k) for y, k in scope if k == least] + [(x, least)]
        if d >= 2 and rng.random() < 0.7:
            # The common recursive shape: a base case joined with one step back to the variable.
            step = rng.choice([m.Dia, m.Box])(m.Var(x))
            base = gen(d - 2, inner, 1) if d > 2 else rng.choice([m.Prop, lambda x: m.Not(m.Prop(x))])(rng.choice(props))
            # Least with "or" and greatest with "and" give reachability and invariance.
            join = (m.Or if least else m.And) if rng.random() < 0.8 else rng.choice([m.Or, m.And])
            body = join(base, step)
        else:
            body = gen(d - 1, inner, 2)
        return (m.Mu if least else m.Nu)(x, body)

    return gen(depth, [], 2, top=True)
