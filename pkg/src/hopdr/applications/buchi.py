"""Büchi acceptance regions of higher-order pushdown systems.

A configuration has an accepting run when it can reach a *repeat head*: a
configuration whose control ``p`` and top symbol ``a`` are such that, started
from the single-symbol store with top ``a``, the system can pass through an
accepting control and come back to ``p`` with ``a`` on top.  Heads are found
with one Pre* computation per (control, symbol) pair on a product that
records whether an accepting control has been left yet.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from ..automata import Builder, NestedMultiAutomaton, b_top, complement, rename_controls
from ..errors import BoundTooSmall
from ..saturation import pre_star
from ..stores import Configuration, Store
from ..systems import Pds, PdsCommand, lift
from ..universe import OUTSIDE, ConfigRegion, OracleResult, StoreUniverse, get_universe


@dataclass(frozen=True)
class BuchiPds:
    pds: Pds
    accepting: frozenset

    def __post_init__(self):
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        unknown = self.accepting - set(self.pds.controls)
        if unknown:
            raise ValueError(f"accepting controls {sorted(unknown)} are not declared")


def flagged(p: str, flag: int) -> str:
    return f"{p}.{flag}"


def flag_product(bp: BuchiPds) -> Pds:
    """Controls ``p.0`` (no accepting control left yet) and ``p.1`` (at least one left)."""
    pds = bp.pds
    cmds = []
    for c in pds.commands:
        to = 1 if c.control in bp.accepting else 0
        cmds.append(PdsCommand(flagged(c.control, 0), c.symbol, c.op, flagged(c.target, to)))
        cmds.append(PdsCommand(flagged(c.control, 1), c.symbol, c.op, flagged(c.target, 1)))
    controls = tuple(flagged(p, f) for f in (0, 1) for p in pds.controls)
    return Pds(pds.order, controls, pds.alphabet, tuple(cmds), pds.bottom)


def _singleton_store(order: int, a: str, bottom: str | None) -> Store:
    content = (a,) if bottom is None or a == bottom else (a, bottom)
    for _ in range(order - 1):
        content = (content,)
    return Store(order, content)


def repeat_heads(bp: BuchiPds) -> frozenset:
    """Every (control, symbol) pair that starts a cycle through an accepting control."""
    pds = bp.pds
    if not bp.accepting:
        return frozenset()
    product = lift(flag_product(bp))
    heads = set()
    for a in pds.alphabet:
        top_a = b_top(a, pds.order, pds.alphabet, (flagged(pds.controls[0], 1),))
        start = _singleton_store(pds.order, a, pds.bottom)
        for p in pds.controls:
            target = rename_controls(top_a, {flagged(p, 1): top_a.controls[0]})
            region = pre_star(product, target)
            if region.accepts_config(flagged(p, 0), start):
                heads.add((p, a))
    return frozenset(heads)


def head_automaton(order: int, alphabet, controls, heads) -> NestedMultiAutomaton:
    """Accepts ``<p, w>`` exactly when ``(p, top_1(w))`` is in ``heads``."""
    b = Builder(order, alphabet)
    for p in controls:
        q = b.add_state(order, f"head:{p}")
        b.set_initial(p, q)
        for a in sorted(x for c, x in heads if c == p):
            top_a = b_top(a, order, alphabet)
            b.absorb(top_a)
            for lab, tgt in b.out(order, top_a.initials[0]):
                b.add_edge(order, q, lab, tgt)
    return b.build(prune=True)


def buchi_region(bp: BuchiPds, *, complement_result: bool = False) -> NestedMultiAutomaton:
    """Configurations with some accepting run; with ``complement_result`` those where no run accepts."""
    pds = bp.pds
    heads = repeat_heads(bp)
    region = pre_star(lift(pds), head_automaton(pds.order, pds.alphabet, pds.controls, heads))
    return complement(region) if complement_result else region


# ---------------------------------------------------------------------------
# Explicit-state oracle


def lasso_region(bp: BuchiPds, universe: StoreUniverse) -> OracleResult:
    """Configurations of ``universe`` with a reachable cycle through an accepting control.

    ``low`` uses only cycles inside the universe.  ``high`` adds every
    configuration that can reach a move leaving the universe.
    """
    pds = bp.pds
    n, k = len(universe), len(pds.controls)
    ctrl = {p: j for j, p in enumerate(pds.controls)}
    src, dst = [], []
    exits = np.zeros(k * n, dtype=bool)
    for c in pds.commands:
        rows = universe.rows_with_top(c.symbol)
        succ = universe.successors(c.op)[rows]
        base = ctrl[c.control] * n
        inside = succ >= 0
        src.append(base + rows[inside])
        dst.append(ctrl[c.target] * n + succ[inside])
        exits[base + rows[succ == OUTSIDE]] = True
    src = np.concatenate(src) if src else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(dst) if dst else np.zeros(0, dtype=np.int64)
    size = k * n
    graph = coo_matrix((np.ones(src.size, dtype=np.int8), (src, dst)), shape=(size, size)).tocsr()
    ncomp, comp = connected_components(graph, directed=True, connection="strong")
    cyclic = np.bincount(comp, minlength=ncomp) > 1
    cyclic[comp[src[src == dst]]] = True
    accepting = np.zeros(size, dtype=bool)
    for p in bp.accepting:
        accepting[ctrl[p] * n:(ctrl[p] + 1) * n] = True
    hit = np.zeros(ncomp, dtype=bool)
    hit[comp[accepting]] = True
    good = (hit & cyclic)[comp]

    low = _reaches(src, dst, good)
    high = low | _reaches(src, dst, exits)
    empty = np.zeros(k, dtype=bool)
    return OracleResult(
        ConfigRegion(universe, pds.controls, low.reshape(k, n), empty.copy()),
        ConfigRegion(universe, pds.controls, high.reshape(k, n), empty.copy()),
    )


def _reaches(src: np.ndarray, dst: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Nodes with a path into ``seeds``: BFS on the reversed graph from a virtual root."""
    size = seeds.size
    out = np.zeros(size, dtype=bool)
    if not seeds.any():
        return out
    idx = np.flatnonzero(seeds)
    rows = np.concatenate([dst, np.full(idx.size, size)])
    cols = np.concatenate([src, idx])
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(size + 1, size + 1)).tocsr()
    order = breadth_first_order(graph, size, directed=True, return_predecessors=False)
    out[order[order < size]] = True
    return out


def lasso_oracle(bp: BuchiPds, c: Configuration, bound) -> bool:
    """Whether ``c`` has an accepting run, judged on the universe within ``bound``.

    Warns with :class:`BoundTooSmall` when the answer depends on stores
    outside the bound; the returned value is then the lower estimate.
    """
    pds = bp.pds
    universe = get_universe(pds.order, tuple(pds.alphabet), tuple(bound), pds.bottom)
    if c.control not in pds.controls:
        raise ValueError(f"unknown control {c.control!r}")
    i = universe.find(c.store) if isinstance(c.store, Store) else None
    if i is None:
        if isinstance(c.store, Store):
            raise ValueError("configuration lies outside the bound")
        return False
    res = lasso_region(bp, universe)
    j = pds.controls.index(c.control)
    if res.low.mask[j, i] != res.high.mask[j, i]:
        warnings.warn(BoundTooSmall(f"{c} depends on stores outside the bound"), stacklevel=2)
    return bool(res.low.mask[j, i])
