"""Finite store universes and configuration regions over them.

The explicit-state oracles work on every store within a length bound.  Stores
get integer ids, and each stack operation becomes an integer array mapping a
store id to its successor id.  Two negative codes mark the exceptions:
``OUTSIDE`` (the result exceeds the bound) and ``UNDEFINED`` (the operation
returned the undefined store).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .stores import (
    UNDEF,
    Configuration,
    PopL,
    PushL,
    PushW,
    StackOp,
    Store,
    raw_apply,
    raw_top1,
)

OUTSIDE = -1
UNDEFINED = -2


def _one_stores(alphabet: Sequence[str], max_len: int, bottom: str | None) -> list[tuple]:
    if bottom is None:
        words = []
        for n in range(max_len + 1):
            words.extend(itertools.product(alphabet, repeat=n))
        return [tuple(w) for w in words]
    body = [a for a in alphabet if a != bottom]
    words = []
    for n in range(max_len):
        words.extend(tuple(w) + (bottom,) for w in itertools.product(body, repeat=n))
    return words


class StoreUniverse:
    """Every store of ``order`` over ``alphabet`` within ``bound``.

    ``bound`` lists the maximal length per level from the outermost level
    inwards, so an order-2 bound ``(3, 2)`` allows up to three 1-stores of at
    most two symbols each.  With ``bottom`` set, only stores whose 1-stores
    end in exactly one bottom symbol are included.
    """

    def __init__(self, order: int, alphabet: Sequence[str], bound: Sequence[int], bottom: str | None = None):
        bound = tuple(int(b) for b in bound)
        if order == 1 and len(bound) == 2:
            bound = bound[1:]
        if len(bound) != order:
            raise ValueError(f"an order-{order} universe needs {order} bounds, got {bound}")
        if any(b < 1 for b in bound):
            raise ValueError("bounds must be positive")
        self.order = order
        self.alphabet = tuple(alphabet)
        self.bound = bound
        self.bottom = bottom
        self.symbol_index = {a: i for i, a in enumerate(self.alphabet)}

        self.one_stores = _one_stores(self.alphabet, bound[-1], bottom)
        self.one_index = {w: i for i, w in enumerate(self.one_stores)}

        if order == 1:
            self.stores = list(self.one_stores)
        elif order == 2:
            n1 = len(self.one_stores)
            self._offsets = [0]
            self.stores = []
            for k in range(1, bound[0] + 1):
                self.stores.extend(itertools.product(self.one_stores, repeat=k))
                self._offsets.append(len(self.stores))
            self._n1 = n1
        else:
            level = self.one_stores
            for b in reversed(bound[:-1]):
                nxt = []
                for k in range(1, b + 1):
                    nxt.extend(itertools.product(level, repeat=k))
                level = nxt
            self.stores = level
        self.index = {s: i for i, s in enumerate(self.stores)}

        tops = np.full(len(self.stores), -1, dtype=np.int64)
        for i, s in enumerate(self.stores):
            t = raw_top1(order, s)
            if t is not None:
                tops[i] = self.symbol_index[t]
        self.top1 = tops
        self._succ: dict[StackOp, np.ndarray] = {}
        self._rows: dict[str, np.ndarray] = {}
        if order == 2:
            self._prepare_order2()

    def _prepare_order2(self):
        n1 = self._n1
        lengths = np.zeros(len(self.stores), dtype=np.int64)
        first = np.zeros(len(self.stores), dtype=np.int64)
        for k in range(1, self.bound[0] + 1):
            lo, hi = self._offsets[k - 1], self._offsets[k]
            lengths[lo:hi] = k
            first[lo:hi] = np.arange(hi - lo, dtype=np.int64) // (n1 ** (k - 1))
        self._lengths = lengths
        self._first = first
        self._offset_arr = np.array(self._offsets, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.stores)

    def __iter__(self) -> Iterator[Store]:
        return (Store(self.order, s) for s in self.stores)

    def store(self, i: int) -> Store:
        return Store(self.order, self.stores[i])

    def find(self, s: Store) -> int | None:
        return self.index.get(s.content)

    def rows_with_top(self, symbol: str) -> np.ndarray:
        rows = self._rows.get(symbol)
        if rows is None:
            idx = self.symbol_index.get(symbol)
            rows = np.flatnonzero(self.top1 == idx) if idx is not None else np.zeros(0, dtype=np.int64)
            self._rows[symbol] = rows
        return rows

    def successors(self, op: StackOp) -> np.ndarray:
        """Successor id per store, or OUTSIDE / UNDEFINED."""
        out = self._succ.get(op)
        if out is None:
            if self.order == 2:
                out = self._successors_order2(op)
            else:
                out = self._successors_generic(op)
            out.setflags(write=False)
            self._succ[op] = out
        return out

    def _successors_generic(self, op: StackOp) -> np.ndarray:
        out = np.empty(len(self.stores), dtype=np.int64)
        for i, s in enumerate(self.stores):
            r = raw_apply(op, self.order, s)
            out[i] = UNDEFINED if r is UNDEF else self.index.get(r, OUTSIDE)
        return out

    def _successors_order2(self, op: StackOp) -> np.ndarray:
        n1 = self._n1
        k = self._lengths
        g1 = self._first
        off = self._offset_arr[k - 1]
        value = np.arange(len(self.stores), dtype=np.int64) - off
        place = n1 ** (k - 1)
        if isinstance(op, PushL) and op.level == 2:
            fits = k < self.bound[0]
            kk = np.minimum(k + 1, self.bound[0])
            new = self._offset_arr[kk - 1] + g1 * (n1 ** k) + value
            return np.where(fits, new, OUTSIDE)
        if isinstance(op, PopL) and op.level == 2:
            rest_off = self._offset_arr[np.maximum(k - 2, 0)]
            new = rest_off + (value - g1 * place)
            return np.where(k > 1, new, UNDEFINED)
        if isinstance(op, PushW):
            fmap = np.empty(n1, dtype=np.int64)
            for i, w in enumerate(self.one_stores):
                r = raw_apply(op, 1, w)
                fmap[i] = UNDEFINED if r is UNDEF else self.one_index.get(r, OUTSIDE)
            f = fmap[g1]
            new = off + np.maximum(f, 0) * place + (value - g1 * place)
            return np.where(f >= 0, new, f)
        raise ValueError(f"{op} is not valid at order 2")


@lru_cache(maxsize=32)
def get_universe(order: int, alphabet: tuple, bound: tuple, bottom: str | None = None) -> StoreUniverse:
    """Shared, cached universe; successor arrays are memoized on it."""
    return StoreUniverse(order, alphabet, bound, bottom)


@dataclass
class ConfigRegion:
    """A set of configurations over a universe: a boolean matrix plus per-control undefined flags."""

    universe: StoreUniverse
    controls: tuple
    mask: np.ndarray
    nabla: np.ndarray

    @classmethod
    def empty(cls, universe: StoreUniverse, controls: Sequence[str]) -> "ConfigRegion":
        controls = tuple(controls)
        return cls(universe, controls, np.zeros((len(controls), len(universe)), dtype=bool),
                   np.zeros(len(controls), dtype=bool))

    def __contains__(self, c: Configuration) -> bool:
        try:
            j = self.controls.index(c.control)
        except ValueError:
            return False
        if c.store is UNDEF:
            return bool(self.nabla[j])
        i = self.universe.find(c.store)
        return i is not None and bool(self.mask[j, i])

    def configurations(self) -> list[Configuration]:
        """All members, ordered by control then by rendered store; undefined last per control."""
        from .stores import render_store

        out = []
        for j, p in enumerate(self.controls):
            rows = np.flatnonzero(self.mask[j])
            stores = sorted((self.universe.store(i) for i in rows), key=render_store)
            out.extend(Configuration(p, s) for s in stores)
            if self.nabla[j]:
                out.append(Configuration(p, UNDEF))
        return out

    def count(self) -> int:
        return int(self.mask.sum() + self.nabla.sum())

    def __eq__(self, other) -> bool:
        return (isinstance(other, ConfigRegion) and self.controls == other.controls
                and np.array_equal(self.mask, other.mask) and np.array_equal(self.nabla, other.nabla))


@dataclass
class OracleResult:
    """Lower and upper bounds of an oracle answer on a truncated universe.

    ``low`` treats every step leaving the universe as useless, ``high`` as
    useful.  Where they agree the answer is exact.
    """

    low: ConfigRegion
    high: ConfigRegion

    @property
    def configs(self) -> ConfigRegion:
        return self.low

    @property
    def undetermined(self) -> np.ndarray:
        return self.low.mask != self.high.mask

    @property
    def poisoned(self) -> int:
        """Number of configurations whose membership depends on the truncation."""
        return int(self.undetermined.sum() + (self.low.nabla != self.high.nabla).sum())

    def check_bound(self) -> None:
        from .errors import BoundTooSmall

        if self.poisoned:
            raise BoundTooSmall(f"{self.poisoned} configurations depend on stores outside the bound")


def region_from_targets(targets, universe: StoreUniverse, controls: Sequence[str]) -> ConfigRegion:
    """Evaluate a target description on a universe.

    ``targets`` may be a NestedMultiAutomaton, a ConfigRegion, a callable on
    configurations, or an iterable of configurations.
    """
    from .automata import NestedMultiAutomaton, universe_membership

    controls = tuple(controls)
    if isinstance(targets, NestedMultiAutomaton):
        return universe_membership(targets, universe, controls)
    if isinstance(targets, ConfigRegion):
        if targets.universe is not universe:
            raise ValueError("region belongs to a different universe")
        region = ConfigRegion.empty(universe, controls)
        for j, p in enumerate(controls):
            if p in targets.controls:
                k = targets.controls.index(p)
                region.mask[j] = targets.mask[k]
                region.nabla[j] = targets.nabla[k]
        return region
    region = ConfigRegion.empty(universe, controls)
    if callable(targets):
        for j, p in enumerate(controls):
            region.nabla[j] = bool(targets(Configuration(p, UNDEF)))
            for i in range(len(universe)):
                region.mask[j, i] = bool(targets(Configuration(p, universe.store(i))))
        return region
    _mark(region, targets)
    return region


def _mark(region: ConfigRegion, configs: Iterable[Configuration]) -> None:
    for c in configs:
        if c.control not in region.controls:
            continue
        j = region.controls.index(c.control)
        if c.store is UNDEF:
            region.nabla[j] = True
            continue
        i = region.universe.find(c.store)
        if i is not None:
            region.mask[j, i] = True
