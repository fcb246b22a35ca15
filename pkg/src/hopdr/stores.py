"""Order-n stores (stacks of stacks), stack operations and configurations.

A store is kept as a nested tuple: an order-1 store is a tuple of symbol
strings and an order-n store is a non-empty tuple of order-(n-1) contents.
:class:`Store` wraps such a tuple together with its order.  The functions
named ``raw_*`` work on the bare tuples and are what the hot loops use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import NamedTuple, Union

from .errors import ParseError, TopOfEmpty

SYMBOL_RE = re.compile(r"[A-Za-z0-9_]+")


class _Undefined:
    """The value produced by an inapplicable stack operation."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEF"

    def __reduce__(self):
        return (_Undefined, ())

    # Sorts after every defined store when configurations are ordered.
    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self


UNDEF = _Undefined()


def _validate(order: int, content) -> None:
    if not isinstance(content, tuple):
        raise TypeError(f"store content must be a tuple, got {type(content).__name__}")
    if order == 1:
        for sym in content:
            if not isinstance(sym, str) or not SYMBOL_RE.fullmatch(sym):
                raise ValueError(f"invalid symbol {sym!r}")
        return
    if not content:
        raise ValueError(f"an order-{order} store needs at least one entry")
    for child in content:
        _validate(order - 1, child)


@dataclass(frozen=True, order=True)
class Store:
    order: int
    content: tuple

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("store order must be at least 1")
        _validate(self.order, self.content)

    def children(self) -> list["Store"]:
        if self.order == 1:
            raise ValueError("an order-1 store has symbols, not sub-stores")
        return [Store(self.order - 1, c) for c in self.content]

    def __len__(self) -> int:
        return len(self.content)

    def __str__(self) -> str:
        return render_store(self)


StoreOrUndef = Union[Store, _Undefined]


# ---------------------------------------------------------------------------
# Stack operations


@dataclass(frozen=True)
class PushW:
    """Replace the top symbol by ``word``; the empty word pops."""

    word: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "word", tuple(self.word))

    def __str__(self) -> str:
        sep = " " if any(len(sym) > 1 for sym in self.word) else ""
        return f'pushw "{sep.join(self.word)}"'


@dataclass(frozen=True)
class PushL:
    """Duplicate the top (level-1)-store at ``level``."""

    level: int

    def __str__(self) -> str:
        return f"push{self.level}"


@dataclass(frozen=True)
class PopL:
    """Remove the top (level-1)-store at ``level``; undefined on a singleton."""

    level: int

    def __str__(self) -> str:
        return f"pop{self.level}"


StackOp = Union[PushW, PushL, PopL]

POP1 = PushW(())


def op_sort_key(op: StackOp) -> tuple:
    if isinstance(op, PushW):
        return (0, 0, op.word)
    if isinstance(op, PushL):
        return (1, op.level, ())
    return (2, op.level, ())


def check_op(op: StackOp, order: int) -> None:
    if isinstance(op, (PushL, PopL)) and not 2 <= op.level <= order:
        raise ValueError(f"{op} is not valid at order {order}")


def raw_apply(op: StackOp, order: int, content):
    """Apply ``op`` to raw content; returns new raw content or ``UNDEF``."""
    if isinstance(op, PushW):
        if order == 1:
            if not content:
                return UNDEF
            return op.word + content[1:]
        inner = raw_apply(op, order - 1, content[0])
        if inner is UNDEF:
            return UNDEF
        return (inner,) + content[1:]
    level = op.level
    if level == order:
        if isinstance(op, PushL):
            return (content[0],) + content
        if len(content) == 1:
            return UNDEF
        return content[1:]
    if level > order or order == 1:
        raise ValueError(f"{op} is not valid at order {order}")
    inner = raw_apply(op, order - 1, content[0])
    if inner is UNDEF:
        return UNDEF
    return (inner,) + content[1:]


def apply(op: StackOp, s: Store) -> StoreOrUndef:
    check_op(op, s.order)
    out = raw_apply(op, s.order, s.content)
    return UNDEF if out is UNDEF else Store(s.order, out)


def raw_top1(order: int, content) -> str | None:
    """Top symbol of raw content, or None when the top 1-store is empty."""
    while order > 1:
        content = content[0]
        order -= 1
    return content[0] if content else None


def top(level: int, s: Store):
    """The top constituent at ``level``: a symbol for level 1, else a Store of order level-1."""
    if not 1 <= level <= s.order:
        raise ValueError(f"level {level} out of range for an order-{s.order} store")
    order, content = s.order, s.content
    while order > level:
        content = content[0]
        order -= 1
    if level == 1:
        if not content:
            raise TopOfEmpty("the top 1-store is empty")
        return content[0]
    return Store(level - 1, content[0])


# ---------------------------------------------------------------------------
# Text form


def raw_render(order: int, content) -> str:
    if order == 1:
        return "[" + " ".join(content) + "]"
    return "[" + "".join(raw_render(order - 1, c) for c in content) + "]"


def render_store(s: StoreOrUndef) -> str:
    if s is UNDEF:
        return "UNDEF"
    return raw_render(s.order, s.content)


class _StoreParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise ParseError(f"expected {ch!r}, found {found!r}", position=self.pos)
        self.pos += 1

    def peek(self) -> str | None:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else None

    def parse(self, order: int):
        self.expect("[")
        if order == 1:
            syms = []
            while True:
                ch = self.peek()
                if ch == "]":
                    self.pos += 1
                    return tuple(syms)
                m = SYMBOL_RE.match(self.text, self.pos)
                if not m:
                    raise ParseError(f"expected a symbol or ']', found {ch!r}", position=self.pos)
                syms.append(m.group())
                self.pos = m.end()
        children = []
        while True:
            ch = self.peek()
            if ch == "]" and children:
                self.pos += 1
                return tuple(children)
            if ch != "[":
                raise ParseError(
                    f"expected an order-{order - 1} store, found {ch or 'end of input'!r}",
                    position=self.pos,
                )
            children.append(self.parse(order - 1))


def parse_store(text: str, order: int) -> StoreOrUndef:
    """Parse ``[[a b][c]]``-style text (or ``UNDEF``) as a store of the given order."""
    if text.strip() == "UNDEF":
        return UNDEF
    p = _StoreParser(text)
    content = p.parse(order)
    p.skip_ws()
    if p.pos != len(text):
        raise ParseError("trailing characters after store", position=p.pos)
    return Store(order, content)


# ---------------------------------------------------------------------------
# Configurations


class Configuration(NamedTuple):
    control: str
    store: StoreOrUndef

    def __str__(self) -> str:
        return f"{self.control} {render_store(self.store)}"


def config_sort_key(c: Configuration) -> tuple:
    if c.store is UNDEF:
        return (c.control, 1, "")
    return (c.control, 0, render_store(c.store))


def parse_configuration(text: str, order: int) -> Configuration:
    """Parse ``p1 [[a]]`` or ``p1 UNDEF``."""
    text = text.strip()
    m = SYMBOL_RE.match(text)
    if not m:
        raise ParseError("expected a control name", position=0)
    rest = text[m.end():]
    if not rest.strip():
        raise ParseError("expected a store after the control", position=m.end())
    return Configuration(m.group(), parse_store(rest, order))
