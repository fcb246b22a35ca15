"""Higher-order pushdown systems, their alternating variant, and explicit-state oracles."""

from __future__ import annotations

import re
import shlex
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError
from .stores import (
    SYMBOL_RE,
    UNDEF,
    Configuration,
    PopL,
    PushL,
    PushW,
    StackOp,
    Store,
    check_op,
    config_sort_key,
    op_sort_key,
    raw_apply,
    raw_top1,
)
from .universe import (
    OUTSIDE,
    UNDEFINED,
    ConfigRegion,
    OracleResult,
    StoreUniverse,
    region_from_targets,
)


@dataclass(frozen=True)
class PdsCommand:
    control: str
    symbol: str
    op: StackOp
    target: str

    def sort_key(self):
        return (self.control, self.symbol, op_sort_key(self.op), self.target)


@dataclass(frozen=True)
class ApdsCommand:
    control: str
    symbol: str
    moves: frozenset  # of (StackOp, control)

    def __post_init__(self):
        object.__setattr__(self, "moves", frozenset(self.moves))
        if not self.moves:
            raise ValueError("an alternating command needs at least one move")

    def sorted_moves(self) -> list[tuple[StackOp, str]]:
        return sorted(self.moves, key=lambda m: (op_sort_key(m[0]), m[1]))

    def sort_key(self):
        return (self.control, self.symbol, tuple((op_sort_key(o), p) for o, p in self.sorted_moves()))


def _check_common(order, controls, alphabet, bottom):
    if order < 1:
        raise ValueError("order must be at least 1")
    if len(set(controls)) != len(controls):
        raise ValueError("duplicate control")
    if len(set(alphabet)) != len(alphabet):
        raise ValueError("duplicate symbol")
    for a in alphabet:
        if not SYMBOL_RE.fullmatch(a):
            raise ValueError(f"invalid symbol {a!r}")
    if bottom is not None and bottom not in alphabet:
        raise ValueError(f"bottom symbol {bottom!r} is not in the alphabet")


def _check_move(order, controls, alphabet, bottom, p, a, op, q):
    if p not in controls or q not in controls:
        raise ValueError(f"undeclared control in command from {p} to {q}")
    if a not in alphabet:
        raise ValueError(f"undeclared symbol {a!r}")
    check_op(op, order)
    if isinstance(op, PushW):
        for b in op.word:
            if b not in alphabet:
                raise ValueError(f"undeclared symbol {b!r} in {op}")
        if bottom is not None:
            check_bottom_move(bottom, a, op)


def check_bottom_move(bottom: str, symbol: str, op: StackOp) -> None:
    """The bottom symbol stays at the bottom of every 1-store.

    On top of the bottom symbol a rewrite must keep it last (``push_{w bot}``);
    elsewhere it may not be written at all.
    """
    if not isinstance(op, PushW):
        return
    word = op.word
    if symbol == bottom:
        if not word or word[-1] != bottom or bottom in word[:-1]:
            raise ValueError(f"{op} on {bottom} must keep {bottom} as the last symbol")
    elif bottom in word:
        raise ValueError(f"{op} on {symbol} would write the bottom symbol {bottom}")


@dataclass(frozen=True)
class Pds:
    order: int
    controls: tuple
    alphabet: tuple
    commands: tuple
    bottom: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        cmds = tuple(sorted(set(self.commands), key=PdsCommand.sort_key))
        object.__setattr__(self, "commands", cmds)
        _check_common(self.order, self.controls, self.alphabet, self.bottom)
        for c in cmds:
            _check_move(self.order, self.controls, self.alphabet, self.bottom, c.control, c.symbol, c.op, c.target)


@dataclass(frozen=True)
class Apds:
    order: int
    controls: tuple
    alphabet: tuple
    commands: tuple
    bottom: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "alphabet", tuple(self.alphabet))
        cmds = tuple(sorted(set(self.commands), key=ApdsCommand.sort_key))
        object.__setattr__(self, "commands", cmds)
        _check_common(self.order, self.controls, self.alphabet, self.bottom)
        for c in cmds:
            for op, q in c.moves:
                _check_move(self.order, self.controls, self.alphabet, self.bottom, c.control, c.symbol, op, q)


def lift(pds: Pds) -> Apds:
    """Each command becomes its own single-move alternating command."""
    return Apds(
        pds.order,
        pds.controls,
        pds.alphabet,
        tuple(ApdsCommand(c.control, c.symbol, frozenset({(c.op, c.target)})) for c in pds.commands),
        pds.bottom,
    )


def as_apds(system: Pds | Apds) -> Apds:
    return lift(system) if isinstance(system, Pds) else system


def step(sys: Pds | Apds, c: Configuration) -> list[tuple[ApdsCommand, frozenset]]:
    """All one-step moves from ``c``: one (command, successor set) per applicable command."""
    sys = as_apds(sys)
    if c.store is UNDEF:
        return []
    a = raw_top1(sys.order, c.store.content)
    if a is None:
        return []
    out = []
    for cmd in sys.commands:
        if cmd.control != c.control or cmd.symbol != a:
            continue
        succ = set()
        for op, q in cmd.moves:
            r = raw_apply(op, sys.order, c.store.content)
            if r is UNDEF:
                succ.add(Configuration(c.control, UNDEF))
            else:
                succ.add(Configuration(q, Store(sys.order, r)))
        out.append((cmd, frozenset(succ)))
    return out


# ---------------------------------------------------------------------------
# System files


@dataclass
class SystemFile:
    """Everything a system file declares.  ``commands`` keeps one entry per line."""

    order: int
    alphabet: tuple
    controls: tuple
    commands: list = field(default_factory=list)
    bottom: str | None = None
    owners: dict = field(default_factory=dict)
    accepting: tuple = ()
    target: str | None = None
    labels: dict = field(default_factory=dict)
    valuations: dict = field(default_factory=dict)

    @property
    def alternating(self) -> bool:
        return any(len(c.moves) > 1 for c in self.commands)

    def apds(self) -> Apds:
        return Apds(self.order, self.controls, self.alphabet, tuple(self.commands), self.bottom)

    def pds(self) -> Pds:
        if self.alternating:
            raise ValueError("the system has alternating commands; it is not a plain PDS")
        cmds = []
        for c in self.commands:
            (op, q), = c.moves
            cmds.append(PdsCommand(c.control, c.symbol, op, q))
        return Pds(self.order, self.controls, self.alphabet, tuple(cmds), self.bottom)


_OP_RE = re.compile(
    r'\s*(?:(?P<pushw>pushw)\s+"(?P<word>[^"]*)"|(?P<pop1>pop1)|(?P<kind>push|pop)(?P<lvl>\d+)'
    r"|(?P<lkind>pushL|popL)\s+(?P<llvl>\d+))\s*->\s*(?P<target>[A-Za-z0-9_]+)\s*$"
)


def _split_word(word: str, alphabet: Sequence[str], lineno: int) -> tuple[str, ...]:
    word = word.strip()
    if not word:
        return ()
    if any(ch.isspace() for ch in word):
        return tuple(word.split())
    # Longest-match tokenization against the declared alphabet.
    out, i = [], 0
    symbols = sorted(alphabet, key=len, reverse=True)
    while i < len(word):
        for a in symbols:
            if word.startswith(a, i):
                out.append(a)
                i += len(a)
                break
        else:
            raise ParseError(f"cannot split word {word!r} into declared symbols", line=lineno)
    return tuple(out)


def _parse_move(text: str, alphabet, lineno: int) -> tuple[StackOp, str]:
    m = _OP_RE.fullmatch(text)
    if not m:
        raise ParseError(f"malformed move {text.strip()!r}", line=lineno)
    if m.group("pushw"):
        op = PushW(_split_word(m.group("word"), alphabet, lineno))
    elif m.group("pop1"):
        op = PushW(())
    elif m.group("kind"):
        lvl = int(m.group("lvl"))
        if lvl == 1:
            if m.group("kind") == "pop":
                op = PushW(())
            else:
                raise ParseError("push1 needs a word; use pushw", line=lineno)
        else:
            op = PushL(lvl) if m.group("kind") == "push" else PopL(lvl)
    else:
        lvl = int(m.group("llvl"))
        op = PushL(lvl) if m.group("lkind") == "pushL" else PopL(lvl)
    return op, m.group("target")


def parse_system(text: str) -> SystemFile:
    """Parse the line-oriented system format (plain, game, Büchi and labelled variants)."""
    order = None
    alphabet: tuple = ()
    controls: tuple = ()
    bottom = None
    owners: dict = {}
    accepting: list = []
    target = None
    labels: dict = {}
    valuations: dict = {}
    raw_cmds = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line:
            head, rest = line.split(":", 1)
            parts = head.split()
            if len(parts) != 2:
                raise ParseError("a command starts with '<control> <symbol> :'", line=lineno)
            raw_cmds.append((lineno, parts[0], parts[1], rest))
            continue
        words = line.split()
        key, args = words[0], words[1:]
        if key == "order":
            if len(args) != 1 or not args[0].isdigit():
                raise ParseError("expected 'order <n>'", line=lineno)
            order = int(args[0])
        elif key == "alphabet":
            alphabet = tuple(args)
        elif key == "controls":
            controls = tuple(args)
        elif key == "bottom":
            if len(args) != 1:
                raise ParseError("expected 'bottom <symbol>'", line=lineno)
            bottom = args[0]
        elif key == "owner":
            if not args or args[0] not in ("E", "A"):
                raise ParseError("expected 'owner E|A <controls>'", line=lineno)
            for p in args[1:]:
                owners[p] = args[0]
        elif key == "accepting":
            accepting.extend(args)
        elif key == "target":
            target = " ".join(shlex.split(line)[1:])
        elif key == "label":
            if not args:
                raise ParseError("expected 'label <control> <props>'", line=lineno)
            labels.setdefault(args[0], set()).update(args[1:])
        elif key == "valuation":
            if len(args) != 2:
                raise ParseError("expected 'valuation <var> <automaton-file>'", line=lineno)
            valuations[args[0]] = args[1]
        else:
            raise ParseError(f"unknown directive {key!r}", line=lineno)
    if order is None:
        raise ParseError("missing 'order' line", line=1)
    for name in list(alphabet) + list(controls):
        if not SYMBOL_RE.fullmatch(name):
            raise ParseError(f"invalid name {name!r}", line=1)
    commands = []
    for lineno, p, a, rest in raw_cmds:
        moves = frozenset(_parse_move(part, alphabet, lineno) for part in rest.split("|"))
        try:
            cmd = ApdsCommand(p, a, moves)
            for op, q in moves:
                _check_move(order, controls, alphabet, bottom, p, a, op, q)
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from None
        commands.append(cmd)
    sf = SystemFile(order, alphabet, controls, commands, bottom, owners, tuple(accepting), target,
                    {p: frozenset(v) for p, v in labels.items()}, valuations)
    try:
        _check_common(order, controls, alphabet, bottom)
    except ValueError as exc:
        raise ParseError(str(exc), line=1) from None
    for p in list(owners) + list(accepting) + list(labels):
        if p not in controls:
            raise ParseError(f"undeclared control {p!r}", line=1)
    return sf


def render_op(op: StackOp) -> str:
    return str(op)


def render_system(sys: Pds | Apds, *, owners: dict | None = None, accepting: Iterable[str] = ()) -> str:
    """Text form accepted by :func:`parse_system`."""
    lines = [f"order {sys.order}", "alphabet " + " ".join(sys.alphabet), "controls " + " ".join(sys.controls)]
    if sys.bottom is not None:
        lines.append(f"bottom {sys.bottom}")
    if owners:
        for who in ("E", "A"):
            ps = [p for p in sys.controls if owners.get(p) == who]
            if ps:
                lines.append(f"owner {who} " + " ".join(ps))
    acc = [p for p in sys.controls if p in set(accepting)]
    if acc:
        lines.append("accepting " + " ".join(acc))
    for c in as_apds(sys).commands:
        moves = " | ".join(f"{render_op(o)} -> {q}" for o, q in c.sorted_moves())
        lines.append(f"{c.control} {c.symbol} : {moves}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Oracles


def _compiled_commands(sys: Apds, universe: StoreUniverse):
    ctrl = {p: j for j, p in enumerate(sys.controls)}
    out = []
    for cmd in sys.commands:
        rows = universe.rows_with_top(cmd.symbol)
        if rows.size == 0:
            continue
        moves = [(universe.successors(op)[rows], ctrl[q]) for op, q in cmd.sorted_moves()]
        out.append((ctrl[cmd.control], rows, moves))
    return out


def _pre_star_fixpoint(compiled, target_mask, nabla, outside_ok: bool):
    x = target_mask.copy()
    changed = True
    while changed:
        changed = False
        for j, rows, moves in compiled:
            ok = np.ones(rows.size, dtype=bool)
            for succ, q in moves:
                inside = succ >= 0
                val = np.zeros(rows.size, dtype=bool)
                val[inside] = x[q, succ[inside]]
                if outside_ok:
                    val |= succ == OUTSIDE
                if nabla[j]:
                    val |= succ == UNDEFINED
                ok &= val
            new = ok & ~x[j, rows]
            if new.any():
                x[j, rows[new]] = True
                changed = True
    return x


def oracle_pre_star(sys: Pds | Apds, targets, universe: StoreUniverse) -> OracleResult:
    """Least fixpoint of the backward step over every configuration in ``universe``.

    An undefined configuration is a member exactly when it is a target.  A
    successor outside the universe makes its move unusable in the lower bound
    and free in the upper bound.
    """
    sys = as_apds(sys)
    if universe.order != sys.order:
        raise ValueError("universe order differs from the system order")
    base = region_from_targets(targets, universe, sys.controls)
    compiled = _compiled_commands(sys, universe)
    low = _pre_star_fixpoint(compiled, base.mask, base.nabla, outside_ok=False)
    high = _pre_star_fixpoint(compiled, base.mask, base.nabla, outside_ok=True)
    return OracleResult(
        ConfigRegion(universe, sys.controls, low, base.nabla.copy()),
        ConfigRegion(universe, sys.controls, high, base.nabla.copy()),
    )


def _set_successors(sys: Apds, configs: frozenset) -> set[frozenset]:
    out = set()
    for c in configs:
        rest = configs - {c}
        for _, succ in step(sys, c):
            out.add(rest | succ)
    return out


def oracle_forward_reach(sys: Pds | Apds, c: Configuration, depth: int) -> set[frozenset]:
    """Every configuration set reachable from ``{c}`` in at most ``depth`` set-lifted steps."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    sys = as_apds(sys)
    seen = {frozenset({c})}
    frontier = set(seen)
    for _ in range(depth):
        nxt = set()
        for cs in frontier:
            nxt |= _set_successors(sys, cs)
        frontier = nxt - seen
        seen |= frontier
        if not frontier:
            break
    return seen


def find_forward_run(sys: Pds | Apds, c: Configuration, goal, depth: int) -> list[frozenset] | None:
    """A run ``{c} = C0, C1, ...`` of the set-lifted relation ending inside ``goal``, or None.

    The search expands the first (in sorted order) member outside ``goal``
    at each step.  Members evolve independently, so committing to one of them
    loses no runs.  ``goal`` is a membership predicate on configurations.
    """
    sys = as_apds(sys)
    failed: dict[frozenset, int] = {}

    def search(cs: frozenset, budget: int) -> list[frozenset] | None:
        pending = sorted((x for x in cs if not goal(x)), key=config_sort_key)
        if not pending:
            return [cs]
        if budget < len(pending) or failed.get(cs, -1) >= budget:
            return None
        pick = pending[0]
        rest = cs - {pick}
        for _, succ in step(sys, pick):
            tail = search(rest | succ, budget - 1)
            if tail is not None:
                return [cs] + tail
        failed[cs] = max(failed.get(cs, -1), budget)
        return None

    return search(frozenset({c}), depth)
