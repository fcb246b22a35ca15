"""Exception and warning types shared across the package."""


class HopdrError(Exception):
    """Base class for all library errors."""


class ParseError(HopdrError):
    """Malformed textual input.  ``position`` is a character offset or line number."""

    def __init__(self, message: str, position: int | None = None, line: int | None = None):
        self.position = position
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class TopOfEmpty(HopdrError):
    """The top symbol of an empty 1-store was requested."""


class OrderUnsupported(HopdrError):
    """Saturation was asked for an order above 2."""


class MissingBottomSymbol(HopdrError):
    """A game or formula check needs a declared bottom-of-stack symbol."""


class EmptyMember(HopdrError):
    """``invert`` received a family containing an empty set."""


class UnresolvedDesignator(HopdrError):
    """A recipe refers to an automaton state that does not exist."""


class NotMonotone(HopdrError):
    """A bound variable occurs under an odd number of negations."""


class NotAllMu(HopdrError):
    """The product game construction received a formula with a greatest fixpoint."""


class NotAlternationFree(HopdrError):
    """A fixpoint subformula depends on a variable bound by an opposite fixpoint."""


class BoundTooSmall(UserWarning):
    """Some successor left the bounded store universe, so part of an oracle answer is undetermined."""
