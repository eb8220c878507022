"""Exception hierarchy shared across the toolkit."""


class BipecError(Exception):
    """Base class for all toolkit errors."""


class ParseError(BipecError):
    """A file could not be parsed; the message names the file and field."""


class ConflictError(BipecError):
    """Two inputs collide, e.g. duplicate series ids in one dataset."""


class ValidationError(BipecError):
    """An invariant on loaded or submitted data is violated."""


class ArgumentError(BipecError, ValueError):
    """A caller-supplied argument is outside its contract."""


class DomainError(ArgumentError):
    """A numeric argument is outside the mathematical domain of an operation."""


class UnusableInputError(BipecError):
    """The input series cannot be processed at all (too short, all missing)."""


class NotFoundError(BipecError):
    """A referenced entity (series, detection) does not exist."""


class PreconditionError(BipecError):
    """An operation's precondition is not met; the message says how to fix it."""
