"""Exception hierarchy shared by every module."""


class TactError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(TactError):
    pass


class VocabularyError(TactError):
    pass


class ContractViolation(TactError, ValueError):
    """A precondition of an operation was not met."""


class ShapeError(TactError, ValueError):
    pass


class NumericError(TactError, FloatingPointError):
    pass


class ConfigError(TactError, ValueError):
    pass


class CheckpointError(TactError):
    pass
