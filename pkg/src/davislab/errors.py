"""Exception hierarchy shared by all davislab modules."""


class DavisLabError(Exception):
    """Base class for every error raised by davislab."""


class ModelError(DavisLabError):
    """The market model is unusable (arbitrage, invalid endowment, ...)."""


class DomainError(DavisLabError, ValueError):
    """An argument lies outside the domain of a function."""


class ArgumentError(DavisLabError, ValueError):
    """A precondition on a call argument is violated."""


class NumericError(DavisLabError):
    """A numerical routine failed (bracketing, non-finite values, ...)."""


class InternalError(NumericError):
    """A state that should be impossible under the stated preconditions."""


class ConfigError(DavisLabError):
    """An experiment configuration is malformed or inconsistent."""
