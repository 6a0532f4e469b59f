"""Exception hierarchy shared by every longswap module."""


class LongswapError(Exception):
    """Base class for all errors raised by longswap."""

    exit_code = 1


class ValidationError(LongswapError, ValueError):
    """An input violates a documented invariant or precondition."""

    exit_code = 2


class HorizonError(ValidationError):
    """Requested age window or horizon exceeds what the inputs cover."""


class CorruptFileError(LongswapError):
    """A scenario or parameter file cannot be decoded."""

    exit_code = 3


class BoundError(LongswapError):
    """A root-finding target is unreachable within the search bracket."""

    exit_code = 4
