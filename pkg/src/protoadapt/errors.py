"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so trainers and loaders must
raise the most specific class that applies.
"""


class ProtoadaptError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(ProtoadaptError):
    """Array dimensions do not match the operation's contract."""


class DataError(ProtoadaptError):
    """Invalid data: bad labels, non-finite inputs, malformed files."""


class FormatError(DataError):
    """A BADF file failed structural validation (magic, version, payload)."""


class ParamError(ProtoadaptError):
    """A configuration or parameter value violates its invariants."""


class DivergenceError(ProtoadaptError):
    """Training produced a non-finite objective value."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite objective at epoch {epoch}")
