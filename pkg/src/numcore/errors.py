"""Exception hierarchy shared by every package in ``src``."""


class F3Error(Exception):
    """Base class for all errors raised by this project."""


class ShapeError(F3Error, ValueError):
    """Operand shapes are incompatible."""


class NumericDomainError(F3Error, ValueError):
    """An input lies outside the domain of a numeric operation."""


class ContractError(F3Error, ValueError):
    """A documented precondition was violated by the caller."""


class LabelIndexError(F3Error, IndexError):
    """A class label does not index a valid column."""


class MissingDataError(F3Error, LookupError):
    """A sample is absent for the client that was asked about it."""


class DegenerateSampleError(F3Error, ValueError):
    """No client holds data for a sample."""


class ConfigError(F3Error, ValueError):
    """An experiment configuration is malformed or inconsistent."""


class FormatVersionError(F3Error, ValueError):
    """A file was written with an unsupported format version."""


class FormatParseError(F3Error, ValueError):
    """A file is truncated or corrupt."""

    def __init__(self, message, byte_offset):
        super().__init__(f"{message} (at byte offset {byte_offset})")
        self.byte_offset = byte_offset


class DegenerateShardWarning(UserWarning):
    """A client shard holds a single class; its head will predict a constant."""
