"""
Exception types raised by ptx.

Every error is a ValueError so callers that only guard against bad input keep
working, and carries the exit code the command line reports for it.
"""
from ptx.constants import ErrorCode


class PtxError(ValueError):
    error_code = ErrorCode.CONFIG_ERROR


class RankDeficient(PtxError):
    pass


class DimensionMismatch(PtxError):
    pass


class NoComplement(PtxError):
    pass


class InvalidDims(PtxError):
    pass


class InvalidK(PtxError):
    pass


class InvalidGamma(PtxError):
    pass


class InvalidOrder(PtxError):
    pass


class EmptyCurve(PtxError):
    pass


class Unachievable(PtxError):
    pass


class EmptyData(PtxError):
    pass


class InvalidArgs(PtxError):
    pass


class EmptyPrivate(PtxError):
    pass


class KTooSmall(PtxError):
    pass


class InvalidRho(PtxError):
    pass


class MalformedCsv(PtxError):
    pass


class EmptyInput(PtxError):
    pass


class ConfigError(PtxError):
    pass


class Diverged(PtxError):
    """DP-SGD produced a non-finite iterate."""
