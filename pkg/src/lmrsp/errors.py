"""Exception types raised across the package."""


class LmrspError(Exception):
    """Base class for all errors raised by lmrsp."""


class SizeLimitExceeded(LmrspError):
    pass


class LengthMismatch(LmrspError, ValueError):
    pass


class InvalidSchedule(LmrspError, ValueError):
    pass


class InvalidRate(LmrspError, ValueError):
    pass


class UndefinedDistribution(LmrspError):
    """Stationary law requested for a chain without a unique one."""


class ZeroNu(LmrspError):
    pass


class UnsupportedKind(LmrspError, ValueError):
    pass


class InvalidMean(LmrspError, ValueError):
    pass


class ZeroQueue(LmrspError, ValueError):
    pass


class InvalidGrid(LmrspError, ValueError):
    pass


class SeriesTooShort(LmrspError, ValueError):
    pass


class UndefinedDelay(LmrspError):
    pass


class ConfigError(LmrspError, ValueError):
    pass


class QueueOverflow(LmrspError, OverflowError):
    pass
