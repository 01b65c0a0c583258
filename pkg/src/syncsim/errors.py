"""Exception hierarchy shared by all simulator modules."""


class SyncSimError(Exception):
    """Base class for every error raised by the simulator."""


class ContractViolation(SyncSimError, ValueError):
    """An argument broke an operation's precondition."""


class ConfigurationError(SyncSimError, ValueError):
    """Invalid experiment or waveform configuration."""


class InputError(SyncSimError, ValueError):
    """Malformed input data (wrong lengths, empty arrays, unparsable files)."""


class EstimationError(SyncSimError):
    """A time-of-arrival estimate could not be trusted."""


class AmbiguityError(EstimationError):
    """Matched-filter peak fell on the edge of the search window."""


class SchedulingError(SyncSimError, ValueError):
    """A TDMA schedule could not be built."""


class InvalidQuadError(SyncSimError, ValueError):
    """A timestamp quad was flagged invalid and cannot produce an estimate."""
