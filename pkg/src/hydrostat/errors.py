"""Exception hierarchy shared by the solver, the oracle and the CLI."""


class HydrostatError(Exception):
    """Base class for all package errors."""


class DimensionError(HydrostatError, ValueError):
    """Array shape does not match the grid it is paired with."""


class PreconditionError(HydrostatError, ValueError):
    """An input violates a documented precondition (e.g. nonzero vertical mean)."""


class IncompatibilityError(HydrostatError, ValueError):
    """Half-domain data cannot be extended to a smooth periodic field."""


class BlowUpError(HydrostatError, RuntimeError):
    """Integration produced a non-finite or runaway state.

    ``last_valid_time`` is the time of the last accepted state and
    ``trajectory`` (when set by the integrator) holds everything recorded
    before the failure.
    """

    def __init__(self, message, last_valid_time=None, trajectory=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time
        self.trajectory = trajectory


class IntegrityError(HydrostatError, IOError):
    """A snapshot failed its checksum or is truncated."""


class ConfigError(HydrostatError, ValueError):
    """A run configuration is invalid."""
