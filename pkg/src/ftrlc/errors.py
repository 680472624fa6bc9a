"""Shared exception types."""


class ControlError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(ControlError):
    """Vector or matrix shapes are inconsistent with the model."""


class DisturbanceBoundError(ControlError):
    """A disturbance violated the adversary's norm bound."""


class UnsupportedConfiguration(ControlError):
    """A configuration outside the supported analysis regime (e.g. K != 0
    where the closed forms require the zero stabilizer)."""


class ConfigError(ControlError):
    """Invalid scenario or run configuration."""


class SolverError(ControlError):
    """An iterative solver failed to converge."""
