"""Exception hierarchy for the calibration toolkit."""


class CalibrationError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CalibrationError):
    """An argument violates a documented precondition."""


class DomainError(CalibrationError):
    """A value left the domain a formula requires (e.g. volatility <= 0)."""


class SingularDesignError(CalibrationError):
    """A regression design is singular and no prior regularises it."""


class NumericError(CalibrationError):
    """A numeric operation failed (non-positive-definite matrix, overflow)."""


class DegenerateDrawError(CalibrationError):
    """A posterior draw is unusable (mean-reversion rate at/below the floor)."""


class DegenerateWeightsError(CalibrationError):
    """Every particle weight vanished; callers fall back to uniform weights."""


class SimulationError(CalibrationError):
    """Path simulation failed (too many rejected price steps)."""


class PriceStepRejected(CalibrationError):
    """A single Euler price step produced a non-positive multiplier."""


class IngestionError(CalibrationError):
    """A price CSV failed validation."""


class ConfigError(CalibrationError):
    """A configuration document failed schema validation."""
