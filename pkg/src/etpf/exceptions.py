"""Exception hierarchy shared across the package."""


class ETPFError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ETPFError):
    """Invalid or inconsistent user configuration (dimensions, missing data)."""


class ChannelModelError(ETPFError):
    """Delay-channel inversion or bound failure."""


class CoverageError(ETPFError):
    """A signal was queried or integrated outside its stored range."""


class PredictorError(ETPFError):
    """Prediction could not be computed (history coverage, divergence)."""


class MonitorError(ETPFError):
    """Lyapunov monitor could not evaluate its functionals."""


class DomainError(ETPFError, ValueError):
    """Scalar argument outside the mathematically valid domain."""


class NumericalError(ETPFError):
    """A numerical solve failed (singular system, no positive-definite solution)."""
