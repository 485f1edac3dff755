"""Exception types raised across the package."""


class QmetroError(Exception):
    pass


class ValidationError(QmetroError, ValueError):
    """Input object violates a structural invariant (Hermiticity, unitarity, ...)."""


class SizeError(QmetroError, ValueError):
    """Requested size is outside what the dense representation supports."""


class DomainError(QmetroError, ValueError):
    """Argument outside the mathematical domain (negative beta, off-grid energy, ...)."""


class ConfigurationError(QmetroError, ValueError):
    """Inconsistent parameters (even g, mismatched grids, ...)."""


class PrecisionError(QmetroError, ValueError):
    """Grid too coarse for the requested inverse temperature."""


class UniquenessError(QmetroError, RuntimeError):
    """Generator has a degenerate null space."""


class ConditioningError(QmetroError, RuntimeError):
    """Numerically ill-conditioned operation."""
