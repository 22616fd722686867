"""Exception hierarchy for the srivw package."""


class SrivwError(Exception):
    """Base class for all srivw errors."""


class ValidationError(SrivwError, ValueError):
    """Input data violates a documented invariant."""


class ParseError(SrivwError, ValueError):
    """A summary-statistics or correlation file could not be parsed."""


class NotPsdError(SrivwError, ValueError):
    """A matrix required to be positive semi-definite is not."""


class IllConditionedError(SrivwError, ArithmeticError):
    """A linear system is numerically singular (condition number >= 1e12)."""


class DegenerateSpectrumError(SrivwError, ArithmeticError):
    """Spectral regularization hit an eigenvalue within 1e-12 of zero."""


class DegenerateDenominatorError(SrivwError, ArithmeticError):
    """A heterogeneity-statistic denominator is not strictly positive."""


class InsufficientDataError(SrivwError, ValueError):
    """Too few observations for the requested estimate."""


class TuningError(SrivwError, RuntimeError):
    """Regularization tuning failed at every grid point."""


class SimulationError(SrivwError, RuntimeError):
    """A Monte Carlo run failed (too many per-replication failures)."""
