"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class InsufficientSamplesError(ValueError):
    """Too few samples to form the requested estimate."""


class DegenerateCovarianceError(ArithmeticError):
    """The quadrature covariance is singular where a criterion needs it positive."""


class NumericalError(ArithmeticError):
    """Deterministic propagation left its valid region (e.g. lost positivity)."""


class TrajectoryError(RuntimeError):
    """A stochastic trajectory produced non-finite amplitudes."""


class ConfigError(ValueError):
    """Invalid sweep configuration; carries every violation found."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
