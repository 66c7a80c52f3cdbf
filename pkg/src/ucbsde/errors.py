"""Exception and warning types shared across the package."""


class UcbsdeError(Exception):
    """Base class for all errors raised by this library."""


class CertificateViolated(UcbsdeError):
    """A declared regularity certificate failed a sampled check."""


class DivergentIntegral(UcbsdeError):
    """Adaptive quadrature detected a non-integrable function."""


class QuadratureFailure(UcbsdeError):
    """Quadrature error estimate failed to converge within budget."""


class StrictPositivityViolated(UcbsdeError):
    """A weight required to be strictly positive vanished at a sample point."""


class NoConvergence(UcbsdeError):
    """An iteration exhausted its budget before reaching tolerance."""


class ModulusNotPositive(UcbsdeError):
    """A modulus required to be strictly positive on (0, inf) is not."""


class DominancePreconditionFailed(UcbsdeError):
    """Generator dominance required by the comparison argument does not hold."""


class NTooSmall(UcbsdeError):
    """Regularization index below the linear-growth constant."""


class SearchBudgetExceeded(UcbsdeError):
    """Minimization budget exhausted before the requested tolerance."""


class DegenerateGrid(UcbsdeError):
    """Time grid with non-increasing or repeated nodes."""


class RegressionSingular(UcbsdeError):
    """Regression basis is rank deficient for the given ensemble."""


class NoPicardConvergence(UcbsdeError):
    """Inner fixed-point iteration for the implicit step diverged."""


class GridMismatch(UcbsdeError):
    """Two solutions expected on a common grid use different grids."""


class ConfigInvalid(UcbsdeError):
    """Experiment configuration failed validation."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class NonUniqueWarning(UserWarning):
    """The returned path is the maximal solution of a non-unique problem."""


class CauchyStalledWarning(UserWarning):
    """Cauchy gaps failed to decrease between the last two schedule entries."""
