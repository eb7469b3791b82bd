"""Exception hierarchy shared across the package."""


class FpError(Exception):
    """Base class for all package errors."""


class NonPositiveInput(FpError, ValueError):
    """An FP transform received x <= 0; shift the domain first."""


class RankDeficient(FpError):
    """Design matrix has effective rank below its column count."""


class SingularSystem(FpError):
    """A symmetric system could not be factorised even after ridging."""


class TooFewObservations(FpError, ValueError):
    pass


class DegenerateVariance(FpError):
    """Residual variance is zero within tolerance (perfect fit)."""


class InvalidKurtosis(FpError, ValueError):
    """2 + gamma4 <= 0, so the score coefficient is undefined."""


class UnsupportedLaw(FpError, ValueError):
    pass


class NonFiniteScore(FpError):
    pass


class ZeroResidual(FpError, ValueError):
    """Exact zero residual met by a negative-power score function."""


class SingularCorrelant(FpError):
    pass


class UnstableBasis(FpError):
    """A correlant report in a nested sequence is flagged unstable."""


class PerfectFit(FpError):
    """RSS is numerically zero, so BIC is undefined."""


class AllCandidatesFailed(FpError):
    pass


class InsufficientCandidates(FpError, ValueError):
    pass


class TooManyFailures(FpError):
    """More than a tenth of bootstrap replicates failed."""


class ColumnMissing(FpError, KeyError):
    pass


class NonPositiveCovariate(FpError, ValueError):
    pass


class UnknownExperiment(FpError, ValueError):
    pass


class InvalidConfig(FpError, ValueError):
    pass
