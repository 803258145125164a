"""Exception hierarchy.

``EstimatorError`` marks conditions under which a point estimate is
mathematically undefined on the given records (an empty cell, a zero
denominator).  These are recoverable in resampling contexts: the bootstrap
redraws the offending replicate, the experiment harness redraws fold plans.
Everything else derives from the usual built-ins.
"""


class EstimatorError(Exception):
    """An estimator is undefined on the sample it was handed."""


class EmptyStratum(EstimatorError):
    """A covariate stratum required by the formula has an empty treatment cell."""

    def __init__(self, x, t):
        super().__init__(f"stratum x={x} has no records with t={t}")
        self.x = x
        self.t = t


class ZeroPropensity(EstimatorError):
    """An inverse-weighted term divides by an empirical propensity of zero."""


class ZeroOverlapDenominator(EstimatorError):
    """All empirical propensities are 0 or 1, so the overlap weight sums to zero."""


class DegenerateInstrument(EstimatorError):
    """Empirical covariance between instrument and treatment is exactly zero."""


class DegenerateTreatment(EstimatorError):
    """Empirical treatment variance is exactly zero."""


class EmptyArm(EstimatorError):
    """One treatment arm contains no records."""


class EmptyProxyGroup(EstimatorError):
    """One proxy-outcome group contains no records."""


class FoldEvaluationError(EstimatorError):
    """An estimator failed on a cross-validation fold; carries the fold index."""

    def __init__(self, fold, cause):
        super().__init__(f"estimator failed on fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause


class MissingBaseline(ValueError):
    """A shrinkage grid does not contain weight 0 (the designated baseline)."""


class TooFewRecords(ValueError):
    """Not enough records to build the requested fold plan."""


class ReplicateExhausted(RuntimeError):
    """A bootstrap replicate kept failing after the maximum number of redraws."""


class MissingColumn(ValueError):
    """A CSV column referenced by a plot specification does not exist."""


class ExperimentError(RuntimeError):
    """Too many Monte Carlo runs failed for the results to be trustworthy."""
