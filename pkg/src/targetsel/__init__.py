"""Risk-targeted selection among one-dimensional estimators.

Given a family of candidate estimators whose first member is asymptotically
unbiased for the target, the package estimates each candidate's mean-squared
error around that baseline (squared gap, debiased by the bootstrap variance
of the gap, plus the candidate's own variance), selects the minimiser of the
positive-part criterion, and forms selection-aware bootstrap confidence
intervals at the cost of a single replicate grid.  A cross-validation
competitor, three synthetic causal-inference study designs and a Monte Carlo
harness for the method's asymptotic guarantees are included.
"""

from .bootstrap import (
    ConfidenceInterval,
    ReplicateMatrix,
    ResamplePlan,
    draw_resample_indices,
    percentile_interval,
    replicate_estimates,
    select_ci_full,
    select_ci_shortcut,
    variances_from_replicates,
)
from .dgp import (
    PotentialOutcomes,
    ScenarioConfig,
    TrueEffect,
    gen_iv,
    gen_observational,
    gen_proxy,
    generate,
    normal_cdf,
    standard_normal,
    true_effect,
)
from .errors import (
    DegenerateInstrument,
    DegenerateTreatment,
    EmptyArm,
    EmptyProxyGroup,
    EmptyStratum,
    EstimatorError,
    ExperimentError,
    FoldEvaluationError,
    MissingBaseline,
    MissingColumn,
    ReplicateExhausted,
    TooFewRecords,
    ZeroOverlapDenominator,
    ZeroPropensity,
)
from .estimators import (
    CandidateFamily,
    StratumStats,
    aipw_ate,
    aipw_overlap,
    diff_in_means,
    empirical_strata,
    iv_ratio,
    ols_slope,
    product_estimator,
    scenario_family,
    shrinkage_family,
)
from .experiments import (
    McConfig,
    McOutcome,
    McRow,
    Method,
    Metric,
    SyntheticLinearConfig,
    check_criterion_bias,
    check_gaussian_lemma,
    check_selection_consistency,
    check_variance_ordering,
    coverage_eval,
    cv_bias_constant,
    mse_curve,
)
from .plotting import PlotSpec, render_plot
from .samples import (
    IvRecord,
    ObsRecord,
    ProxyRecord,
    Scenario,
    ScenarioSample,
    read_sample_csv,
    write_sample_csv,
)
from .selection import (
    Criterion,
    FoldPlan,
    RiskTable,
    SelectionResult,
    VarianceEstimates,
    VarianceSource,
    cv_risk,
    cv_risk_all,
    evaluate_criteria,
    make_folds,
    modified_risk,
    raw_risk,
    select,
)
from .selector import TargetedSelector, check_sample

__version__ = "0.1.0"
