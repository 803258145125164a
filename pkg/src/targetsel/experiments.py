"""Monte Carlo harness: risk curves, interval coverage, asymptotic checks.

Every run of every experiment draws its randomness from streams keyed by
``(master_seed, scenario, s index, run index, stage)``, so results are a pure
function of the configuration no matter how many worker processes execute the
runs.  Aggregation always walks runs in index order.

The synthetic-linear checks verify, by direct simulation in a setting where
every moment is known in closed form, the advertised asymptotics of the two
criteria: the debiased criterion is asymptotically unbiased for the
candidate's mean-squared error while the sample-splitting criterion carries
an O(1/n) bias with a known constant, their fluctuation variances are
strictly ordered in the unbiased-candidate case and asymptotically equal in
the biased case, and selection concentrates on candidates with the
baseline's estimand.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ._rng import (
    STAGE_BOOTSTRAP,
    STAGE_CI,
    STAGE_FOLDS,
    STAGE_GENERATE,
    derive_seed,
    stream,
)
from .bootstrap import (
    DEFAULT_B_INTERVAL,
    DEFAULT_B_VARIANCE,
    ResamplePlan,
    _replicate_selections,
    percentile_interval,
    replicate_estimates,
    variances_from_replicates,
)
from .dgp import ScenarioConfig, generate, standard_normal, true_effect
from .errors import EstimatorError, ExperimentError, ReplicateExhausted
from .estimators import CandidateFamily, scenario_family
from .samples import Scenario
from .selection import (
    DEFAULT_FOLDS,
    Criterion,
    VarianceEstimates,
    VarianceSource,
    cv_risk_all_with_redraw,
    evaluate_criteria,
    select,
)

MAX_FAILURE_RATE = 0.01

DEFAULT_S_GRIDS = {
    Scenario.OBSERVATIONAL: tuple(i / 10 for i in range(11)),
    Scenario.IV_FUSION: tuple(i / 5 for i in range(11)),
    Scenario.PROXY: tuple(i / 10 for i in range(13)),
}


class Method(enum.Enum):
    TARGETED = "targeted"
    CV_SELECT = "cv"
    BASELINE = "baseline"


class Metric(enum.Enum):
    MSE = "mse"
    COVERAGE = "coverage"
    CRITERION_BIAS = "criterion-bias"
    CRITERION_VARIANCE = "criterion-var"
    SELECT_PROB = "select-prob"


@dataclass(frozen=True)
class McConfig:
    scenario: Scenario
    s_grid: tuple[float, ...] | None = None
    runs: int = 200
    b_var: int = DEFAULT_B_VARIANCE
    b_ci: int = DEFAULT_B_INTERVAL
    k_folds: int = DEFAULT_FOLDS
    level: float = 0.95
    master_seed: int = 0
    methods: tuple[Method, ...] = (Method.TARGETED, Method.CV_SELECT, Method.BASELINE)
    weights: tuple[float, ...] | None = None
    as_printed_grid: bool = False
    variance_term: str = "var-g"

    def __post_init__(self):
        if self.runs < 2:
            raise ValueError("need at least 2 runs")
        grid = DEFAULT_S_GRIDS[self.scenario] if self.s_grid is None else tuple(self.s_grid)
        if not grid or list(grid) != sorted(grid):
            raise ValueError("s_grid must be nonempty and sorted")
        object.__setattr__(self, "s_grid", grid)
        if not self.methods:
            raise ValueError("need at least one method")

    def family(self) -> CandidateFamily:
        return scenario_family(self.scenario, self.weights, self.as_printed_grid)


@dataclass(frozen=True)
class McRow:
    scenario: str
    s: float
    method: str
    metric: str
    value: float
    mc_se: float
    runs: int
    seed: int


@dataclass(frozen=True)
class FailureRecord:
    scenario: str
    s: float
    run: int
    failure_kind: str
    redraws: int


@dataclass(frozen=True)
class McOutcome:
    rows: list[McRow]
    failures: list[FailureRecord]


# -- shared per-run machinery --------------------------------------------------


def _scenario_config(config: McConfig, s: float, seed: int) -> ScenarioConfig:
    return ScenarioConfig(scenario=config.scenario, s=s, seed=seed)


def _cv_values_with_redraw(family, sample, config: McConfig, keys):
    return cv_risk_all_with_redraw(
        family,
        sample,
        config.k_folds,
        lambda attempt: stream(*keys, STAGE_FOLDS, attempt),
    )


def _mse_task(task) -> tuple[int, int, dict]:
    config, s_idx, run = task
    s = config.s_grid[s_idx]
    keys = (config.master_seed, _SCENARIO_CODE[config.scenario], s_idx, run)
    redraws = 0
    try:
        sample = generate(
            _scenario_config(config, s, derive_seed(*keys, STAGE_GENERATE))
        )
        family = config.family()
        estimates: dict[str, float] = {}
        table = None
        if Method.TARGETED in config.methods:
            plan = ResamplePlan(b=config.b_var, seed=derive_seed(*keys, STAGE_BOOTSTRAP))
            matrix = replicate_estimates(family, sample, plan)
            redraws += matrix.redraws
            table = evaluate_criteria(family, sample, variances_from_replicates(matrix))
            estimates[Method.TARGETED.value] = select(table, Criterion.MODIFIED_RISK).estimate
        cv_fallback = False
        if Method.CV_SELECT in config.methods:
            cv_values, cv_redraws = _cv_values_with_redraw(family, sample, config, keys)
            redraws += cv_redraws
            if table is None:
                table = evaluate_criteria(family, sample, _zero_variances(len(family)))
            if cv_values is None:
                # No fold plan can make the criterion computable: selection
                # degenerates to the baseline (reported via the failure file).
                cv_fallback = True
                estimates[Method.CV_SELECT.value] = float(table.estimates[0])
            else:
                estimates[Method.CV_SELECT.value] = select(
                    replace(table, cv_risk=cv_values), Criterion.CV_RISK
                ).estimate
        if Method.BASELINE in config.methods:
            estimates[Method.BASELINE.value] = (
                float(table.estimates[0]) if table is not None else family.evaluators[0](sample)
            )
    except (EstimatorError, ReplicateExhausted) as err:
        return s_idx, run, {"failure": type(err).__name__, "redraws": redraws}
    return s_idx, run, {
        "estimates": estimates,
        "redraws": redraws,
        "cv_fallback": cv_fallback,
    }


def _coverage_task(task) -> tuple[int, int, dict]:
    config, s_idx, run = task
    s = config.s_grid[s_idx]
    keys = (config.master_seed, _SCENARIO_CODE[config.scenario], s_idx, run)
    redraws = 0
    try:
        sample = generate(
            _scenario_config(config, s, derive_seed(*keys, STAGE_GENERATE))
        )
        family = config.family()
        plan = ResamplePlan(b=config.b_ci, seed=derive_seed(*keys, STAGE_CI))
        matrix = replicate_estimates(family, sample, plan)
        redraws += matrix.redraws
        variances = variances_from_replicates(matrix)
        picks = _replicate_selections(matrix, variances, config.variance_term)
        interval = percentile_interval(picks, config.level)
    except (EstimatorError, ReplicateExhausted) as err:
        return s_idx, run, {"failure": type(err).__name__, "redraws": redraws}
    covered = interval.covers(true_effect(config.scenario, s).theta0)
    return s_idx, run, {"covered": bool(covered), "redraws": redraws}


_SCENARIO_CODE = {
    Scenario.OBSERVATIONAL: 0,
    Scenario.IV_FUSION: 1,
    Scenario.PROXY: 2,
}

_TASK_RUNNERS = {"mse": _mse_task, "coverage": _coverage_task}


def _zero_variances(size: int) -> VarianceEstimates:
    return VarianceEstimates(
        var_diff=np.zeros(size), var_g=np.zeros(size), source=VarianceSource.INJECTED
    )


def _run_all(config: McConfig, kind: str, workers: int):
    runner = _TASK_RUNNERS[kind]
    tasks = [
        (config, s_idx, run)
        for s_idx in range(len(config.s_grid))
        for run in range(config.runs)
    ]
    if workers <= 1:
        results = [runner(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(runner, tasks, chunksize=chunk))
    per_s: list[dict[int, dict]] = [dict() for _ in config.s_grid]
    for s_idx, run, payload in results:
        per_s[s_idx][run] = payload
    return per_s


def _collect_failures(config: McConfig, per_s) -> list[FailureRecord]:
    failures = []
    for s_idx, s in enumerate(config.s_grid):
        for run in range(config.runs):
            payload = per_s[s_idx][run]
            if "failure" in payload:
                failures.append(
                    FailureRecord(
                        config.scenario.value, s, run, payload["failure"], payload["redraws"]
                    )
                )
            elif payload.get("cv_fallback"):
                failures.append(
                    FailureRecord(
                        config.scenario.value, s, run, "cv-fallback-baseline",
                        payload["redraws"],
                    )
                )
            elif payload["redraws"]:
                failures.append(
                    FailureRecord(
                        config.scenario.value, s, run, "redrawn-ok", payload["redraws"]
                    )
                )
        n_failed = sum(1 for p in per_s[s_idx].values() if "failure" in p)
        if n_failed / config.runs >= MAX_FAILURE_RATE:
            raise ExperimentError(
                f"{n_failed}/{config.runs} runs failed at s={s}; results untrustworthy"
            )
    return failures


def mse_curve(config: McConfig, workers: int = 1) -> McOutcome:
    """Mean-squared error of each method's final estimate across the s grid.

    All requested methods share each run's dataset; a run that fails is
    excluded from every method (and counted), so comparisons stay paired.
    """
    per_s = _run_all(config, "mse", workers)
    failures = _collect_failures(config, per_s)
    rows = []
    for s_idx, s in enumerate(config.s_grid):
        theta0 = true_effect(config.scenario, s).theta0
        ok = [per_s[s_idx][r] for r in range(config.runs) if "failure" not in per_s[s_idx][r]]
        for method in Method:
            if method not in config.methods:
                continue
            errors = np.array([(p["estimates"][method.value] - theta0) ** 2 for p in ok])
            rows.append(
                McRow(
                    scenario=config.scenario.value,
                    s=s,
                    method=method.value,
                    metric=Metric.MSE.value,
                    value=float(errors.mean()),
                    mc_se=float(errors.std(ddof=1) / math.sqrt(len(errors))),
                    runs=len(errors),
                    seed=config.master_seed,
                )
            )
    return McOutcome(rows=rows, failures=failures)


def coverage_eval(config: McConfig, workers: int = 1) -> McOutcome:
    """Realised coverage of the selection-aware shortcut interval per s."""
    if tuple(config.methods) != (Method.TARGETED,):
        config = replace(config, methods=(Method.TARGETED,))
    per_s = _run_all(config, "coverage", workers)
    failures = _collect_failures(config, per_s)
    rows = []
    for s_idx, s in enumerate(config.s_grid):
        ok = [per_s[s_idx][r] for r in range(config.runs) if "failure" not in per_s[s_idx][r]]
        hits = np.array([p["covered"] for p in ok], dtype=np.float64)
        p_hat = float(hits.mean())
        rows.append(
            McRow(
                scenario=config.scenario.value,
                s=s,
                method=Method.TARGETED.value,
                metric=Metric.COVERAGE.value,
                value=p_hat,
                mc_se=math.sqrt(p_hat * (1.0 - p_hat) / len(hits)),
                runs=len(hits),
                seed=config.master_seed,
            )
        )
    return McOutcome(rows=rows, failures=failures)


# -- synthetic linear setting (all moments known in closed form) ---------------


@dataclass(frozen=True)
class SyntheticLinearConfig:
    """Bivariate Gaussian columns (A, B); candidates are shifted mixed means.

    The baseline estimator is the sample mean of A.  The candidate averages
    ``mix * A + (1 - mix) * B`` and adds ``bias_shift``, so its estimand is
    off the target by exactly ``bias_shift``, its influence variance is a
    closed form in the configured moments, and the exact mean-squared error
    is available without any nested simulation.
    """

    n: int = 5000
    var_a: float = 1.0
    var_b: float = 4.0
    correlation: float = 0.5
    mix: float = 0.5
    bias_shift: float = 0.0
    k_folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not -1.0 < self.correlation < 1.0:
            raise ValueError("correlation must lie strictly inside (-1, 1)")
        if min(self.var_a, self.var_b) <= 0:
            raise ValueError("variances must be positive")
        if abs(self.influence_correlation) >= 1.0 - 1e-12:
            raise ValueError(
                "candidate and baseline influences are perfectly correlated"
            )

    @property
    def cov_ab(self) -> float:
        return self.correlation * math.sqrt(self.var_a * self.var_b)

    @property
    def var_psi0(self) -> float:
        return self.var_a

    @property
    def var_psig(self) -> float:
        m = self.mix
        return m * m * self.var_a + (1 - m) ** 2 * self.var_b + 2 * m * (1 - m) * self.cov_ab

    @property
    def var_psi_diff(self) -> float:
        return (1 - self.mix) ** 2 * (self.var_a + self.var_b - 2 * self.cov_ab)

    @property
    def influence_correlation(self) -> float:
        cov_g0 = self.mix * self.var_a + (1 - self.mix) * self.cov_ab
        return cov_g0 / math.sqrt(self.var_psig * self.var_psi0)

    def exact_mse(self, n: int) -> float:
        return self.var_psig / n + self.bias_shift ** 2


def cv_bias_constant(config: SyntheticLinearConfig) -> float:
    """Limit of ``n * (mean CV criterion - MSE)`` for an unbiased candidate."""
    alpha = 1.0 / config.k_folds
    return alpha / (1.0 - alpha) * config.var_psig + config.var_psi0 / alpha


_THEORY_CHUNK = 250


def _criterion_errors(config: SyntheticLinearConfig, n: int, runs: int):
    """Per-run errors of both criteria against the exact MSE, scaled by n.

    Variance terms are injected exactly (the setting permits it), so the
    criterion errors isolate the squared-gap estimation.  Folds are
    consecutive blocks, which for i.i.d. draws is distributionally identical
    to a random balanced split; ``n`` must be a multiple of ``k_folds``.
    """
    k = config.k_folds
    if n % k:
        raise ValueError("n must be a multiple of k_folds for exact fold sizes")
    m = n // k
    rng = stream(config.seed)
    sa, sb = math.sqrt(config.var_a), math.sqrt(config.var_b)
    rho = config.correlation
    mse = config.exact_mse(n)
    var_diff_n = config.var_psi_diff / n
    var_g_n = config.var_psig / n
    e_hat = np.empty(runs)
    e_tilde = np.empty(runs)
    done = 0
    while done < runs:
        chunk = min(_THEORY_CHUNK, runs - done)
        z1 = standard_normal(rng, (chunk, n))
        z2 = standard_normal(rng, (chunk, n))
        a = sa * z1
        b = sb * (rho * z1 + math.sqrt(1.0 - rho * rho) * z2)
        g = config.mix * a + (1.0 - config.mix) * b
        theta0_hat = a.mean(axis=1)
        thetag_hat = g.mean(axis=1) + config.bias_shift
        r_hat = (thetag_hat - theta0_hat) ** 2 - var_diff_n + var_g_n
        fold_sum_a = a.reshape(chunk, k, m).sum(axis=2)
        fold_sum_g = g.reshape(chunk, k, m).sum(axis=2)
        train_g = (g.sum(axis=1, keepdims=True) - fold_sum_g) / (n - m) + config.bias_shift
        r_tilde = ((train_g - fold_sum_a / m) ** 2).mean(axis=1)
        e_hat[done : done + chunk] = n * (r_hat - mse)
        e_tilde[done : done + chunk] = n * (r_tilde - mse)
        done += chunk
    return e_hat, e_tilde


def _summary_row(values: np.ndarray, **kw) -> McRow:
    return McRow(
        value=float(values.mean()),
        mc_se=float(values.std(ddof=1) / math.sqrt(len(values))),
        runs=len(values),
        **kw,
    )


def check_criterion_bias(
    config: SyntheticLinearConfig, n_grid, runs: int
) -> list[McRow]:
    """Monte Carlo mean of ``n * (criterion - exact MSE)`` per criterion and n.

    For an unbiased candidate the debiased criterion's mean error should be
    statistically zero, while the sample-splitting criterion's should match
    :func:`cv_bias_constant`.  The ``s`` column carries ``n``.
    """
    rows = []
    for n in n_grid:
        e_hat, e_tilde = _criterion_errors(config, n, runs)
        for method, values in ((Method.TARGETED, e_hat), (Method.CV_SELECT, e_tilde)):
            rows.append(
                _summary_row(
                    values,
                    scenario="synthetic-linear",
                    s=float(n),
                    method=method.value,
                    metric=Metric.CRITERION_BIAS.value,
                    seed=config.seed,
                )
            )
    return rows


@dataclass(frozen=True)
class VarianceOrderingResult:
    rows: tuple[McRow, McRow]
    variance_ratio: float
    z_paired: float
    scale: str


def _paired_variance_z(a: np.ndarray, b: np.ndarray) -> float:
    """One-sided z statistic for Var(a) < Var(b) from paired squared deviations."""
    d = (a - a.mean()) ** 2 - (b - b.mean()) ** 2
    return float(d.mean() / (d.std(ddof=1) / math.sqrt(len(d))))


def check_variance_ordering(
    config: SyntheticLinearConfig, n: int, runs: int
) -> VarianceOrderingResult:
    """Fluctuation variances of the two criteria around the exact MSE.

    Unbiased candidate: errors are compared on the n scale and the debiased
    criterion's variance should be strictly smaller (negative ``z_paired``).
    Biased candidate: errors are compared on the sqrt(n) scale where both
    variances share one limit, so their ratio should be near 1.
    """
    e_hat, e_tilde = _criterion_errors(config, n, runs)
    if config.bias_shift == 0.0:
        scale = "n"
        label = "synthetic-linear"
    else:
        scale = "sqrt-n"
        label = "synthetic-linear-biased"
        e_hat = e_hat / math.sqrt(n)
        e_tilde = e_tilde / math.sqrt(n)
    var_hat = e_hat.var(ddof=1)
    var_tilde = e_tilde.var(ddof=1)

    def row(method, values):
        spread = values.var(ddof=1)
        # mc_se of a variance estimate via the fourth-moment delta method
        centered = (values - values.mean()) ** 2
        return McRow(
            scenario=label,
            s=float(n),
            method=method.value,
            metric=Metric.CRITERION_VARIANCE.value,
            value=float(spread),
            mc_se=float(centered.std(ddof=1) / math.sqrt(len(values))),
            runs=len(values),
            seed=config.seed,
        )

    return VarianceOrderingResult(
        rows=(row(Method.TARGETED, e_hat), row(Method.CV_SELECT, e_tilde)),
        variance_ratio=float(var_hat / var_tilde),
        z_paired=_paired_variance_z(e_hat, e_tilde),
        scale=scale,
    )


def check_selection_consistency(
    config: SyntheticLinearConfig, n_grid, runs: int
) -> list[McRow]:
    """Fraction of runs selecting a candidate whose estimand is the target.

    The family is the baseline, an unbiased mixed candidate (lower influence
    variance in the canonical configuration) and, when ``bias_shift`` is
    nonzero, the same mixed candidate shifted off target.  Variances are
    injected exactly; selection runs through the production criterion and
    tie-break path.
    """
    mix = config.mix
    shift = config.bias_shift

    evaluators = (
        lambda means: means[0],
        lambda means: mix * means[0] + (1 - mix) * means[1],
        lambda means: mix * means[0] + (1 - mix) * means[1] + shift,
    )
    family = CandidateFamily(
        labels=("baseline", "mixed", "mixed-shifted"), evaluators=evaluators
    )
    unbiased = {0, 1} | ({2} if shift == 0.0 else set())
    rng = stream(config.seed)
    sa, sb = math.sqrt(config.var_a), math.sqrt(config.var_b)
    rho = config.correlation
    rows = []
    for n in n_grid:
        variances = VarianceEstimates(
            var_diff=np.array([0.0, config.var_psi_diff / n, config.var_psi_diff / n]),
            var_g=np.array([config.var_psi0 / n, config.var_psig / n, config.var_psig / n]),
            source=VarianceSource.INJECTED,
        )
        hits = np.empty(runs)
        done = 0
        while done < runs:
            chunk = min(max(1, (_THEORY_CHUNK * 5000) // n), runs - done)
            z1 = standard_normal(rng, (chunk, n))
            z2 = standard_normal(rng, (chunk, n))
            mean_a = sa * z1.mean(axis=1)
            mean_b = sb * (rho * z1 + math.sqrt(1.0 - rho * rho) * z2).mean(axis=1)
            for j in range(chunk):
                table = evaluate_criteria(
                    family, (mean_a[j], mean_b[j]), variances
                )
                picked = select(table, Criterion.MODIFIED_RISK).selected_g
                hits[done + j] = 1.0 if picked in unbiased else 0.0
            done += chunk
        p_hat = float(hits.mean())
        rows.append(
            McRow(
                scenario="synthetic-linear",
                s=float(n),
                method=Method.TARGETED.value,
                metric=Metric.SELECT_PROB.value,
                value=p_hat,
                mc_se=math.sqrt(p_hat * (1.0 - p_hat) / runs),
                runs=runs,
                seed=config.seed,
            )
        )
    return rows


@dataclass(frozen=True)
class GaussianPairResult:
    rows: tuple[McRow, McRow]
    z_paired: float


def check_gaussian_lemma(
    k: int, runs: int, rng: np.random.Generator, correlation: float = 0.5
) -> GaussianPairResult:
    """Sampled comparison of the two squared-gap statistics on K Gaussian pairs.

    Per run, draw K i.i.d. pairs (Z_i, X_i) and compare the variance of the
    pooled squared gap ``(mean(Z) - mean(X))^2`` against the mean of held-out
    squared gaps ``(loo-mean(Z) - X_i)^2`` — the finite-K reduction of the
    pooled criterion versus the sample-splitting one.  The pooled statistic
    should have strictly smaller variance whenever |correlation| < 1.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    if not -1.0 < correlation < 1.0:
        raise ValueError("correlation must lie strictly inside (-1, 1)")
    lhs = np.empty(runs)
    rhs = np.empty(runs)
    done = 0
    while done < runs:
        chunk = min(200_000, runs - done)
        z = standard_normal(rng, (chunk, k))
        w = standard_normal(rng, (chunk, k))
        x = correlation * z + math.sqrt(1.0 - correlation * correlation) * w
        lhs[done : done + chunk] = ((z - x).mean(axis=1)) ** 2
        loo = (z.sum(axis=1, keepdims=True) - z) / (k - 1)
        rhs[done : done + chunk] = ((loo - x) ** 2).mean(axis=1)
        done += chunk

    def row(method, values):
        centered = (values - values.mean()) ** 2
        return McRow(
            scenario="gaussian-pair",
            s=float(k),
            method=method.value,
            metric=Metric.CRITERION_VARIANCE.value,
            value=float(values.var(ddof=1)),
            mc_se=float(centered.std(ddof=1) / math.sqrt(runs)),
            runs=runs,
            seed=0,
        )

    return GaussianPairResult(
        rows=(row(Method.TARGETED, lhs), row(Method.CV_SELECT, rhs)),
        z_paired=_paired_variance_z(lhs, rhs),
    )
