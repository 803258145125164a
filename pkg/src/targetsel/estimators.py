"""Point estimators for the three study designs, and candidate families.

All estimators are pure functions ``ScenarioSample -> float``.  Empirical
moments use plug-in (denominator ``n``) conventions throughout, and no
propensity clipping or trimming is applied anywhere: where a required cell is
empty the estimate is undefined and an :class:`~targetsel.errors.EstimatorError`
is raised instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateInstrument,
    DegenerateTreatment,
    EmptyArm,
    EmptyProxyGroup,
    EmptyStratum,
    MissingBaseline,
    ZeroOverlapDenominator,
)
from .samples import Scenario, ScenarioSample

Estimator = Callable[[ScenarioSample], float]


# -- stratum statistics (observational design) --------------------------------


@dataclass(frozen=True)
class StratumStats:
    """Per-cell empirical statistics for binary covariate and treatment.

    ``p_hat[(x, t)]`` is the empirical probability of treatment arm ``t``
    within covariate stratum ``x``; ``q_hat[(x, t)]`` is the mean outcome in
    the cell, present only where the cell is nonempty.
    """

    p_hat: dict
    q_hat: dict
    counts: dict


def _cell_arrays(sample: ScenarioSample):
    """Counts and outcome sums for the four (x, t) cells.

    Returns ``(counts, sums)`` indexed ``[x, t]``.  Cells are encoded as
    ``2 x + t`` so both reductions are single ``bincount`` passes.
    """
    cell = (2.0 * sample.aux + sample.t).astype(np.intp)
    counts = np.bincount(cell, minlength=4).reshape(2, 2)
    sums = np.bincount(cell, weights=sample.y, minlength=4).reshape(2, 2)
    return counts, sums


def empirical_strata(sample: ScenarioSample) -> StratumStats:
    """Empirical propensities and cell means of an observational sample.

    Degenerate strata (an observed ``x`` with one arm empty) are represented
    as-is here — ``p_hat`` can be 0 or 1 and the corresponding ``q_hat`` entry
    is absent.  Consumers that cannot tolerate the degeneracy raise lazily.
    """
    _require(sample, Scenario.OBSERVATIONAL)
    counts, sums = _cell_arrays(sample)
    p_hat, q_hat, count_map = {}, {}, {}
    for x in (0, 1):
        n_x = counts[x].sum()
        if n_x == 0:
            continue
        for t in (0, 1):
            p_hat[(x, t)] = counts[x, t] / n_x
            count_map[(x, t)] = int(counts[x, t])
            if counts[x, t] > 0:
                q_hat[(x, t)] = sums[x, t] / counts[x, t]
    return StratumStats(p_hat=p_hat, q_hat=q_hat, counts=count_map)


def _aipw_pair(sample: ScenarioSample) -> tuple[float, float]:
    """Mean-contrast and overlap-weighted contrast in one strata pass.

    Both estimators are augmented weighting estimators built from the
    empirical propensities and cell means.  With those fully saturated
    plug-in components the per-record weighting terms collapse algebraically
    to stratified cell contrasts:

        mean contrast    = sum_x  P(x) (q(x,1) - q(x,0))
        overlap contrast = sum_x  P(x) p(x)(1-p(x)) (q(x,1) - q(x,0))
                           / sum_x P(x) p(x)(1-p(x))

    where p(x) is the empirical treated share of stratum x (the off-arm
    augmentation weight is -1 regardless of the propensity, and the overlap
    weight p(1-p) is symmetric in the two arms, so nothing record-level
    survives).  The unit tests check this implementation against a direct
    record-level transcription of the weighting formulas.

    Raises :class:`EmptyStratum` when an observed stratum lacks one arm:
    both arms' cell means enter the augmentation for every record of that
    stratum, and no clipping is applied.
    """
    _require(sample, Scenario.OBSERVATIONAL)
    counts, sums = _cell_arrays(sample)
    n_x = counts.sum(axis=1)
    for x in (0, 1):
        if n_x[x] == 0:
            continue
        for t in (0, 1):
            if counts[x, t] == 0:
                raise EmptyStratum(x, t)

    observed = n_x > 0
    share = n_x[observed] / sample.n
    with np.errstate(invalid="ignore"):
        q_gap = (sums[:, 1] / counts[:, 1] - sums[:, 0] / counts[:, 0])[observed]
        p1 = (counts[:, 1] / n_x)[observed]
    ate = float(np.dot(share, q_gap))
    overlap_weights = share * p1 * (1.0 - p1)
    denominator = overlap_weights.sum()
    if denominator == 0.0:
        raise ZeroOverlapDenominator("all empirical propensities are 0 or 1")
    return ate, float(np.dot(overlap_weights, q_gap) / denominator)


def aipw_ate(sample: ScenarioSample) -> float:
    """Augmented inverse-probability-weighted mean treatment contrast."""
    return _aipw_pair(sample)[0]


def aipw_overlap(sample: ScenarioSample) -> float:
    """Augmented estimator of the overlap-weighted treatment contrast."""
    return _aipw_pair(sample)[1]


# -- iv-fusion design ----------------------------------------------------------


def _plugin_cov(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((a - a.mean()) * (b - b.mean())))


def iv_ratio(sample: ScenarioSample) -> float:
    """Instrument-based slope: Cov(i, y) / Cov(i, t) on complete records only."""
    _require(sample, Scenario.IV_FUSION)
    nc = sample.n_complete
    if nc < 2:
        raise DegenerateInstrument("need at least two instrument-bearing records")
    i = sample.aux[:nc]
    denom = _plugin_cov(i, sample.t[:nc])
    if denom == 0.0:
        raise DegenerateInstrument("empirical Cov(i, t) is exactly zero")
    return _plugin_cov(i, sample.y[:nc]) / denom


def ols_slope(sample: ScenarioSample) -> float:
    """Least-squares slope of y on t (intercept absorbed), over all records."""
    _require(sample, Scenario.IV_FUSION)
    t = sample.t
    var_t = _plugin_cov(t, t)
    if var_t == 0.0:
        raise DegenerateTreatment("empirical Var(t) is exactly zero")
    return _plugin_cov(t, sample.y) / var_t


# -- experimental / proxy design -----------------------------------------------


def diff_in_means(sample: ScenarioSample) -> float:
    """Mean outcome difference between treated and control arms."""
    if sample.scenario not in (Scenario.PROXY, Scenario.OBSERVATIONAL):
        raise ValueError(f"diff_in_means undefined for scenario {sample.scenario.value}")
    treated = sample.t == 1.0
    n1 = int(treated.sum())
    if n1 == 0 or n1 == sample.n:
        raise EmptyArm(f"treatment arm {int(n1 == 0)} is empty")
    y = sample.y
    return float(y[treated].mean() - y[~treated].mean())


def product_estimator(sample: ScenarioSample) -> float:
    """Treatment-on-proxy contrast times proxy-on-outcome contrast."""
    _require(sample, Scenario.PROXY)
    treated = sample.t == 1.0
    n1 = int(treated.sum())
    if n1 == 0 or n1 == sample.n:
        raise EmptyArm(f"treatment arm {int(n1 == 0)} is empty")
    p = sample.aux
    p1 = p == 1.0
    np1 = int(p1.sum())
    if np1 == 0 or np1 == sample.n:
        raise EmptyProxyGroup(f"proxy group {int(np1 == 0)} is empty")
    y = sample.y
    t_to_p = p[treated].mean() - p[~treated].mean()
    p_to_y = y[p1].mean() - y[~p1].mean()
    return float(t_to_p * p_to_y)


def _require(sample: ScenarioSample, scenario: Scenario) -> None:
    if sample.scenario is not scenario:
        raise ValueError(
            f"estimator defined for {scenario.value} samples, got {sample.scenario.value}"
        )


# -- candidate families ---------------------------------------------------------


@dataclass(frozen=True)
class CandidateFamily:
    """Ordered labelled estimators; index 0 is the designated baseline.

    ``batch_evaluator``, when present, evaluates all candidates in one pass
    and must agree with the per-candidate evaluators.  Families built by
    :func:`shrinkage_family` use it to share the two underlying estimator
    evaluations across the whole weight grid.
    """

    labels: tuple[str, ...]
    evaluators: tuple[Estimator, ...]
    baseline_index: int = 0
    batch_evaluator: Callable[[ScenarioSample], np.ndarray] | None = field(
        default=None, repr=False
    )

    def __post_init__(self):
        if len(self.labels) != len(self.evaluators):
            raise ValueError("labels and evaluators must align")
        if len(self.evaluators) < 1:
            raise ValueError("family needs at least the baseline estimator")
        if self.baseline_index != 0:
            raise ValueError("the baseline must sit at index 0")

    def __len__(self) -> int:
        return len(self.evaluators)

    def evaluate_all(self, sample) -> np.ndarray:
        if self.batch_evaluator is not None:
            return self.batch_evaluator(sample)
        return np.array([ev(sample) for ev in self.evaluators], dtype=np.float64)


def shrinkage_family(
    estimator_a: Estimator,
    estimator_b: Estimator,
    weights: Sequence[float],
    labels: Sequence[str] | None = None,
    pair_evaluator: Callable[[ScenarioSample], tuple[float, float]] | None = None,
) -> CandidateFamily:
    """Convex combinations ``(1 - w) a + w b`` over a sorted weight grid.

    Weight 0 must be present: it is the baseline, evaluating to
    ``estimator_a`` exactly.  ``pair_evaluator`` optionally computes both
    endpoint estimators in a single pass (used when they share intermediate
    statistics); the combination arithmetic is identical either way.
    """
    w = tuple(float(v) for v in weights)
    if any(not 0.0 <= v <= 1.0 for v in w):
        raise ValueError("weights must lie in [0, 1]")
    if list(w) != sorted(w):
        raise ValueError("weights must be sorted ascending")
    if 0.0 not in w:
        raise MissingBaseline("shrinkage grid must contain weight 0")
    if labels is None:
        labels = tuple(f"w={v:g}" for v in w)
    else:
        labels = tuple(labels)
        if len(labels) != len(w):
            raise ValueError("labels and weights must align")

    if pair_evaluator is None:
        def pair_evaluator(sample):  # noqa: F811 - deliberate default binding
            return estimator_a(sample), estimator_b(sample)

    def _combine(a: float, b: float, weight: float) -> float:
        if weight == 0.0:
            return a
        if weight == 1.0:
            return b
        return (1.0 - weight) * a + weight * b

    def make_evaluator(weight: float) -> Estimator:
        def evaluate(sample) -> float:
            a, b = pair_evaluator(sample)
            return _combine(a, b, weight)

        return evaluate

    w_arr = np.array(w)

    def batch(sample) -> np.ndarray:
        a, b = pair_evaluator(sample)
        out = (1.0 - w_arr) * a + w_arr * b
        out[w_arr == 0.0] = a
        out[w_arr == 1.0] = b
        return out

    return CandidateFamily(
        labels=labels,
        evaluators=tuple(make_evaluator(v) for v in w),
        batch_evaluator=batch,
    )


DEFAULT_WEIGHTS = tuple(i / 10 for i in range(11))
# Weight grids with the intermediate-only candidate set (baseline kept).
PRINTED_WEIGHTS = {
    Scenario.OBSERVATIONAL: tuple(i / 10 for i in range(10)),
    Scenario.IV_FUSION: DEFAULT_WEIGHTS,
    Scenario.PROXY: tuple(i / 10 for i in range(10)),
}


def scenario_family(
    scenario: Scenario,
    weights: Sequence[float] | None = None,
    as_printed_grid: bool = False,
) -> CandidateFamily:
    """The study's shrinkage family for a scenario.

    Baselines: mean-contrast AIPW (observational), instrument ratio
    (iv-fusion), difference-in-means (proxy).  Shrinkage targets: overlap
    AIPW, least-squares slope, product estimator respectively.
    """
    if weights is None:
        weights = PRINTED_WEIGHTS[scenario] if as_printed_grid else DEFAULT_WEIGHTS
    if scenario is Scenario.OBSERVATIONAL:
        return shrinkage_family(
            aipw_ate, aipw_overlap, weights, pair_evaluator=_aipw_pair
        )
    if scenario is Scenario.IV_FUSION:
        return shrinkage_family(iv_ratio, ols_slope, weights)
    return shrinkage_family(diff_in_means, product_estimator, weights)
