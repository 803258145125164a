"""Nonparametric bootstrap: replicate grids, variance terms, intervals.

The replicate grid (``B`` resamples by ``G + 1`` candidates) is the single
source for every variance term and for the cheap selection-aware confidence
interval: the variance terms are computed once from the grid and held fixed,
so each replicate only costs one sweep of estimator evaluations instead of a
nested bootstrap.

Replicate ``b`` owns the random stream keyed ``(seed, b, attempt)`` — a
Philox generator whose 192-bit key packs the three components — so the grid
is a pure function of ``(family, sample, plan)`` no matter how replicate work
is scheduled.  A replicate on which some estimator is undefined (an empty
cell after resampling) is redrawn from a fresh stream, up to
:data:`MAX_REDRAWS` attempts; silently dropping such rows would shrink ``B``.

Iv-fusion samples are resampled per completeness stratum so both sub-dataset
sizes stay fixed, mirroring how the study designs hold them fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._rng import STAGE_INNER, derive_seed
from .errors import EstimatorError, ReplicateExhausted
from .estimators import CandidateFamily
from .samples import Scenario, ScenarioSample
from .selection import (
    Criterion,
    SelectionResult,
    VarianceEstimates,
    VarianceSource,
    argmin_with_tiebreak,
    evaluate_criteria,
    select,
)

MAX_REDRAWS = 100

DEFAULT_B_VARIANCE = 100
DEFAULT_B_INTERVAL = 1000

# Final variance term of the per-replicate selection criterion.  "var-g" uses
# the candidate's own variance (drop-in for the modified criterion, the
# default); "as-printed" uses the gap variance instead, kept for sensitivity
# analysis.
VARIANCE_TERM_CHOICES = ("var-g", "as-printed")


@dataclass(frozen=True)
class ResamplePlan:
    """How to draw ``b`` bootstrap resamples.

    Indices come from seeded streams unless ``explicit_indices`` is given, in
    which case entry ``b`` is used verbatim for replicate ``b`` (no redraws).
    """

    b: int
    seed: int = 0
    explicit_indices: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if self.b < 2:
            raise ValueError("need at least 2 replicates")
        if self.explicit_indices is not None:
            idx = tuple(np.asarray(i, dtype=np.intp) for i in self.explicit_indices)
            if len(idx) != self.b:
                raise ValueError("need one index list per replicate")
            object.__setattr__(self, "explicit_indices", idx)


@dataclass(frozen=True)
class ReplicateMatrix:
    """``values[b, g]`` is candidate ``g`` evaluated on resample ``b``."""

    values: np.ndarray
    family_labels: tuple[str, ...]
    plan: ResamplePlan
    redraws: int = 0


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie strictly between 0 and 1")
        if self.lower > self.upper:
            raise ValueError("interval bounds are out of order")

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _replicate_stream(seed: int, b: int, attempt: int) -> np.random.Generator:
    """The stream owned by replicate ``b`` (redraw ``attempt``) of plan ``seed``.

    The 128-bit Philox key packs ``(seed, b)``; redraw attempts start at
    disjoint 2**192-wide counter blocks of that keyed sequence.
    """
    if not 0 <= seed < 1 << 64:
        raise ValueError("plan seed must fit in 64 bits")
    return np.random.Generator(
        np.random.Philox(key=1 + seed + (b << 64), counter=attempt << 192)
    )


def draw_resample_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` indices drawn i.i.d. uniform on ``{0, ..., n-1}``."""
    if n < 1:
        raise ValueError("need at least one record")
    return rng.integers(0, n, size=n)


def _draw_replicate_indices(sample: ScenarioSample, rng: np.random.Generator) -> np.ndarray:
    if sample.scenario is Scenario.IV_FUSION:
        nc = sample.n_complete
        complete = draw_resample_indices(nc, rng) if nc else np.empty(0, dtype=np.intp)
        n_inc = sample.n - nc
        incomplete = (
            nc + draw_resample_indices(n_inc, rng) if n_inc else np.empty(0, dtype=np.intp)
        )
        return np.concatenate([complete, incomplete])
    return draw_resample_indices(sample.n, rng)


def replicate_estimates(
    family: CandidateFamily, sample: ScenarioSample, plan: ResamplePlan
) -> ReplicateMatrix:
    """Evaluate every candidate on every resample."""
    values = np.empty((plan.b, len(family)))
    redraws = 0
    for b in range(plan.b):
        if plan.explicit_indices is not None:
            values[b] = family.evaluate_all(sample.take(plan.explicit_indices[b]))
            if not np.isfinite(values[b]).all():
                raise EstimatorError(f"non-finite estimate on explicit replicate {b}")
            continue
        for attempt in range(MAX_REDRAWS):
            rng = _replicate_stream(plan.seed, b, attempt)
            try:
                row = family.evaluate_all(sample.take(_draw_replicate_indices(sample, rng)))
            except EstimatorError:
                redraws += 1
                continue
            if np.isfinite(row).all():
                values[b] = row
                break
            redraws += 1
        else:
            raise ReplicateExhausted(
                f"replicate {b} failed {MAX_REDRAWS} consecutive draws"
            )
    return ReplicateMatrix(
        values=values, family_labels=family.labels, plan=plan, redraws=redraws
    )


def variances_from_replicates(matrix: ReplicateMatrix) -> VarianceEstimates:
    """Replicate-based variance terms with the usual 1/(B-1) normalisation."""
    values = matrix.values
    if values.shape[0] < 2:
        raise ValueError("need at least 2 replicates")
    var_g = values.var(axis=0, ddof=1)
    diffs = values[:, :1] - values
    var_diff = diffs.var(axis=0, ddof=1)
    var_diff[0] = 0.0
    return VarianceEstimates(
        var_diff=var_diff, var_g=var_g, source=VarianceSource.BOOTSTRAP
    )


def percentile_interval(values: Sequence[float], level: float) -> ConfidenceInterval:
    """Empirical quantile interval via ceiling-rank order statistics.

    Rank ``ceil(q B)`` (1-based, clamped to ``[1, B]``), no interpolation:
    exactly reproducible across platforms.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie strictly between 0 and 1")
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    n = len(ordered)
    if n < 2:
        raise ValueError("need at least 2 values")

    def rank(q: float) -> int:
        return min(max(math.ceil(q * n), 1), n)

    lower = ordered[rank((1.0 - level) / 2.0) - 1]
    upper = ordered[rank((1.0 + level) / 2.0) - 1]
    return ConfidenceInterval(lower=float(lower), upper=float(upper), level=level)


def _replicate_selections(
    matrix: ReplicateMatrix, variances: VarianceEstimates, variance_term: str
) -> np.ndarray:
    """Selected estimate per replicate, variance terms held fixed."""
    if variance_term not in VARIANCE_TERM_CHOICES:
        raise ValueError(f"variance_term must be one of {VARIANCE_TERM_CHOICES}")
    values = matrix.values
    diff_sq = (values - values[:, :1]) ** 2
    tail = variances.var_g if variance_term == "var-g" else variances.var_diff
    crit = np.maximum(diff_sq - variances.var_diff, 0.0) + tail
    picks = np.empty(values.shape[0], dtype=np.intp)
    for b in range(values.shape[0]):
        picks[b] = argmin_with_tiebreak(crit[b], diff_sq[b])
    return values[np.arange(values.shape[0]), picks]


def select_ci_shortcut(
    family: CandidateFamily,
    sample: ScenarioSample,
    plan: ResamplePlan,
    level: float,
    variance_term: str = "var-g",
) -> tuple[SelectionResult, ConfidenceInterval]:
    """Selection on the original sample plus a selection-aware interval.

    One replicate grid feeds everything: the variance terms (fixed across
    replicates), the modified-risk selection on the original sample, and the
    per-replicate re-selection whose estimates form the percentile interval.
    """
    matrix = replicate_estimates(family, sample, plan)
    variances = variances_from_replicates(matrix)
    table = evaluate_criteria(family, sample, variances)
    result = select(table, Criterion.MODIFIED_RISK)
    estimates = _replicate_selections(matrix, variances, variance_term)
    return result, percentile_interval(estimates, level)


def select_ci_full(
    family: CandidateFamily,
    sample: ScenarioSample,
    plan: ResamplePlan,
    inner_plan: ResamplePlan,
    level: float,
) -> ConfidenceInterval:
    """Interval from re-running the whole pipeline inside every replicate.

    Each outer resample gets its own inner bootstrap for the variance terms
    (cost ``B * B_inner`` estimator sweeps); only ``inner_plan.b`` is used,
    inner seeds being derived per outer replicate.  The cheap alternative is
    :func:`select_ci_shortcut`; the variance terms' own uncertainty it
    ignores is asymptotically negligible.
    """
    estimates = np.empty(plan.b)
    for b in range(plan.b):
        for attempt in range(MAX_REDRAWS):
            if plan.explicit_indices is not None:
                idx = plan.explicit_indices[b]
            else:
                idx = _draw_replicate_indices(sample, _replicate_stream(plan.seed, b, attempt))
            inner = ResamplePlan(
                b=inner_plan.b,
                seed=derive_seed(plan.seed, STAGE_INNER, b, attempt),
            )
            try:
                resample = sample.take(idx)
                variances = variances_from_replicates(
                    replicate_estimates(family, resample, inner)
                )
                table = evaluate_criteria(family, resample, variances)
            except (EstimatorError, ReplicateExhausted):
                if plan.explicit_indices is not None:
                    raise
                continue
            estimates[b] = select(table, Criterion.MODIFIED_RISK).estimate
            break
        else:
            raise ReplicateExhausted(
                f"outer replicate {b} failed {MAX_REDRAWS} consecutive draws"
            )
    return percentile_interval(estimates, level)
