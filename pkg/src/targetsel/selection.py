"""Risk criteria and the selection rule.

Candidate ``g`` is scored against the baseline (index 0) by

* ``raw_risk``      — squared gap, debiased by the estimated variance of the
  gap, plus the candidate's estimated variance.  Approximately unbiased for
  the candidate's mean-squared error; can be negative.
* ``modified_risk`` — same with the debiased squared-bias term clipped at
  zero, which costs the unbiasedness but never scores a candidate below its
  own variance.
* ``cv_risk``       — the K-fold sample-splitting competitor: mean squared gap
  between the candidate fitted on each training part and the baseline on the
  corresponding held-out fold.

Selection minimises one criterion; exact ties are broken by the smallest
squared gap to the baseline, and any remaining ties by the smallest index
(favouring the baseline).  Ties use strict float equality — criterion values
are Monte Carlo noisy themselves, so snapping near-ties to an epsilon would
be arbitrary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EstimatorError, FoldEvaluationError, TooFewRecords
from .estimators import CandidateFamily
from .samples import Scenario, ScenarioSample

DEFAULT_FOLDS = 10


class VarianceSource(enum.Enum):
    BOOTSTRAP = "bootstrap"
    INJECTED = "injected"


class Criterion(enum.Enum):
    MODIFIED_RISK = "modified"
    CV_RISK = "cv"


@dataclass(frozen=True)
class VarianceEstimates:
    """Variance terms entering the risk criteria, indexed like the family.

    ``var_diff[g]`` estimates Var(candidate g − baseline); ``var_g[g]``
    estimates Var(candidate g).
    """

    var_diff: np.ndarray
    var_g: np.ndarray
    source: VarianceSource

    def __post_init__(self):
        vd = np.asarray(self.var_diff, dtype=np.float64)
        vg = np.asarray(self.var_g, dtype=np.float64)
        object.__setattr__(self, "var_diff", vd)
        object.__setattr__(self, "var_g", vg)
        if vd.shape != vg.shape or vd.ndim != 1:
            raise ValueError("variance vectors must be 1-d and aligned")
        if vd[0] != 0.0:
            raise ValueError("var_diff[0] must be exactly 0")
        if not (np.isfinite(vd).all() and np.isfinite(vg).all()):
            raise ValueError("variance estimates must be finite")
        if (vd < 0).any() or (vg < 0).any():
            raise ValueError("variance estimates must be nonnegative")


def raw_risk(diff_sq: float, var_diff: float, var_g: float) -> float:
    """Debiased squared gap plus candidate variance; may be negative."""
    return diff_sq - var_diff + var_g


def modified_risk(diff_sq: float, var_diff: float, var_g: float) -> float:
    """Positive-part debiased squared gap plus candidate variance."""
    return max(diff_sq - var_diff, 0.0) + var_g


# -- fold plans and the cross-validation criterion ----------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of each record to one of ``k`` folds."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "assignment", np.asarray(self.assignment, dtype=np.intp)
        )
        sizes = np.bincount(self.assignment, minlength=self.k)
        if len(sizes) > self.k or (sizes == 0).any():
            raise ValueError("every fold must be nonempty")


def _balanced_assignment(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    assignment = np.empty(n, dtype=np.intp)
    assignment[rng.permutation(n)] = np.arange(n) % k
    return assignment


def make_folds(sample: ScenarioSample, k: int, rng: np.random.Generator) -> FoldPlan:
    """Uniformly random fold assignment with sizes balanced within one.

    Iv-fusion samples are stratified by completeness: the complete and
    incomplete sub-datasets are assigned separately, so every fold keeps
    their ratio within one record.
    """
    if k < 2:
        raise ValueError("need at least 2 folds")
    if sample.scenario is Scenario.IV_FUSION:
        nc = sample.n_complete
        strata = [(0, nc), (nc, sample.n)]
    else:
        strata = [(0, sample.n)]
    assignment = np.empty(sample.n, dtype=np.intp)
    for lo, hi in strata:
        if hi - lo < k:
            raise TooFewRecords(
                f"stratum of size {hi - lo} cannot fill {k} nonempty folds"
            )
        assignment[lo:hi] = _balanced_assignment(hi - lo, k, rng)
    return FoldPlan(k=k, assignment=assignment)


def _cv_fold_terms(family, g_list, sample, folds):
    """Per-fold squared gaps for the requested candidates (all when ``None``).

    The held-out baseline is evaluated before the training candidates: it
    sits on the small fold and is the usual failure point, so bad fold plans
    are rejected cheaply.
    """
    width = len(family) if g_list is None else len(g_list)
    terms = np.empty((folds.k, width))
    baseline = family.evaluators[0]
    for k in range(folds.k):
        held = folds.assignment == k
        try:
            theta0_held = baseline(sample.take(np.flatnonzero(held)))
            training = sample.take(np.flatnonzero(~held))
            if g_list is None:
                theta_train = family.evaluate_all(training)
            else:
                theta_train = np.array(
                    [family.evaluators[g](training) for g in g_list]
                )
        except EstimatorError as err:
            raise FoldEvaluationError(k, err) from err
        terms[k] = (theta_train - theta0_held) ** 2
    return terms


def cv_risk(
    family: CandidateFamily, g: int, sample: ScenarioSample, folds: FoldPlan
) -> float:
    """K-fold criterion for one candidate (fold order fixed for reproducibility)."""
    terms = _cv_fold_terms(family, [g], sample, folds)
    return float(terms[:, 0].mean())


def cv_risk_all(
    family: CandidateFamily, sample: ScenarioSample, folds: FoldPlan
) -> np.ndarray:
    """K-fold criterion for every candidate, sharing fold evaluations."""
    return _cv_fold_terms(family, None, sample, folds).mean(axis=0)


MAX_FOLD_REDRAWS = 1000


def cv_risk_all_with_redraw(
    family: CandidateFamily,
    sample: ScenarioSample,
    k: int,
    stream_for_attempt,
    max_attempts: int = MAX_FOLD_REDRAWS,
):
    """CV column under fold-plan redraws; ``(None, redraws)`` when impossible.

    A random plan can leave some held-out fold without the records an
    estimator needs (a rare treatment cell, say): the plan — not the caller's
    run — is redrawn from ``stream_for_attempt(attempt)``.  When the rare
    cell holds fewer records than folds no plan works at all, and ``None``
    signals that the criterion is incomputable on this sample.
    """
    redraws = 0
    for attempt in range(max_attempts):
        folds = make_folds(sample, k, stream_for_attempt(attempt))
        try:
            return cv_risk_all(family, sample, folds), redraws
        except EstimatorError:
            redraws += 1
    return None, redraws


# -- assembled risk table and selection ---------------------------------------


@dataclass(frozen=True)
class RiskTable:
    """Point estimates and every risk column for one candidate family."""

    labels: tuple[str, ...]
    estimates: np.ndarray
    diff_sq: np.ndarray
    var_diff: np.ndarray
    var_g: np.ndarray
    raw_risk: np.ndarray
    mod_risk: np.ndarray
    cv_risk: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.labels)


def evaluate_criteria(
    family: CandidateFamily,
    sample: ScenarioSample,
    variances: VarianceEstimates,
    folds: FoldPlan | None = None,
) -> RiskTable:
    """Populate a :class:`RiskTable`; the CV column is present iff folds are given."""
    estimates = family.evaluate_all(sample)
    if len(estimates) != len(variances.var_g):
        raise ValueError("variance estimates are not aligned with the family")
    diff_sq = (estimates - estimates[0]) ** 2
    raw = diff_sq - variances.var_diff + variances.var_g
    mod = np.maximum(diff_sq - variances.var_diff, 0.0) + variances.var_g
    cv = cv_risk_all(family, sample, folds) if folds is not None else None
    return RiskTable(
        labels=family.labels,
        estimates=estimates,
        diff_sq=diff_sq,
        var_diff=variances.var_diff,
        var_g=variances.var_g,
        raw_risk=raw,
        mod_risk=mod,
        cv_risk=cv,
    )


@dataclass(frozen=True)
class SelectionResult:
    selected_g: int
    selected_label: str
    estimate: float
    criterion: Criterion
    table: RiskTable


def argmin_with_tiebreak(values: np.ndarray, diff_sq: np.ndarray) -> int:
    """Index of the smallest value; exact ties resolved by diff_sq, then index."""
    candidates = np.flatnonzero(values == values.min())
    if len(candidates) > 1:
        sub = diff_sq[candidates]
        candidates = candidates[sub == sub.min()]
    return int(candidates[0])


def select(table: RiskTable, criterion: Criterion = Criterion.MODIFIED_RISK) -> SelectionResult:
    if criterion is Criterion.MODIFIED_RISK:
        values = table.mod_risk
    elif criterion is Criterion.CV_RISK:
        if table.cv_risk is None:
            raise ValueError("table has no cv_risk column; pass folds when building it")
        values = table.cv_risk
    else:
        raise ValueError(f"unknown criterion {criterion}")
    g = argmin_with_tiebreak(values, table.diff_sq)
    return SelectionResult(
        selected_g=g,
        selected_label=table.labels[g],
        estimate=float(table.estimates[g]),
        criterion=criterion,
        table=table,
    )


RISK_TABLE_COLUMNS = (
    "g",
    "label",
    "estimate",
    "diff_sq",
    "var_diff",
    "var_g",
    "raw_risk",
    "mod_risk",
    "cv_risk",
    "selected",
)


def risk_table_rows(table: RiskTable, selected_g: int | None = None):
    """Rows for CSV serialisation (``cv_risk`` cell empty when not computed)."""
    rows = []
    for g in range(len(table)):
        rows.append(
            (
                g,
                table.labels[g],
                float(table.estimates[g]),
                float(table.diff_sq[g]),
                float(table.var_diff[g]),
                float(table.var_g[g]),
                float(table.raw_risk[g]),
                float(table.mod_risk[g]),
                float(table.cv_risk[g]) if table.cv_risk is not None else None,
                int(g == selected_g) if selected_g is not None else 0,
            )
        )
    return rows
