"""Estimator-style front end for the selection pipeline.

:class:`TargetedSelector` follows the familiar estimator conventions —
hyperparameters in ``__init__`` stored verbatim, ``fit`` computing
trailing-underscore attributes, ``get_params`` / ``set_params`` for
composition with parameter-sweep tooling — so the procedure drops into the
wider ecosystem without adapters.  The data argument of ``fit`` is a
:class:`~targetsel.samples.ScenarioSample` rather than a feature matrix: the
candidates being selected among are whole-sample statistics, not per-row
predictions.
"""

from __future__ import annotations

import inspect
from dataclasses import replace

from ._rng import STAGE_FOLDS, stream
from .bootstrap import (
    DEFAULT_B_INTERVAL,
    DEFAULT_B_VARIANCE,
    ResamplePlan,
    _replicate_selections,
    percentile_interval,
    replicate_estimates,
    variances_from_replicates,
)
from .errors import FoldEvaluationError
from .estimators import CandidateFamily
from .samples import ScenarioSample
from .selection import (
    Criterion,
    cv_risk_all_with_redraw,
    evaluate_criteria,
    select,
)


def check_sample(sample) -> ScenarioSample:
    """Validate that ``sample`` is a usable scenario sample."""
    if not isinstance(sample, ScenarioSample):
        raise TypeError(
            f"expected a ScenarioSample, got {type(sample).__name__}; build one "
            "with ScenarioSample.observational / .iv_fusion / .proxy or read_sample_csv"
        )
    if sample.n < 1:
        raise ValueError("sample is empty")
    return sample


class TargetedSelector:
    """Select the risk-minimising candidate of a family on one sample.

    Parameters
    ----------
    family : CandidateFamily
        Labelled candidate estimators, baseline at index 0.
    n_bootstrap : int
        Replicates used for the variance terms when no interval is requested.
    criterion : {"modified", "cv"}
        Selection criterion; "cv" requires ``cv_folds``.
    cv_folds : int or None
        When set, the cross-validation column is computed with this many folds.
    ci_level : float or None
        When set, ``fit`` also forms the selection-aware bootstrap interval;
        the ``n_ci_bootstrap`` replicate grid then also supplies the variance
        terms (one grid drives everything, as in the shortcut procedure).
    n_ci_bootstrap : int
        Replicates for the interval grid.
    variance_term : {"var-g", "as-printed"}
        Final variance term of the per-replicate selection criterion.
    seed : int
        Master seed; all internal streams derive from it.

    Attributes (after ``fit``)
    --------------------------
    risk_table_ : RiskTable
    selection_ : SelectionResult
    best_index_, best_label_, estimate_ : selected candidate and its estimate
    confidence_interval_ : ConfidenceInterval, only when ``ci_level`` is set
    """

    def __init__(
        self,
        family: CandidateFamily | None = None,
        n_bootstrap: int = DEFAULT_B_VARIANCE,
        criterion: str = "modified",
        cv_folds: int | None = None,
        ci_level: float | None = None,
        n_ci_bootstrap: int = DEFAULT_B_INTERVAL,
        variance_term: str = "var-g",
        seed: int = 0,
    ):
        self.family = family
        self.n_bootstrap = n_bootstrap
        self.criterion = criterion
        self.cv_folds = cv_folds
        self.ci_level = ci_level
        self.n_ci_bootstrap = n_ci_bootstrap
        self.variance_term = variance_term
        self.seed = seed

    # -- parameter plumbing ---------------------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        signature = inspect.signature(cls.__init__)
        return [name for name in signature.parameters if name != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "TargetedSelector":
        valid = set(self._param_names())
        for name, value in params.items():
            if name not in valid:
                raise ValueError(f"invalid parameter {name!r} for TargetedSelector")
            setattr(self, name, value)
        return self

    # -- fitting ----------------------------------------------------------------

    def fit(self, sample: ScenarioSample) -> "TargetedSelector":
        sample = check_sample(sample)
        if self.family is None:
            raise ValueError("family must be set before fitting")
        criterion = Criterion(self.criterion)
        if criterion is Criterion.CV_RISK and self.cv_folds is None:
            raise ValueError("criterion='cv' requires cv_folds")

        b = self.n_ci_bootstrap if self.ci_level is not None else self.n_bootstrap
        plan = ResamplePlan(b=b, seed=self.seed)
        matrix = replicate_estimates(self.family, sample, plan)
        self.replicates_ = matrix
        variances = variances_from_replicates(matrix)
        table = evaluate_criteria(self.family, sample, variances)
        if self.cv_folds is not None:
            cv_values, _ = cv_risk_all_with_redraw(
                self.family,
                sample,
                self.cv_folds,
                lambda attempt: stream(self.seed, STAGE_FOLDS, attempt),
            )
            if cv_values is None:
                raise FoldEvaluationError(
                    self.cv_folds, "no fold plan makes every estimator computable"
                )
            table = replace(table, cv_risk=cv_values)
        self.risk_table_ = table
        self.variances_ = variances
        self.selection_ = select(self.risk_table_, criterion)
        self.best_index_ = self.selection_.selected_g
        self.best_label_ = self.selection_.selected_label
        self.estimate_ = self.selection_.estimate
        if self.ci_level is not None:
            picks = _replicate_selections(matrix, variances, self.variance_term)
            self.confidence_interval_ = percentile_interval(picks, self.ci_level)
        return self

    def predict(self, sample: ScenarioSample | None = None) -> float:
        """Apply the selected candidate (to a new sample, or return the fit value)."""
        if not hasattr(self, "selection_"):
            raise RuntimeError("fit the selector before calling predict")
        if sample is None:
            return self.estimate_
        return float(self.family.evaluators[self.best_index_](check_sample(sample)))

    def fit_predict(self, sample: ScenarioSample) -> float:
        return self.fit(sample).predict()
