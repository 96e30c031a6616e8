"""Estimator-style front end for the reconstruction and mixture builders.

These wrap the functional pipeline in the fit/params idiom so they
compose with standard tooling (cloning, grid evaluation, pipelines).
The sample axis is the run record list; there is no target, so fit
accepts and ignores y.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .protocol import RunRecord
from .tomography import SelectionCriterion, fidelity_pure, reconstruct
from .analysis import certify, ensemble_state_from_preps

__all__ = ["StateTomography", "PreparationMixture"]


def _check_records(X):
    records = list(X)
    if not records:
        raise ValueError("X must be a non-empty sequence of run records")
    for i, rec in enumerate(records):
        if not isinstance(rec, RunRecord):
            raise TypeError(f"X[{i}] is not a RunRecord (got {type(rec).__name__})")
    return records


def _resolve_criterion(criterion) -> SelectionCriterion:
    if isinstance(criterion, SelectionCriterion):
        return criterion
    if isinstance(criterion, str):
        return SelectionCriterion.parse(criterion)
    raise TypeError(f"criterion must be a string or SelectionCriterion, got {type(criterion).__name__}")


class StateTomography(BaseEstimator):
    """Two-qubit state reconstruction as a fittable estimator.

    Parameters
    ----------
    stage : 'P' or 'R'
        Which tomography stage of the records to invert.
    criterion : str or SelectionCriterion
        Sub-ensemble selection, e.g. "q=PhiPlus".
    min_setting_counts : int
        Refuse to invert below this many counts per joint setting.
    force : bool
        Invert even with sparse settings.

    Attributes (after fit)
    ----------------------
    state_ : physical density matrix
    raw_state_ : pre-projection linear inversion estimate
    n_selected_ : selected run count
    correlators_, standard_errors_, aggregate_se_ : moment diagnostics
    """

    def __init__(self, stage="P", criterion="all", min_setting_counts=50, force=False):
        self.stage = stage
        self.criterion = criterion
        self.min_setting_counts = min_setting_counts
        self.force = force

    def fit(self, X, y=None):
        records = _check_records(X)
        result = reconstruct(
            records,
            self.stage,
            _resolve_criterion(self.criterion),
            min_setting_counts=self.min_setting_counts,
            force=self.force,
        )
        self.result_ = result
        self.state_ = result.physical
        self.raw_state_ = result.raw
        self.n_selected_ = result.n_selected
        self.correlators_ = result.correlators
        self.standard_errors_ = result.standard_errors
        self.aggregate_se_ = result.aggregate_se
        return self

    def fidelity(self, target):
        """<target| state_ |target> against a pure target ket."""
        check_is_fitted(self, "state_")
        return fidelity_pure(self.state_, target)

    def certification(self):
        """Entanglement certification of the fitted state."""
        check_is_fitted(self, "state_")
        return certify(self.state_, standard_error=self.aggregate_se_)


class PreparationMixture(BaseEstimator):
    """Label-built separable mixture of a selected sub-ensemble.

    Parameters
    ----------
    criterion : str or SelectionCriterion
        Sub-ensemble selection.
    config : ExperimentConfig
        The generating config; supplies the preparation bases that map
        recorded labels back to kets.

    Attributes (after fit)
    ----------------------
    state_ : the separable mixture
    weights_ : empirical label-pair weight table
    certification_ : PPT certification of state_
    """

    def __init__(self, criterion="all", config=None):
        self.criterion = criterion
        self.config = config

    def fit(self, X, y=None):
        if self.config is None:
            raise ValueError("PreparationMixture requires the generating config")
        records = _check_records(X)
        state, weights = ensemble_state_from_preps(
            records, _resolve_criterion(self.criterion), self.config
        )
        self.state_ = state
        self.weights_ = weights
        self.certification_ = certify(state)
        self.n_selected_ = sum(
            1 for rec in records if _resolve_criterion(self.criterion).matches(rec)
        )
        return self
