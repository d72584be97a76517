"""scikit-learn style front ends for the ECE estimators and reliability curves."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .binning import ESTIMATOR_IDS, binned_ece_events
from .core import (
    CalibrationSetting,
    EceEstimate,
    LabeledScores,
    ScoredEvents,
    estimate_in_setting,
    extract_events,
    validate,
)
from .density import (
    DEFAULT_GRID_POINTS,
    Grid,
    bootstrap_reliability,
    ece_d,
    estimate_lce,
    resolve_bandwidth,
)


class _ECEBase(BaseEstimator):
    """Shared fit/estimate plumbing.

    Subclasses implement ``estimate_events(events, setting)``. ``fit`` takes
    an N x C score matrix and integer labels and stores the result as
    ``estimate_`` (an :class:`EceEstimate`) and ``ece_`` (its value).
    """

    def fit(self, scores, labels):
        data = scores if isinstance(scores, LabeledScores) else validate(scores, labels)
        self.estimate_ = self.estimate_data(data)
        self.ece_ = self.estimate_.value
        self.n_classes_ = data.n_classes
        return self

    def estimate(self, scores, labels=None) -> EceEstimate:
        return self.fit(scores, labels).estimate_

    def estimate_data(self, data: LabeledScores, setting=None) -> EceEstimate:
        setting = CalibrationSetting.parse(setting if setting is not None else self.setting)
        if setting.kind == "class_specific" and setting.cls >= data.n_classes:
            raise ValueError(f"class {setting.cls} outside [0, {data.n_classes - 1}]")
        return estimate_in_setting(data, setting, self.estimate_events)

    def describe(self) -> str:
        """Compact hyperparameter policy, e.g. ``bins=sqrt``."""
        raise NotImplementedError


class BinnedECE(_ECEBase):
    """Binning-based ECE (or MCE) estimator.

    Parameters
    ----------
    n_bins : int or "sqrt", default=15
        Number of bins, or the square-root heuristic resolved per event set.
    binning : {"uniform", "adaptive"}
    mapping : {"one_bin", "convex"}
    setting : str or CalibrationSetting, default="confidence"
    metric : {"ece", "mce"}
    """

    def __init__(self, n_bins=15, binning="uniform", mapping="one_bin",
                 setting="confidence", metric="ece"):
        self.n_bins = n_bins
        self.binning = binning
        self.mapping = mapping
        self.setting = setting
        self.metric = metric

    @property
    def estimator_id(self) -> str:
        base = ESTIMATOR_IDS[(self.binning, self.mapping)]
        return "M" + base[1:] if self.metric == "mce" else base

    def estimate_events(self, events: ScoredEvents, setting=None) -> EceEstimate:
        return binned_ece_events(events, self.n_bins, self.binning, self.mapping,
                                 CalibrationSetting.parse(setting or self.setting), self.metric)

    def describe(self) -> str:
        return f"bins={self.n_bins}"


class DensityECE(_ECEBase):
    """Kernel-density ECE estimator (ECE_d).

    ``bandwidth`` is a positive float or ``"silverman"``; the rule is applied
    to each event set's scores and the same value is reused for the density
    of the hit scores.
    """

    def __init__(self, bandwidth="silverman", setting="confidence", n_grid=DEFAULT_GRID_POINTS):
        self.bandwidth = bandwidth
        self.setting = setting
        self.n_grid = n_grid

    estimator_id = "ECE_d"

    def _grid(self) -> Grid:
        grid = getattr(self, "_grid_cache", None)
        if grid is None or grid.n != self.n_grid:
            grid = Grid.uniform(self.n_grid)
            self._grid_cache = grid
        return grid

    def estimate_events(self, events: ScoredEvents, setting=None) -> EceEstimate:
        h = _bandwidth_for(self.bandwidth, events.score)
        est = ece_d(events, h, self._grid(), CalibrationSetting.parse(setting or self.setting))
        if isinstance(self.bandwidth, str):
            est.hyperparams["bandwidth_policy"] = self.bandwidth
        return est

    def describe(self) -> str:
        return f"bandwidth={self.bandwidth}"


def _bandwidth_for(policy, scores) -> float:
    # Silverman's rule is undefined for one score; any width then gives the same ratio.
    if isinstance(policy, str) and np.size(scores) < 2:
        return 0.01
    return resolve_bandwidth(policy, scores)


class ReliabilityCurveEstimator(TransformerMixin, BaseEstimator):
    """Continuous reliability curve ``rel(s) = P(hit | s)`` from KDEs.

    ``fit`` accepts either an N x C score matrix with labels (reduced with
    ``setting``, which must not be class-wise) or 1-d scores with binary
    hits. ``transform``/``predict`` map scores to their estimated event
    probability; with ``n_boot > 0`` the curve is the bootstrap median and
    ``predict_interval`` returns the percentile band.
    """

    def __init__(self, bandwidth="silverman", setting="confidence", n_boot=0,
                 band=(5.0, 95.0), n_grid=DEFAULT_GRID_POINTS, random_state=0):
        self.bandwidth = bandwidth
        self.setting = setting
        self.n_boot = n_boot
        self.band = band
        self.n_grid = n_grid
        self.random_state = random_state

    def _events(self, X, y) -> ScoredEvents:
        if isinstance(X, ScoredEvents):
            return X
        X_arr = np.asarray(X)
        if X_arr.ndim == 2 and X_arr.shape[1] > 1:
            return extract_events(validate(X_arr, y), CalibrationSetting.parse(self.setting))
        return ScoredEvents(X_arr.ravel(), np.asarray(y).ravel())

    def fit(self, X, y=None):
        events = self._events(X, y)
        grid = Grid.uniform(self.n_grid)
        self.bandwidth_ = _bandwidth_for(self.bandwidth, events.score)
        if self.n_boot:
            self.curve_ = bootstrap_reliability(events, self.bandwidth_, grid, int(self.n_boot),
                                                tuple(self.band), self.random_state)
        else:
            self.curve_ = estimate_lce(events, self.bandwidth_, grid)
        return self

    def transform(self, X):
        check_is_fitted(self, "curve_")
        return self.curve_(np.asarray(X, dtype=float))

    predict = transform

    def lce(self, X):
        X = np.asarray(X, dtype=float)
        return self.transform(X) - X

    def predict_interval(self, X):
        check_is_fitted(self, "curve_")
        if self.curve_.bands is None:
            raise ValueError("fit with n_boot > 0 to obtain intervals")
        lower, _, upper = self.curve_.bands
        pts = self.curve_.grid.points
        X = np.asarray(X, dtype=float)
        return np.interp(X, pts, lower), np.interp(X, pts, upper)


ESTIMATOR_ALIASES = {
    "legacy": ("uniform", "one_bin"),
    "ece_l": ("uniform", "one_bin"),
    "adaptive": ("adaptive", "one_bin"),
    "ece_a": ("adaptive", "one_bin"),
    "convex": ("uniform", "convex"),
    "ece_c": ("uniform", "convex"),
    "adaptive-convex": ("adaptive", "convex"),
    "adaptive_convex": ("adaptive", "convex"),
    "ece_ac": ("adaptive", "convex"),
}


def make_estimator(name: str, bins=15, bandwidth="silverman", setting="confidence", metric="ece"):
    """Build an estimator from a short name (``legacy``, ``ECE_c``, ``kde``...)."""
    key = name.strip().lower()
    if key in ("kde", "density", "ece_d"):
        if metric != "ece":
            raise ValueError("the density estimator only provides ECE")
        return DensityECE(bandwidth=bandwidth, setting=setting)
    try:
        binning, mapping = ESTIMATOR_ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown estimator {name!r}") from None
    return BinnedECE(n_bins=bins, binning=binning, mapping=mapping, setting=setting, metric=metric)
