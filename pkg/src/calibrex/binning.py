"""Binning schemes, affectation mappings and the binned ECE family.

A binning scheme is a vector of right thresholds ``t_1 < ... < t_B = 1`` with
an implied left edge at 0. Bins are right-closed, ``(t_{j-1}, t_j]``, and a
score of exactly 0 belongs to the first bin.

An affectation mapping is the row-stochastic N x B weight matrix ``W``. It is
stored sparsely as two ``(N, 2)`` arrays (bin index, weight) since every
sample touches at most two bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CalibrationSetting, EceEstimate, ScoredEvents

ESTIMATOR_IDS = {
    ("uniform", "one_bin"): "ECE_l",
    ("adaptive", "one_bin"): "ECE_a",
    ("uniform", "convex"): "ECE_c",
    ("adaptive", "convex"): "ECE_ac",
}


@dataclass(frozen=True)
class BinningScheme:
    thresholds: np.ndarray
    kind: str
    requested_bins: int

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("a binning needs at least one threshold")
        if t[-1] != 1.0:
            raise ValueError("last threshold must be exactly 1")
        # t_1 = 0 is legal: the first bin then holds only exact zeros
        if np.any(np.diff(t) <= 0) or t[0] < 0:
            raise ValueError("thresholds must increase strictly within [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)

    @property
    def n_bins(self) -> int:
        return self.thresholds.size

    @property
    def edges(self) -> np.ndarray:
        """Left edge 0 followed by the thresholds."""
        return np.concatenate(([0.0], self.thresholds))

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def assign(self, scores) -> np.ndarray:
        """Index of the right-closed bin holding each score."""
        return np.searchsorted(self.thresholds, scores, side="left")


@dataclass(frozen=True)
class AffectationMapping:
    bins: np.ndarray
    weights: np.ndarray
    n_bins: int
    kind: str

    @property
    def n_samples(self) -> int:
        return self.bins.shape[0]

    def toarray(self) -> np.ndarray:
        dense = np.zeros((self.n_samples, self.n_bins))
        rows = np.repeat(np.arange(self.n_samples), 2)
        np.add.at(dense, (rows, self.bins.ravel()), self.weights.ravel())
        return dense

    def bin_sums(self, values) -> np.ndarray:
        """``W.T @ values`` without densifying, accumulated in extended precision."""
        v = np.asarray(values, dtype=np.longdouble)
        out = np.zeros(self.n_bins, dtype=np.longdouble)
        np.add.at(out, self.bins.ravel(), (self.weights.astype(np.longdouble) * v[:, None]).ravel())
        return out

    def mass(self) -> np.ndarray:
        return np.bincount(self.bins.ravel(), weights=self.weights.ravel(), minlength=self.n_bins)


@dataclass(frozen=True)
class DiagramPoints:
    mean_score: np.ndarray
    event_rate: np.ndarray
    weight_mass: np.ndarray
    empty: np.ndarray
    edges: np.ndarray


def _check_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(s)) or np.any(s < 0) or np.any(s > 1):
        raise ValueError("scores must lie in [0, 1]")
    return s


def build_uniform_binning(n_bins: int) -> BinningScheme:
    n_bins = int(n_bins)
    if n_bins < 1:
        raise ValueError("need at least one bin")
    return BinningScheme(np.arange(1, n_bins + 1) / n_bins, "uniform", n_bins)


def build_adaptive_binning(scores, n_bins: int) -> BinningScheme:
    """Equal-frequency binning.

    The right threshold of bin ``i < B`` is the midpoint of the sorted scores
    of ranks ``floor(i*N/B)`` and ``floor(i*N/B) + 1``. A threshold falling
    inside a run of tied scores separates nothing and is dropped, which merges
    the two bins it would have split.
    """
    s = np.sort(_check_scores(scores))
    n = s.size
    n_bins = int(n_bins)
    if n_bins < 1:
        raise ValueError("need at least one bin")
    if n_bins > n:
        raise ValueError(f"cannot split {n} scores into {n_bins} bins")
    ranks = (np.arange(1, n_bins) * n) // n_bins
    lo, hi = s[ranks - 1], s[ranks]
    keep = lo < hi
    cuts = 0.5 * (lo[keep] + hi[keep])
    cuts = np.unique(cuts[cuts < 1.0])
    return BinningScheme(np.append(cuts, 1.0), "adaptive", n_bins)


def build_one_bin_mapping(scores, binning: BinningScheme) -> AffectationMapping:
    s = _check_scores(scores)
    idx = binning.assign(s)
    bins = np.stack([idx, idx], axis=1)
    weights = np.zeros((s.size, 2))
    weights[:, 0] = 1.0
    return AffectationMapping(bins, weights, binning.n_bins, "one_bin")


def build_convex_mapping(scores, binning: BinningScheme) -> AffectationMapping:
    """Linear binning between neighbouring bin centres."""
    s = _check_scores(scores)
    c = binning.centers
    nb = c.size
    right = np.clip(np.searchsorted(c, s, side="right"), 1, max(nb - 1, 1))
    left = right - 1
    if nb == 1:
        bins = np.zeros((s.size, 2), dtype=np.intp)
        weights = np.zeros((s.size, 2))
        weights[:, 0] = 1.0
        return AffectationMapping(bins, weights, 1, "convex")
    frac = (s - c[left]) / (c[right] - c[left])
    frac = np.clip(frac, 0.0, 1.0)
    bins = np.stack([left, right], axis=1)
    weights = np.stack([1.0 - frac, frac], axis=1)
    return AffectationMapping(bins, weights, nb, "convex")


MAPPINGS = {"one_bin": build_one_bin_mapping, "convex": build_convex_mapping}


def build_binning(kind: str, scores, n_bins: int) -> BinningScheme:
    if kind == "uniform":
        return build_uniform_binning(n_bins)
    if kind == "adaptive":
        return build_adaptive_binning(scores, n_bins)
    raise ValueError(f"unknown binning {kind!r}")


def build_mapping(kind: str, scores, binning: BinningScheme) -> AffectationMapping:
    try:
        return MAPPINGS[kind](scores, binning)
    except KeyError:
        raise ValueError(f"unknown mapping {kind!r}") from None


def _deviations(events: ScoredEvents, mapping: AffectationMapping) -> np.ndarray:
    if len(events) != mapping.n_samples:
        raise ValueError(
            f"mapping built for {mapping.n_samples} samples, events have {len(events)}"
        )
    return mapping.bin_sums(events.hit.astype(np.longdouble) - events.score)


def _hyper(binning: BinningScheme | None, mapping: AffectationMapping) -> dict:
    h = {"bins": mapping.n_bins, "mapping": mapping.kind}
    if binning is not None:
        h["binning"] = binning.kind
        if binning.requested_bins != binning.n_bins:
            h["requested_bins"] = binning.requested_bins
    return h


def estimator_id(binning_kind: str, mapping_kind: str) -> str:
    return ESTIMATOR_IDS[(binning_kind, mapping_kind)]


def binned_ece(
    events: ScoredEvents,
    mapping: AffectationMapping,
    binning: BinningScheme | None = None,
    setting: CalibrationSetting | None = None,
) -> EceEstimate:
    """(1/N) * sum_j |sum_i W_ij (hit_i - score_i)|."""
    dev = _deviations(events, mapping)
    value = float(np.abs(dev).sum() / len(events))
    est_id = estimator_id(binning.kind if binning else "uniform", mapping.kind)
    return EceEstimate(value, est_id, setting or CalibrationSetting.class_specific(0),
                       _hyper(binning, mapping))


def binned_mce(
    events: ScoredEvents,
    mapping: AffectationMapping,
    binning: BinningScheme | None = None,
    setting: CalibrationSetting | None = None,
) -> EceEstimate:
    """Largest per-bin gap, each bin's deviation divided by its weight mass."""
    dev = _deviations(events, mapping)
    mass = mapping.mass()
    nonempty = mass > 0
    if not np.any(nonempty):
        raise ValueError("all bins are empty")
    value = float(np.max(np.abs(dev[nonempty]) / mass[nonempty]))
    est_id = "M" + estimator_id(binning.kind if binning else "uniform", mapping.kind)[1:]
    return EceEstimate(value, est_id, setting or CalibrationSetting.class_specific(0),
                       _hyper(binning, mapping))


def diagram_points(events: ScoredEvents, mapping: AffectationMapping,
                   binning: BinningScheme | None = None) -> DiagramPoints:
    if len(events) != mapping.n_samples:
        raise ValueError("mapping and events differ in length")
    mass = mapping.mass()
    empty = mass <= 0
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_score = np.where(empty, np.nan, (mapping.bin_sums(events.score) / mass).astype(float))
        event_rate = np.where(empty, np.nan, (mapping.bin_sums(events.hit) / mass).astype(float))
    edges = binning.edges if binning is not None else np.linspace(0, 1, mapping.n_bins + 1)
    return DiagramPoints(mean_score, event_rate, mass, empty, edges)


def sqrt_bin_heuristic(n_samples: int) -> int:
    """Bin count equal to the rounded square root of the sample size."""
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ValueError("sample size must be positive")
    # math.floor(x + 0.5) avoids banker's rounding at exact halves.
    return max(1, math.floor(math.sqrt(n_samples) + 0.5))


def resolve_bins(bins, n_samples: int) -> int:
    """Turn an int or ``"sqrt"`` into a bin count for ``n_samples`` scores."""
    if isinstance(bins, str):
        if bins.lower() != "sqrt":
            raise ValueError(f"unknown bin heuristic {bins!r}")
        return sqrt_bin_heuristic(n_samples)
    b = int(bins)
    if b < 1:
        raise ValueError("need at least one bin")
    return b


def binned_ece_events(events: ScoredEvents, n_bins, binning: str = "uniform",
                      mapping: str = "one_bin", setting: CalibrationSetting | None = None,
                      metric: str = "ece") -> EceEstimate:
    """Build binning and mapping for ``events`` and evaluate ECE or MCE."""
    b = resolve_bins(n_bins, len(events))
    if binning == "adaptive":
        b = min(b, len(events))
    scheme = build_binning(binning, events.score, b)
    weights = build_mapping(mapping, events.score, scheme)
    fn = binned_mce if metric == "mce" else binned_ece
    est = fn(events, weights, scheme, setting)
    if isinstance(n_bins, str):
        est.hyperparams["bins_policy"] = n_bins
    return est
