"""Domain types and reduction of score matrices to per-setting events."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

ROW_SUM_TOL = 1e-6


class CalibrationDataError(ValueError):
    """Raised when scores or labels violate the input contract."""


@dataclass(frozen=True)
class LabeledScores:
    """An N x C score matrix living on the probability simplex plus labels."""

    scores: np.ndarray
    labels: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def take(self, indices) -> "LabeledScores":
        """Row subset, used for resampling; skips revalidation."""
        return LabeledScores(self.scores[indices], self.labels[indices])


@dataclass(frozen=True)
class ScoredEvents:
    """One-dimensional (score, hit) pairs for a single calibration question."""

    score: np.ndarray
    hit: np.ndarray

    def __post_init__(self):
        score = np.asarray(self.score, dtype=float).ravel()
        hit = np.asarray(self.hit, dtype=float).ravel()
        if score.shape != hit.shape:
            raise CalibrationDataError(
                f"score and hit lengths differ: {score.size} != {hit.size}"
            )
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "hit", hit)

    @property
    def class_prior(self) -> float:
        return float(self.hit.mean()) if self.hit.size else float("nan")

    def __len__(self) -> int:
        return self.score.size

    def take(self, indices) -> "ScoredEvents":
        return ScoredEvents(self.score[indices], self.hit[indices])


@dataclass(frozen=True)
class CalibrationSetting:
    """Which calibration question is asked of the scores.

    ``kind`` is one of ``"class_specific"``, ``"class_wise"`` or
    ``"confidence"``; ``cls`` is only set for the class-specific kind.
    """

    kind: str
    cls: int | None = None

    def __post_init__(self):
        if self.kind not in ("class_specific", "class_wise", "confidence"):
            raise ValueError(f"unknown calibration setting {self.kind!r}")
        if self.kind == "class_specific":
            if self.cls is None or int(self.cls) < 0:
                raise ValueError("class_specific setting needs a class index >= 0")
        elif self.cls is not None:
            raise ValueError(f"{self.kind} setting takes no class index")

    @classmethod
    def confidence(cls) -> "CalibrationSetting":
        return cls("confidence")

    @classmethod
    def class_wise(cls) -> "CalibrationSetting":
        return cls("class_wise")

    @classmethod
    def class_specific(cls, c: int) -> "CalibrationSetting":
        return cls("class_specific", int(c))

    @classmethod
    def parse(cls, text: "str | CalibrationSetting") -> "CalibrationSetting":
        """Parse ``confidence``, ``class_wise``/``classwise`` or ``class:<c>``."""
        if isinstance(text, CalibrationSetting):
            return text
        t = str(text).strip().lower().replace("-", "_")
        if t in ("confidence", "conf"):
            return cls.confidence()
        if t in ("class_wise", "classwise", "cw"):
            return cls.class_wise()
        for prefix in ("class_specific:", "class:"):
            if t.startswith(prefix):
                try:
                    return cls.class_specific(int(t[len(prefix):]))
                except ValueError:
                    break
        raise ValueError(
            f"cannot parse setting {text!r}; expected confidence, class_wise or class:<c>"
        )

    def __str__(self) -> str:
        if self.kind == "class_specific":
            return f"class:{self.cls}"
        return self.kind


@dataclass(frozen=True)
class EceEstimate:
    """A calibration-error value together with how it was obtained."""

    value: float
    estimator_id: str
    setting: CalibrationSetting
    hyperparams: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"calibration error must be finite and >= 0, got {v}")
        # Guard against rounding nudging a bounded quantity past 1.
        object.__setattr__(self, "value", min(v, 1.0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimator": self.estimator_id,
            "setting": str(self.setting),
            "hyperparams": dict(self.hyperparams),
            "value": self.value,
        }


def validate(raw_scores, labels) -> LabeledScores:
    """Check and normalise a score matrix and its labels.

    Rows whose sum is within ``ROW_SUM_TOL`` of one are renormalised; larger
    deviations, NaN/Inf entries, negative scores and out-of-range labels raise
    :class:`CalibrationDataError`.
    """
    try:
        scores = check_array(raw_scores, dtype=np.float64, ensure_all_finite=True)
    except ValueError as exc:
        raise CalibrationDataError(str(exc)) from exc
    labels_arr = np.asarray(labels)
    if labels_arr.ndim != 1:
        raise CalibrationDataError("labels must be a 1-d vector")
    try:
        check_consistent_length(scores, labels_arr)
    except ValueError as exc:
        raise CalibrationDataError(str(exc)) from exc
    n, c = scores.shape
    if c < 2:
        raise CalibrationDataError(f"need at least 2 classes, got {c}")
    if labels_arr.dtype.kind == "f":
        if not np.all(np.isfinite(labels_arr)) or np.any(labels_arr != np.round(labels_arr)):
            raise CalibrationDataError("labels must be integers")
    elif labels_arr.dtype.kind not in "iu":
        raise CalibrationDataError("labels must be integers")
    labels_arr = labels_arr.astype(np.int64)
    if np.any(labels_arr < 0) or np.any(labels_arr >= c):
        bad = labels_arr[(labels_arr < 0) | (labels_arr >= c)][0]
        raise CalibrationDataError(f"label {bad} outside [0, {c - 1}]")
    if np.any(scores < 0) or np.any(scores > 1):
        raise CalibrationDataError("scores must lie in [0, 1]")
    sums = scores.sum(axis=1)
    dev = np.abs(sums - 1.0)
    if np.any(dev > ROW_SUM_TOL):
        i = int(np.argmax(dev))
        raise CalibrationDataError(f"row {i} sums to {sums[i]:.9g}, not 1")
    scores = scores / sums[:, None]
    scores.setflags(write=False)
    labels_arr.setflags(write=False)
    return LabeledScores(scores, labels_arr)


def extract_events(data: LabeledScores, setting: CalibrationSetting) -> ScoredEvents:
    """Reduce a score matrix to the (score, hit) pairs of one setting.

    The class-wise setting is an average of class-specific ones and cannot be
    expressed as a single event set; iterate over the classes instead.
    """
    if setting.kind == "class_wise":
        raise ValueError(
            "class_wise is not a single event set; evaluate class_specific(c) "
            "for every class and combine with aggregate_classwise"
        )
    if setting.kind == "class_specific":
        c = setting.cls
        if c >= data.n_classes:
            raise ValueError(f"class {c} outside [0, {data.n_classes - 1}]")
        return ScoredEvents(data.scores[:, c], data.labels == c)
    # np.argmax returns the first maximum, i.e. ties go to the lowest index.
    pred = np.argmax(data.scores, axis=1)
    conf = data.scores[np.arange(data.n_samples), pred]
    return ScoredEvents(conf, data.labels == pred)


def aggregate_classwise(per_class: Sequence[EceEstimate]) -> EceEstimate:
    """Average class-specific estimates into the class-wise value."""
    if len(per_class) == 0:
        raise ValueError("no per-class estimates to aggregate")
    ids = {e.estimator_id for e in per_class}
    if len(ids) != 1:
        raise ValueError(f"mixed estimator ids: {sorted(ids)}")
    value = float(np.mean([e.value for e in per_class]))
    hyper = dict(per_class[0].hyperparams)
    # Heuristic resolutions may differ per class; keep them all.
    for key in hyper:
        vals = [e.hyperparams.get(key) for e in per_class]
        if any(v != vals[0] for v in vals):
            hyper[key] = vals
    return EceEstimate(value, ids.pop(), CalibrationSetting.class_wise(), hyper)


def per_setting_events(data: LabeledScores, setting: CalibrationSetting) -> list[ScoredEvents]:
    """Event sets whose estimates must be averaged to answer ``setting``."""
    if setting.kind == "class_wise":
        return [
            extract_events(data, CalibrationSetting.class_specific(c))
            for c in range(data.n_classes)
        ]
    return [extract_events(data, setting)]


def estimate_in_setting(data: LabeledScores, setting: CalibrationSetting, estimate_events) -> EceEstimate:
    """Apply an events -> EceEstimate callable in any setting.

    ``estimate_events(events, setting)`` is called once per event set; the
    class-wise setting averages the class-specific results.
    """
    if setting.kind == "class_wise":
        per_class = [
            estimate_events(ev, CalibrationSetting.class_specific(c))
            for c, ev in enumerate(per_setting_events(data, setting))
        ]
        return aggregate_classwise(per_class)
    return estimate_events(extract_events(data, setting), setting)
