"""CSV readers and writers for scores, datasets, curves and diagrams."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .binning import DiagramPoints
from .core import CalibrationDataError, LabeledScores, validate
from .density import ReliabilityCurve


def _fmt(x) -> str:
    return repr(float(x))


def read_scores_csv(path) -> LabeledScores:
    """Read ``s_0,...,s_{C-1},label`` rows into validated scores."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except (OSError, UnicodeDecodeError) as exc:
        raise CalibrationDataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise CalibrationDataError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    c = len(header) - 1
    expected = [f"s_{j}" for j in range(c)] + ["label"]
    if header != expected:
        raise CalibrationDataError(
            f"bad header {header!r}; expected s_0,...,s_{{C-1}},label")
    body = rows[1:]
    if not body:
        raise CalibrationDataError(f"{path} has no data rows")
    try:
        scores = np.array([[float(v) for v in r[:c]] for r in body])
        labels = np.array([int(r[c]) for r in body])
    except (ValueError, IndexError) as exc:
        raise CalibrationDataError(f"malformed row in {path}: {exc}") from exc
    if any(len(r) != c + 1 for r in body):
        raise CalibrationDataError(f"ragged rows in {path}")
    return validate(scores, labels)


def write_scores_csv(path, scores, labels) -> None:
    scores = np.asarray(scores)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"s_{j}" for j in range(scores.shape[1])] + ["label"])
        for row, y in zip(scores, labels):
            w.writerow([_fmt(v) for v in row] + [int(y)])


def write_dataset_csv(path, features, labels) -> None:
    features = np.asarray(features)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x_{j}" for j in range(features.shape[1])] + ["label"])
        for row, y in zip(features, labels):
            w.writerow([_fmt(v) for v in row] + [int(y)])


def read_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    x = np.column_stack([data[n] for n in names[:-1]])
    return x, data[names[-1]].astype(int)


def write_curve_csv(path, curve: ReliabilityCurve, every: int = 1, comments=()) -> None:
    """Columns ``s,lce,rel[,band_low,band_high]``; bands only when bootstrapped."""
    idx = np.arange(0, curve.grid.n, max(1, int(every)))
    if idx[-1] != curve.grid.n - 1:
        idx = np.append(idx, curve.grid.n - 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        cols = ["s", "lce", "rel"]
        if curve.bands is not None:
            cols += ["band_low", "band_high"]
        w.writerow(cols)
        for i in idx:
            row = [curve.grid.points[i], curve.lce[i], curve.rel[i]]
            if curve.bands is not None:
                row += [curve.bands[0][i], curve.bands[2][i]]
            w.writerow([_fmt(v) for v in row])


def write_diagram_csv(path, points: DiagramPoints, comments=()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "left", "right", "mean_score", "event_rate", "weight_mass", "empty"])
        for j in range(points.weight_mass.size):
            w.writerow([j, _fmt(points.edges[j]), _fmt(points.edges[j + 1]),
                        "" if points.empty[j] else _fmt(points.mean_score[j]),
                        "" if points.empty[j] else _fmt(points.event_rate[j]),
                        _fmt(points.weight_mass[j]), int(points.empty[j])])


def read_table(path) -> tuple[list[str], list[dict[str, str]]]:
    """Comment lines and data rows of a CSV written by this module."""
    comments, lines = [], []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        (comments if line.startswith("#") else lines).append(line)
    return [c[1:].strip() for c in comments], list(csv.DictReader(lines))
