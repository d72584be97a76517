"""Synthetic ground-truth benchmark for ECE estimators.

Each *cell* is one score distribution: a mixture spec, a model type and a
train split. For a cell we train the model, score the holdout, compute the
reference ECE with a fine legacy estimator, then draw bootstrap evaluation
sets of several sizes from the holdout and record, per estimator, the chosen
percentile of the relative approximation error. The report holds the median
of those percentiles across cells.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .binning import sqrt_bin_heuristic
from .core import CalibrationSetting, LabeledScores, estimate_in_setting, validate
from .estimators import BinnedECE, DensityECE, make_estimator
from .scorers import make_scorer
from .synth import MixtureSpec, sample_dataset, sample_mixture_spec

log = logging.getLogger(__name__)

REPORT_HEADER = ["setting", "estimator", "hyperparams", "eval_size", "median_p95_error", "n_distributions"]


@dataclass
class BenchConfig:
    n_classes: list[int] = field(default_factory=lambda: [2, 5])
    dims: list[int] = field(default_factory=lambda: [2, 5])
    specs_per_combination: int = 2
    modes_per_class: int = 4
    models: list[dict] = field(default_factory=lambda: [
        {"kind": "logistic_regression"},
        {"kind": "distorted_posterior", "temperature": 2.0},
    ])
    train_size: int = 300
    train_splits: int = 2
    holdout_size: int = 200_000
    truth_bins: int = 500
    eval_sizes: list[int] = field(default_factory=lambda: [30, 75, 200, 500])
    n_boot_eval: int = 100
    error_percentile: float = 95.0
    estimators: list[dict] = field(default_factory=lambda: [
        {"estimator": name, "bins": bins}
        for name in ("ECE_l", "ECE_a", "ECE_c", "ECE_ac") for bins in (15, "sqrt")
    ] + [{"estimator": "ECE_d", "bandwidth": "silverman"}])
    settings: list[str] = field(default_factory=lambda: ["confidence", "class_wise"])
    seed: int = 0
    n_grid: int = 4096

    def __post_init__(self):
        self.validate()

    def validate(self):
        sizes = list(self.eval_sizes)
        if not sizes or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("eval_sizes must be strictly increasing")
        if not 0 < self.error_percentile < 100:
            raise ValueError("error_percentile must lie in (0, 100)")
        tested = [sqrt_bin_heuristic(max(sizes))]
        tested += [int(e["bins"]) for e in self.estimators
                   if "bins" in e and not isinstance(e["bins"], str)]
        if self.truth_bins < max(tested):
            raise ValueError("truth_bins must be at least the largest tested bin count")
        if self.train_splits < 1 or self.specs_per_combination < 1:
            raise ValueError("need at least one split and one spec per combination")
        for s in self.settings:
            CalibrationSetting.parse(s)
        for e in self.estimators:
            policy_estimator(e)

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path_or_text) -> "BenchConfig":
        text = str(path_or_text)
        if not text.lstrip().startswith("{"):
            text = Path(text).read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def cells(self) -> list[tuple[int, int, int, int, int]]:
        """Cell coordinates ``(n_classes, dim, spec_index, model_index, split)``."""
        return [
            (c, d, k, m, s)
            for c in self.n_classes for d in self.dims
            for k in range(self.specs_per_combination)
            for m in range(len(self.models))
            for s in range(self.train_splits)
        ]


def policy_estimator(entry: dict, setting="confidence", n_grid=4096):
    name = entry["estimator"]
    if name.strip().lower() in ("ece_d", "kde", "density"):
        return DensityECE(bandwidth=entry.get("bandwidth", "silverman"), setting=setting, n_grid=n_grid)
    return make_estimator(name, bins=entry.get("bins", 15), setting=setting)


def policy_key(entry: dict) -> tuple[str, str]:
    est = policy_estimator(entry)
    return est.estimator_id, est.describe()


def derive_seed(master: int, *coords) -> np.random.SeedSequence:
    """Seed that depends only on the master seed and the coordinates."""
    return np.random.SeedSequence([int(master)] + [int(c) for c in coords])


_SEED_TAGS = {"spec": 1, "data": 2, "split": 3, "eval": 4, "truth": 5}


def _seed(config: BenchConfig, tag: str, *coords) -> np.random.SeedSequence:
    return derive_seed(config.seed, _SEED_TAGS[tag], *coords)


def truth_estimator(truth_bins: int, setting) -> BinnedECE:
    return BinnedECE(n_bins=truth_bins, binning="uniform", mapping="one_bin", setting=setting)


def ground_truth_ece(scorer, spec: MixtureSpec, holdout_size: int, truth_bins: int,
                     setting, seed=None) -> float:
    """Fine-grained legacy ECE of ``scorer`` on a fresh holdout drawn from ``spec``."""
    holdout = sample_dataset(spec, holdout_size, seed)
    data = validate(scorer.predict_proba(holdout.features), holdout.labels)
    return truth_estimator(truth_bins, setting).estimate_data(data).value


def percentile(values, q: float) -> float:
    """Linear interpolation between closest ranks."""
    return float(np.percentile(np.asarray(values, dtype=float), q, method="linear"))


def approximation_errors(estimates, truth: float) -> tuple[np.ndarray, bool]:
    """Relative errors, or absolute ones (flagged) when the truth is zero."""
    est = np.asarray(estimates, dtype=float)
    if truth == 0:
        return np.abs(est), True
    return np.abs(est - truth) / truth, False


def evaluate_estimator(estimator, pool: LabeledScores, setting, truth: float, eval_size: int,
                       n_boot_eval: int, error_percentile: float, seed=None) -> tuple[float, bool]:
    """Percentile of the approximation error over bootstrap evaluation sets.

    Returns ``(error, flagged)``; ``flagged`` marks a zero truth, in which
    case absolute errors are used. Estimators called with the same ``seed``
    see the same evaluation sets.
    """
    if eval_size > pool.n_samples:
        raise ValueError("evaluation size exceeds the pool")
    setting = CalibrationSetting.parse(setting)
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, pool.n_samples, size=(n_boot_eval, eval_size))
    estimates = [estimator.estimate_data(pool.take(idx), setting).value for idx in draws]
    errors, flagged = approximation_errors(estimates, truth)
    return percentile(errors, error_percentile), flagged


def _build_pool(config: BenchConfig, coords) -> LabeledScores:
    c, d, k, m, split = coords
    spec = sample_mixture_spec(c, d, _seed(config, "spec", c, d, k), config.modes_per_class)
    big = sample_dataset(spec, config.holdout_size + config.train_size, _seed(config, "data", c, d, k))
    perm = np.random.default_rng(_seed(config, "split", c, d, k, split)).permutation(len(big))
    train = big.take(perm[:config.train_size])
    holdout = big.take(perm[config.train_size:])
    model = dict(config.models[m])
    scorer = make_scorer(model.pop("kind"), spec, **model)
    scorer.fit(train.features, train.labels)
    return validate(scorer.predict_proba(holdout.features), holdout.labels)


def run_cell(config: BenchConfig, coords) -> dict[str, Any]:
    """Evaluate every estimator on one score distribution. Never raises."""
    result: dict[str, Any] = {"coords": list(coords), "status": "ok", "truth": {},
                              "flagged": {}, "errors": {}}
    try:
        pool = _build_pool(config, coords)
        for si, setting_name in enumerate(config.settings):
            setting = CalibrationSetting.parse(setting_name)
            truth = truth_estimator(config.truth_bins, setting).estimate_data(pool).value
            result["truth"][setting_name] = truth
            result["flagged"][setting_name] = truth == 0
            per_est: dict[str, dict[str, float]] = {}
            for entry in config.estimators:
                est = policy_estimator(entry, setting, config.n_grid)
                key = "|".join(policy_key(entry))
                per_est[key] = {}
                for size in config.eval_sizes:
                    err, _ = evaluate_estimator(
                        est, pool, setting, truth, size, config.n_boot_eval,
                        config.error_percentile, _seed(config, "eval", *coords, si, size))
                    per_est[key][str(size)] = err
            result["errors"][setting_name] = per_est
    except Exception as exc:  # a broken cell must not abort the run
        log.warning("cell %s failed: %s", coords, exc)
        result["status"] = "failed"
        result["error"] = f"{type(exc).__name__}: {exc}"
    return result


def _cell_path(ckpt_dir: Path, digest: str, coords) -> Path:
    key = hashlib.sha256(f"{digest}:{list(coords)}".encode()).hexdigest()[:20]
    return ckpt_dir / f"cell-{key}.json"


def _run_cell_to_disk(args):
    config_dict, coords, path = args
    config = BenchConfig.from_dict(config_dict)
    result = run_cell(config, coords)
    if path is not None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(json.dumps(result))
        os.replace(tmp, path)
    return result


@dataclass
class BenchmarkReport:
    rows: list[dict[str, Any]]
    provenance: dict[str, Any]
    cells: list[dict[str, Any]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for r in self.rows:
            writer.writerow([r["setting"], r["estimator"], r["hyperparams"], r["eval_size"],
                             repr(float(r["median_p95_error"])), r["n_distributions"]])
        return buf.getvalue()

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / "report.csv"
        csv_path.write_text(self.to_csv())
        prov_path = out / "report.json"
        prov_path.write_text(json.dumps(self.provenance, indent=2, sort_keys=True) + "\n")
        return csv_path, prov_path

    def lookup(self, setting: str, estimator: str, hyperparams: str, eval_size: int) -> float:
        for r in self.rows:
            if (r["setting"], r["estimator"], r["hyperparams"], r["eval_size"]) == (
                    setting, estimator, hyperparams, eval_size):
                return r["median_p95_error"]
        raise KeyError((setting, estimator, hyperparams, eval_size))

    @staticmethod
    def read_csv(path) -> list[dict[str, Any]]:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            r["eval_size"] = int(r["eval_size"])
            r["median_p95_error"] = float(r["median_p95_error"])
            r["n_distributions"] = int(r["n_distributions"])
        return rows


def aggregate(config: BenchConfig, cells: list[dict[str, Any]]) -> list[dict[str, Any]]:
    """Median across usable cells for every (setting, estimator, size)."""
    rows = []
    for setting_name in config.settings:
        usable = [c for c in cells if c["status"] == "ok" and not c["flagged"].get(setting_name, False)]
        for entry in config.estimators:
            est_id, hyper = policy_key(entry)
            key = f"{est_id}|{hyper}"
            for size in config.eval_sizes:
                vals = [c["errors"][setting_name][key][str(size)] for c in usable]
                rows.append({
                    "setting": setting_name,
                    "estimator": est_id,
                    "hyperparams": hyper,
                    "eval_size": int(size),
                    "median_p95_error": float(np.median(vals)) if vals else float("nan"),
                    "n_distributions": len(vals),
                })
    return rows


def run_benchmark(config: BenchConfig, out_dir=None, resume: bool = False, workers: int = 1,
                  progress=None) -> BenchmarkReport:
    """Run every cell (optionally in parallel) and aggregate the report.

    With ``out_dir`` each finished cell is checkpointed there; ``resume``
    reuses checkpoints from an earlier run of the same config.
    """
    digest = config.digest()
    coords_list = config.cells()
    ckpt_dir = None
    if out_dir is not None:
        ckpt_dir = Path(out_dir) / "checkpoints"
        ckpt_dir.mkdir(parents=True, exist_ok=True)
    results: dict[tuple, dict] = {}
    todo = []
    for coords in coords_list:
        path = _cell_path(ckpt_dir, digest, coords) if ckpt_dir is not None else None
        if resume and path is not None and path.exists():
            cached = json.loads(path.read_text())
            if cached.get("status") == "ok":
                results[coords] = cached
                continue
        todo.append((config.to_dict(), coords, path))
    n_reused = len(results)
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for args, res in zip(todo, pool.map(_run_cell_to_disk, todo)):
                results[args[1]] = res
                if progress:
                    progress(len(results), len(coords_list))
    else:
        for args in todo:
            results[args[1]] = _run_cell_to_disk(args)
            if progress:
                progress(len(results), len(coords_list))
    cells = [results[c] for c in coords_list]
    rows = aggregate(config, cells)
    failed = [c["coords"] for c in cells if c["status"] != "ok"]
    flagged = {
        s: [c["coords"] for c in cells if c["status"] == "ok" and c["flagged"].get(s)]
        for s in config.settings
    }
    provenance = {
        "config_sha256": digest,
        "seed": config.seed,
        "version": __version__,
        "n_cells": len(cells),
        "failed_cells": failed,
        "zero_truth_cells": flagged,
        "config": config.to_dict(),
    }
    log.info("benchmark done: %d cells (%d from checkpoints, %d failed)",
             len(cells), n_reused, len(failed))
    return BenchmarkReport(rows, provenance, cells)
