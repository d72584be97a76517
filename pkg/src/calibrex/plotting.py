"""Static SVG charts; every function only reads the data it is given."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SVG_KW = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "calibrex"}):
        fig.savefig(path, **_SVG_KW)
    plt.close(fig)


def reliability_svg(path, s, rel, band_low=None, band_high=None, title="Reliability curve"):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], color="0.6", ls="--", lw=1, label="y = x")
    if band_low is not None and band_high is not None:
        ax.fill_between(s, band_low, band_high, color="C0", alpha=0.25, lw=0, label="bootstrap band")
    ax.plot(s, rel, color="C0", lw=1.5, label="reliability")
    ax.set(xlim=(0, 1), ylim=(0, 1), xlabel="score", ylabel="event frequency", title=title)
    ax.legend(loc="upper left")
    _save(fig, path)


def diagram_svg(path, left, right, mean_score, event_rate, title="Reliability diagram"):
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], color="0.6", ls="--", lw=1)
    left, right = np.asarray(left), np.asarray(right)
    rate = np.asarray(event_rate, dtype=float)
    ok = ~np.isnan(rate)
    ax.bar(left[ok], rate[ok], width=(right - left)[ok], align="edge",
           edgecolor="k", color="C0", alpha=0.6, label="event rate")
    ax.plot(np.asarray(mean_score)[ok], rate[ok], "o", color="C1", ms=4, label="(mean score, rate)")
    ax.set(xlim=(0, 1), ylim=(0, 1), xlabel="score", ylabel="event frequency", title=title)
    ax.legend(loc="upper left")
    _save(fig, path)


def benchmark_svg(path, rows, setting):
    """Log-log median error versus evaluation size, one line per estimator."""
    fig, ax = plt.subplots(figsize=(7, 5))
    series: dict[str, list] = {}
    for r in rows:
        if r["setting"] != setting:
            continue
        series.setdefault(f'{r["estimator"]} ({r["hyperparams"]})', []).append(
            (r["eval_size"], r["median_p95_error"]))
    for label, pts in series.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=label)
    ax.set(xscale="log", yscale="log", xlabel="evaluation set size",
           ylabel="median 95th percentile relative error", title=f"{setting} (lower is better)")
    ax.legend(fontsize=7)
    _save(fig, path)
