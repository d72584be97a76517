"""Slow, deliberately naive reference implementations used only by tests.

Nothing here imports the package's estimators; bins, centres and weights are
rebuilt from their defining formulas with plain Python loops.
"""

import math

import numpy as np


def uniform_thresholds(n_bins):
    return [i / n_bins for i in range(1, n_bins + 1)]


def adaptive_thresholds(scores, n_bins):
    s = sorted(scores)
    n = len(s)
    cuts = []
    for i in range(1, n_bins):
        k = (i * n) // n_bins  # 1-based rank k and k+1
        lo, hi = s[k - 1], s[k]
        if lo < hi:
            mid = (lo + hi) / 2
            if not cuts or mid > cuts[-1]:
                cuts.append(mid)
    return cuts + [1.0]


def one_bin_weights(scores, thresholds):
    rows = []
    for s in scores:
        row = [0.0] * len(thresholds)
        prev = 0.0
        for j, t in enumerate(thresholds):
            if (j == 0 and s <= t) or (prev < s <= t):
                row[j] = 1.0
                break
            prev = t
        rows.append(row)
    return rows


def convex_weights(scores, thresholds):
    edges = [0.0] + list(thresholds)
    centers = [(edges[j] + edges[j + 1]) / 2 for j in range(len(thresholds))]
    b = len(centers)
    rows = []
    for s in scores:
        row = [0.0] * b
        if s <= centers[0]:
            row[0] = 1.0
        elif s >= centers[-1]:
            row[-1] = 1.0
        else:
            for j in range(b - 1):
                if centers[j] <= s <= centers[j + 1]:
                    w = (s - centers[j]) / (centers[j + 1] - centers[j])
                    row[j + 1] = w
                    row[j] = 1.0 - w
                    break
        rows.append(row)
    return rows


def brute_binned_ece(scores, hits, weights):
    n = len(scores)
    total = 0.0
    for j in range(len(weights[0])):
        acc = 0.0
        for i in range(n):
            acc += weights[i][j] * (hits[i] - scores[i])
        total += abs(acc)
    return total / n


def brute_estimator(scores, hits, n_bins, binning, mapping):
    t = uniform_thresholds(n_bins) if binning == "uniform" else adaptive_thresholds(scores, n_bins)
    w = one_bin_weights(scores, t) if mapping == "one_bin" else convex_weights(scores, t)
    return brute_binned_ece(scores, hits, w)


def gauss(u):
    return math.exp(-0.5 * u * u) / math.sqrt(2 * math.pi)


def direct_mirrored_kde(scores, h, points, weights=None):
    """Sum of reflected Gaussian kernels evaluated at each point, O(N*n)."""
    s = np.asarray(scores, dtype=float)[None, :]
    w = np.ones(s.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    x = np.asarray(points, dtype=float)[:, None]
    phi = lambda u: np.exp(-0.5 * u * u) / np.sqrt(2 * np.pi)  # noqa: E731
    k = phi((x - s) / h) + phi((x + s) / h) + phi((x - 2 + s) / h)
    return (k * w).sum(axis=1) / (h * w.sum())


def sample_calibrated_events(n, rng, a=2.0, b=2.0):
    """Scores ~ Beta(a, b) with hits ~ Bernoulli(score)."""
    s = rng.beta(a, b, size=n)
    return s, (rng.uniform(size=n) < s).astype(float)
