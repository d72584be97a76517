"""Gaussian-mixture data sources with known posteriors."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp, softmax

COV_JITTER = 1e-6


@dataclass(frozen=True)
class MixtureSpec:
    """A C-class mixture with ``modes_per_class`` Gaussian modes per class.

    Modes are stored flat; mode ``k`` belongs to class ``k // modes_per_class``.
    Class priors are uniform and modes are equally likely within a class.
    """

    n_classes: int
    dim: int
    modes_per_class: int
    means: np.ndarray
    covariances: np.ndarray
    seed: int | None = None

    @property
    def n_modes(self) -> int:
        return self.n_classes * self.modes_per_class

    @property
    def mode_class(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_classes), self.modes_per_class)

    def to_json(self) -> str:
        return json.dumps({
            "n_classes": self.n_classes,
            "dim": self.dim,
            "modes_per_class": self.modes_per_class,
            "seed": self.seed,
            "means": self.means.tolist(),
            "covariances": [c.ravel().tolist() for c in self.covariances],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MixtureSpec":
        raw = json.loads(text)
        d = raw["dim"]
        covs = np.array([np.reshape(c, (d, d)) for c in raw["covariances"]])
        return cls(raw["n_classes"], d, raw["modes_per_class"],
                   np.array(raw["means"], dtype=float), covs, raw.get("seed"))


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    spec: MixtureSpec | None = None

    def __len__(self) -> int:
        return self.labels.size

    def take(self, indices) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.spec)


def sample_mixture_spec(n_classes: int, dim: int, seed=None, modes_per_class: int = 4) -> MixtureSpec:
    """Random mixture: means ~ U[0,1]^d, covariances A A^T with A ~ U[-0.3, 0.3]."""
    if n_classes < 2:
        raise ValueError("need at least two classes")
    if dim < 1 or modes_per_class < 1:
        raise ValueError("dim and modes_per_class must be positive")
    rng = np.random.default_rng(seed)
    k = n_classes * modes_per_class
    means = rng.uniform(0.0, 1.0, size=(k, dim))
    a = rng.uniform(-0.3, 0.3, size=(k, dim, dim))
    covs = a @ np.transpose(a, (0, 2, 1)) + COV_JITTER * np.eye(dim)
    return MixtureSpec(n_classes, dim, modes_per_class, means, covs,
                       int(seed) if isinstance(seed, (int, np.integer)) else None)


def sample_dataset(spec: MixtureSpec, n: int, seed=None) -> Dataset:
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, spec.n_classes, size=n)
    mode = labels * spec.modes_per_class + rng.integers(0, spec.modes_per_class, size=n)
    z = rng.standard_normal((n, spec.dim))
    chol = np.linalg.cholesky(spec.covariances)
    x = spec.means[mode] + np.einsum("nij,nj->ni", chol[mode], z)
    return Dataset(x, labels, spec)


def mode_log_densities(spec: MixtureSpec, x) -> np.ndarray:
    """log N(x; mu_k, Sigma_k) for every mode, shape (n, n_modes)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.empty((x.shape[0], spec.n_modes))
    for k in range(spec.n_modes):
        c, low = cho_factor(spec.covariances[k], lower=True)
        diff = x - spec.means[k]
        maha = np.einsum("ni,ni->n", diff, cho_solve((c, low), diff.T).T)
        logdet = 2.0 * np.log(np.diag(c)).sum()
        out[:, k] = -0.5 * (maha + logdet + spec.dim * np.log(2.0 * np.pi))
    return out


def log_posterior(spec: MixtureSpec, x) -> np.ndarray:
    """Normalised log P(Y = c | x); priors are uniform so they cancel."""
    logp = mode_log_densities(spec, x)
    per_class = logsumexp(logp.reshape(logp.shape[0], spec.n_classes, spec.modes_per_class), axis=2)
    return per_class - logsumexp(per_class, axis=1, keepdims=True)


def analytic_posterior(spec: MixtureSpec, x) -> np.ndarray:
    """Exact Bayes posterior of the mixture; a 1-d input gives a 1-d output."""
    single = np.ndim(x) == 1
    post = np.exp(log_posterior(spec, x))
    post /= post.sum(axis=1, keepdims=True)
    return post[0] if single else post


def distorted_posterior(spec: MixtureSpec, x, temperature: float) -> np.ndarray:
    """Tempered posterior ``softmax(log P(c | x) / T)``.

    ``T > 1`` flattens the scores (under-confident), ``T < 1`` sharpens them.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    single = np.ndim(x) == 1
    out = softmax(log_posterior(spec, x) / temperature, axis=1)
    return out[0] if single else out
