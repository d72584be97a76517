"""Probabilistic classifiers used to generate realistic score distributions.

All scorers follow the scikit-learn estimator protocol (``fit``,
``predict_proba``, ``predict``, ``get_params``) and always emit one column
per class of the data source, even for classes absent from training.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_softmax, logsumexp, softmax
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .synth import Dataset, MixtureSpec, distorted_posterior


def _n_classes(y, n_classes):
    c = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if y.min() < 0 or y.max() >= c:
        raise ValueError("labels outside [0, n_classes)")
    return c


def softmax_loss_grad(params: np.ndarray, X: np.ndarray, onehot: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient.

    ``params`` packs the (d + 1, C) matrix whose last row is the bias; the
    bias is not penalised.
    """
    d = X.shape[1]
    W = params.reshape(d + 1, -1)
    logits = X @ W[:d] + W[d]
    logp = log_softmax(logits, axis=1)
    n = X.shape[0]
    loss = -(onehot * logp).sum() / n + 0.5 * l2 * (W[:d] ** 2).sum()
    resid = (np.exp(logp) - onehot) / n
    grad = np.empty_like(W)
    grad[:d] = X.T @ resid + l2 * W[:d]
    grad[d] = resid.sum(axis=0)
    return loss, grad.ravel()


class LogisticRegressionScorer(ClassifierMixin, BaseEstimator):
    """Multinomial logistic regression fit by full-batch gradient descent.

    Stops when the loss changes by less than ``tol`` between epochs or after
    ``epochs`` iterations.
    """

    def __init__(self, lr=0.1, epochs=5000, l2=1e-4, tol=1e-8, n_classes=None):
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.tol = tol
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        y = y.astype(int)
        if np.unique(y).size < 2:
            raise ValueError("training data must contain at least two classes")
        c = _n_classes(y, self.n_classes)
        onehot = np.eye(c)[y]
        params = np.zeros((X.shape[1] + 1) * c)
        prev = np.inf
        for epoch in range(int(self.epochs)):
            loss, grad = softmax_loss_grad(params, X, onehot, self.l2)
            if abs(prev - loss) < self.tol:
                break
            params -= self.lr * grad
            prev = loss
        self.n_iter_ = epoch + 1
        self.loss_ = loss
        W = params.reshape(X.shape[1] + 1, c)
        self.coef_ = W[:-1].T.copy()
        self.intercept_ = W[-1].copy()
        self.classes_ = np.arange(c)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        return softmax(X @ self.coef_.T + self.intercept_, axis=1)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class GaussianNBScorer(ClassifierMixin, BaseEstimator):
    """Gaussian naive Bayes with empirical class priors."""

    def __init__(self, var_floor=1e-9, n_classes=None):
        self.var_floor = var_floor
        self.n_classes = n_classes

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        y = y.astype(int)
        c = _n_classes(y, self.n_classes)
        counts = np.bincount(y, minlength=c)
        present = counts > 0
        if np.any(counts[present] < 2):
            raise ValueError("every present class needs at least two samples")
        d = X.shape[1]
        self.theta_ = np.zeros((c, d))
        self.var_ = np.ones((c, d))
        for k in np.flatnonzero(present):
            xk = X[y == k]
            self.theta_[k] = xk.mean(axis=0)
            self.var_[k] = np.maximum(xk.var(axis=0), self.var_floor)
        with np.errstate(divide="ignore"):
            self.class_log_prior_ = np.log(counts / counts.sum())
        self.classes_ = np.arange(c)
        self.n_features_in_ = d
        return self

    def predict_log_proba(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X)
        jll = -0.5 * (
            np.log(2 * np.pi * self.var_).sum(axis=1)[None, :]
            + (((X[:, None, :] - self.theta_[None]) ** 2) / self.var_[None]).sum(axis=2)
        ) + self.class_log_prior_
        return jll - logsumexp(jll, axis=1, keepdims=True)

    def predict_proba(self, X):
        p = np.exp(self.predict_log_proba(X))
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class AnalyticPosteriorScorer(ClassifierMixin, BaseEstimator):
    """Exact (optionally tempered) posterior of a known mixture.

    ``fit`` learns nothing; it only records the class set. With
    ``temperature=1`` the scorer is perfectly calibrated by construction.
    """

    def __init__(self, spec: MixtureSpec | None = None, temperature=1.0):
        self.spec = spec
        self.temperature = temperature

    def fit(self, X=None, y=None):
        if self.spec is None:
            raise ValueError("AnalyticPosteriorScorer needs a mixture spec")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        self.classes_ = np.arange(self.spec.n_classes)
        self.n_features_in_ = self.spec.dim
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X)
        return distorted_posterior(self.spec, X, self.temperature)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def fit_logistic_regression(train: Dataset, lr=0.1, epochs=5000, l2=1e-4) -> LogisticRegressionScorer:
    c = train.spec.n_classes if train.spec is not None else None
    return LogisticRegressionScorer(lr=lr, epochs=epochs, l2=l2, n_classes=c).fit(
        train.features, train.labels)


def fit_gaussian_naive_bayes(train: Dataset) -> GaussianNBScorer:
    c = train.spec.n_classes if train.spec is not None else None
    return GaussianNBScorer(n_classes=c).fit(train.features, train.labels)


def make_scorer(kind: str, spec: MixtureSpec | None = None, **params):
    """Instantiate a scorer from a config entry."""
    if kind == "logistic_regression":
        return LogisticRegressionScorer(n_classes=spec.n_classes if spec else None, **params)
    if kind == "gaussian_naive_bayes":
        return GaussianNBScorer(n_classes=spec.n_classes if spec else None, **params)
    if kind == "analytic_posterior":
        return AnalyticPosteriorScorer(spec, temperature=1.0)
    if kind == "distorted_posterior":
        return AnalyticPosteriorScorer(spec, **params)
    raise ValueError(f"unknown model kind {kind!r}")
