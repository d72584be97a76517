import numpy as np
import pytest
from scipy.optimize import approx_fprime
from scipy.stats import multivariate_normal

from calibrex.bench import ground_truth_ece
from calibrex.scorers import (
    AnalyticPosteriorScorer,
    GaussianNBScorer,
    LogisticRegressionScorer,
    fit_gaussian_naive_bayes,
    fit_logistic_regression,
    make_scorer,
    softmax_loss_grad,
)
from calibrex.synth import (
    MixtureSpec,
    analytic_posterior,
    distorted_posterior,
    sample_dataset,
    sample_mixture_spec,
)


def test_spec_shape_and_pd():
    spec = sample_mixture_spec(2, 2, seed=3)
    assert spec.n_modes == 8
    assert spec.means.min() >= 0 and spec.means.max() <= 1
    for cov in spec.covariances:
        np.testing.assert_allclose(cov, cov.T)
        assert np.linalg.eigvalsh(cov).min() > 0
    assert sample_mixture_spec(7, 7, seed=0).n_modes == 28


def test_spec_deterministic_and_json_roundtrip():
    a = sample_mixture_spec(5, 3, seed=11)
    b = sample_mixture_spec(5, 3, seed=11)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.covariances, b.covariances)
    back = MixtureSpec.from_json(a.to_json())
    np.testing.assert_array_equal(back.covariances, a.covariances)
    assert back.seed == 11


def test_spec_rejects_one_class():
    with pytest.raises(ValueError):
        sample_mixture_spec(1, 2, seed=0)


def test_dataset_sampling():
    spec = sample_mixture_spec(3, 2, seed=0)
    ds = sample_dataset(spec, 300, seed=1)
    assert ds.features.shape == (300, 2) and ds.labels.max() < 3
    one = sample_dataset(spec, 1, seed=1)
    assert len(one) == 1
    np.testing.assert_array_equal(sample_dataset(spec, 50, seed=4).features,
                                  sample_dataset(spec, 50, seed=4).features)


def _brute_posterior(spec, x):
    dens = np.array([multivariate_normal(spec.means[k], spec.covariances[k]).pdf(x)
                     for k in range(spec.n_modes)])
    per_class = dens.reshape(spec.n_classes, spec.modes_per_class).sum(axis=1)
    return per_class / per_class.sum()


def test_posterior_matches_density_ratio():
    spec = sample_mixture_spec(3, 2, seed=5)
    pts = sample_dataset(spec, 100, seed=6).features
    got = analytic_posterior(spec, pts)
    want = np.array([_brute_posterior(spec, x) for x in pts])
    np.testing.assert_allclose(got, want, atol=1e-10)


def _symmetric_spec():
    means = np.array([[-1.0, 0.0], [1.0, 0.0]])
    covs = np.array([np.eye(2) * 0.1] * 2)
    return MixtureSpec(2, 2, 1, means, covs)


def test_posterior_symmetry_and_saturation():
    spec = _symmetric_spec()
    np.testing.assert_allclose(analytic_posterior(spec, [0.0, 3.0]), [0.5, 0.5], atol=1e-15)
    far = analytic_posterior(spec, [6.0, 0.0])
    # log-density gap is 2*6/0.1 = 120
    np.testing.assert_allclose(far, [0.0, 1.0], atol=1e-12)
    very_far = analytic_posterior(spec, [1e4, 0.0])
    assert np.all(np.isfinite(very_far))


def test_temperature_cases():
    spec = sample_mixture_spec(4, 3, seed=2)
    x = sample_dataset(spec, 20, seed=3).features
    np.testing.assert_allclose(distorted_posterior(spec, x, 1.0), analytic_posterior(spec, x), atol=1e-14)
    np.testing.assert_allclose(distorted_posterior(spec, x, 1e6), 0.25, atol=1e-3)
    with pytest.raises(ValueError):
        distorted_posterior(spec, x, 0.0)


def test_tempered_binary_closed_form():
    # unit-variance modes at -m and m: log-odds at x is -2mx, so x=-0.5 gives m
    shift = np.log(9.0)
    spec = MixtureSpec(2, 1, 1, np.array([[-shift], [shift]]), np.array([[[1.0]], [[1.0]]]))
    x = np.array([[-0.5]])
    p = analytic_posterior(spec, x)[0]
    assert p[0] == pytest.approx(0.9, abs=1e-12)
    sharp = distorted_posterior(spec, x, 0.5)[0]
    assert sharp[0] == pytest.approx(0.81 / 0.82, abs=1e-12)
    assert sharp[0] == pytest.approx(0.9878, abs=1e-4)


def test_lr_separable_blobs():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.3, (100, 2)), rng.normal(2, 0.3, (100, 2))])
    y = np.repeat([0, 1], 100)
    clf = LogisticRegressionScorer(epochs=2000).fit(X, y)
    assert clf.score(X, y) >= 0.99
    p = clf.predict_proba(rng.normal(0, 5, (50, 2)))
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_lr_gradient_check():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 3))
    onehot = np.eye(4)[rng.integers(0, 4, 40)]
    params = rng.normal(size=16)
    _, grad = softmax_loss_grad(params, X, onehot, 1e-2)
    numeric = approx_fprime(params, lambda p: softmax_loss_grad(p, X, onehot, 1e-2)[0], 1e-7)
    assert np.max(np.abs(grad - numeric)) <= 1e-5


def test_lr_single_class_rejected_and_column_count():
    with pytest.raises(ValueError):
        LogisticRegressionScorer().fit(np.zeros((5, 2)), np.zeros(5))
    spec = sample_mixture_spec(5, 2, seed=0)
    train = sample_dataset(spec, 300, seed=1)
    clf = fit_logistic_regression(train, epochs=200)
    assert clf.predict_proba(train.features).shape == (300, 5)


def test_gnb_examples():
    X = np.array([[0.0], [0.0], [1.0], [1.0]]) + np.array([[-0.5], [0.5], [-0.5], [0.5]])
    y = np.array([0, 0, 1, 1])
    clf = GaussianNBScorer().fit(X, y)
    np.testing.assert_allclose(clf.var_, 0.25)
    np.testing.assert_allclose(clf.predict_proba([[0.5]]), [[0.5, 0.5]], atol=1e-15)

    far = GaussianNBScorer().fit([[0.0], [0.1], [100.0], [100.1]], [0, 0, 1, 1])
    assert far.predict_proba([[0.05]])[0, 0] > 1 - 1e-12


def test_gnb_uninformative_features_give_priors():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(50, 2))
    X = np.vstack([z] * 7 + [z] * 3)
    y = np.repeat([0, 1], [350, 150])
    p = GaussianNBScorer().fit(X, y).predict_proba(rng.normal(size=(100, 2)))
    np.testing.assert_allclose(p[:, 1], 0.3, atol=1e-12)


def test_gnb_needs_two_samples_per_class():
    with pytest.raises(ValueError):
        GaussianNBScorer().fit([[0.0], [1.0], [2.0]], [0, 0, 1])


def test_gnb_keeps_absent_class_columns():
    spec = sample_mixture_spec(3, 2, seed=0)
    train = sample_dataset(spec, 200, seed=1)
    train = train.take(train.labels < 2)
    p = fit_gaussian_naive_bayes(train).predict_proba(train.features)
    assert p.shape[1] == 3 and np.all(p[:, 2] == 0)


def test_make_scorer_kinds():
    spec = sample_mixture_spec(2, 2, seed=0)
    assert isinstance(make_scorer("distorted_posterior", spec, temperature=2.0), AnalyticPosteriorScorer)
    assert make_scorer("analytic_posterior", spec).temperature == 1.0
    with pytest.raises(ValueError):
        make_scorer("svc", spec)


def _truth_bound(bins, n):
    # Binned estimator bias under calibration: each bin adds about
    # E|mean of n_j centred Bernoullis| <= sqrt(p(1-p)/n_j) <= 0.5/sqrt(n_j),
    # so the total is at most 0.5 * sqrt(B / N) by Cauchy-Schwarz.
    return 0.5 * np.sqrt(bins / n)


@pytest.mark.slow
def test_ground_truth_of_analytic_scorer_is_small():
    spec = sample_mixture_spec(2, 2, seed=0)
    scorer = make_scorer("analytic_posterior", spec).fit()
    for setting in ("confidence", "class_wise"):
        truth = ground_truth_ece(scorer, spec, 1_000_000, 2000, setting, seed=1)
        assert truth <= _truth_bound(2000, 1_000_000)
        assert ground_truth_ece(scorer, spec, 1_000_000, 500, setting, seed=1) <= 0.01


@pytest.mark.slow
def test_ground_truth_grows_with_distortion():
    spec = sample_mixture_spec(5, 2, seed=1)
    base = ground_truth_ece(make_scorer("analytic_posterior", spec).fit(), spec, 200_000, 500,
                            "confidence", seed=2)
    for t in (0.5, 2.0):
        scorer = make_scorer("distorted_posterior", spec, temperature=t).fit()
        assert ground_truth_ece(scorer, spec, 200_000, 500, "confidence", seed=2) > base
