import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from calibrex import BinnedECE, DensityECE, ReliabilityCurveEstimator, make_estimator
from calibrex.core import CalibrationSetting, ScoredEvents

from oracles import brute_estimator, sample_calibrated_events


def _multiclass(rng, n=400, c=3):
    scores = rng.dirichlet(np.ones(c) * 0.7, size=n)
    labels = np.array([rng.choice(c, p=row) for row in scores])
    return scores, labels


def test_get_params_and_clone():
    est = BinnedECE(n_bins="sqrt", binning="adaptive", mapping="convex", setting="class_wise")
    assert est.get_params() == {"n_bins": "sqrt", "binning": "adaptive", "mapping": "convex",
                                "setting": "class_wise", "metric": "ece"}
    copy = clone(est).set_params(n_bins=7)
    assert copy.n_bins == 7 and est.n_bins == "sqrt"
    assert DensityECE().get_params()["bandwidth"] == "silverman"


def test_binned_fit_matches_brute_force(rng):
    scores, labels = _multiclass(rng)
    est = BinnedECE(n_bins=10, binning="adaptive", mapping="convex").fit(scores, labels)
    conf = scores.max(axis=1)
    hits = (scores.argmax(axis=1) == labels).astype(float)
    assert est.ece_ == pytest.approx(brute_estimator(list(conf), list(hits), 10, "adaptive", "convex"),
                                     abs=1e-12)
    assert est.estimate_.estimator_id == "ECE_ac"
    assert est.n_classes_ == 3


def test_classwise_is_mean_of_class_specific(rng):
    scores, labels = _multiclass(rng)
    cw = BinnedECE(setting="class_wise").estimate(scores, labels).value
    per = [BinnedECE(setting=f"class:{c}").estimate(scores, labels).value for c in range(3)]
    assert cw == pytest.approx(np.mean(per), abs=1e-15)
    kde_cw = DensityECE(setting="class_wise").estimate(scores, labels)
    assert kde_cw.setting == CalibrationSetting.class_wise()


def test_bad_class_rejected(rng):
    scores, labels = _multiclass(rng, c=3)
    with pytest.raises(ValueError):
        BinnedECE(setting="class:3").fit(scores, labels)


def test_density_describe_and_bandwidth(rng):
    scores, labels = _multiclass(rng)
    est = DensityECE(bandwidth=0.05).estimate(scores, labels)
    assert est.hyperparams["bandwidth"] == 0.05
    auto = DensityECE().estimate(scores, labels)
    assert auto.hyperparams["bandwidth"] > 0
    assert DensityECE(bandwidth=0.05).describe() == "bandwidth=0.05"
    assert BinnedECE(n_bins="sqrt").describe() == "bins=sqrt"


def test_make_estimator_aliases():
    assert make_estimator("legacy").estimator_id == "ECE_l"
    assert make_estimator("ECE_ac", bins=5).estimator_id == "ECE_ac"
    assert make_estimator("convex").estimator_id == "ECE_c"
    assert isinstance(make_estimator("kde"), DensityECE)
    with pytest.raises(ValueError):
        make_estimator("isotonic")
    with pytest.raises(ValueError):
        make_estimator("kde", metric="mce")


def test_mce_metric(rng):
    scores, labels = _multiclass(rng)
    mce = BinnedECE(metric="mce").estimate(scores, labels)
    ece = BinnedECE().estimate(scores, labels)
    assert mce.estimator_id == "MCE_l"
    assert mce.value >= ece.value


def test_reliability_estimator_transform(rng):
    s, h = sample_calibrated_events(20_000, rng)
    rel = ReliabilityCurveEstimator(n_grid=1024).fit(s, h)
    q = np.array([0.2, 0.5, 0.8])
    np.testing.assert_allclose(rel.transform(q), q, atol=0.06)
    np.testing.assert_allclose(rel.lce(q), rel.predict(q) - q)
    assert rel.bandwidth_ > 0


def test_reliability_estimator_intervals(rng):
    s, h = sample_calibrated_events(300, rng)
    rel = ReliabilityCurveEstimator(bandwidth=0.05, n_boot=30, n_grid=512, random_state=1).fit(s, h)
    lo, hi = rel.predict_interval([0.3, 0.6])
    assert np.all(lo <= rel.predict([0.3, 0.6]) + 1e-12)
    assert np.all(rel.predict([0.3, 0.6]) <= hi + 1e-12)
    plain = ReliabilityCurveEstimator(bandwidth=0.05, n_grid=512).fit(s, h)
    with pytest.raises(ValueError):
        plain.predict_interval([0.3])


def test_reliability_estimator_multiclass_input(rng):
    scores, labels = _multiclass(rng)
    rel = ReliabilityCurveEstimator(bandwidth=0.05, setting="class:1", n_grid=512).fit(scores, labels)
    ev_rel = ReliabilityCurveEstimator(bandwidth=0.05, n_grid=512).fit(
        ScoredEvents(scores[:, 1], labels == 1))
    # validate() renormalises rows, which perturbs scores by an ulp or so
    np.testing.assert_allclose(rel.curve_.rel, ev_rel.curve_.rel, atol=1e-12)


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ReliabilityCurveEstimator().transform([0.5])
