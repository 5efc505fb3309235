import numpy as np
import pytest
from sklearn.base import clone

from evogame import scenarios
from evogame.distributions import expected_accuracy_threshold, mixture, sample
from evogame.estimators import HardSVM1D, OracleThreshold1D, SoftSVM1D
from evogame.learners import oracle_threshold, soft_svm_solve


def test_oracle_estimator_on_distribution():
    d = mixture(scenarios.gaussian_skewed(), [0.4, 0.6])
    est = OracleThreshold1D().fit_distribution(d)
    ref = oracle_threshold(d)
    assert est.classifier_ == ref
    assert est.accuracy(d) == pytest.approx(expected_accuracy_threshold(d, ref), abs=0)


def test_oracle_estimator_on_samples(rng):
    d = mixture(scenarios.gaussian_pair(), [0.5, 0.5])
    x, y = sample(d, 4000, rng)
    est = OracleThreshold1D().fit(x[:, None], y)
    assert est.score(x[:, None], y) >= 0.8
    assert set(est.classes_) == {-1, 1}


def test_soft_svm_estimator_matches_solver():
    d = mixture(scenarios.soft_svm_groups(0.75), [0.4, 0.6])
    est = SoftSVM1D(lam=100.0, reg_scale=1 / 3000).fit_distribution(d)
    ref = soft_svm_solve(d, 100.0, reg_scale=1 / 3000)
    assert est.classifier_ == ref.classifier
    assert est.objective_ == ref.objective
    assert clone(est).get_params() == {"lam": 100.0, "quad_tol": 1e-10, "reg_scale": 1 / 3000}


def test_hard_svm_estimator():
    est = HardSVM1D().fit(np.array([[-0.2], [0.4]]), np.array([-1, 1]))
    assert np.array_equal(est.predict(np.array([[0.0], [0.2]])), [-1, 1])


def test_estimators_reject_bad_labels():
    with pytest.raises(ValueError):
        OracleThreshold1D().fit(np.array([[0.0], [1.0]]), np.array([0, 2]))


def test_empirical_oracle_matches_brute_force(rng):
    for _ in range(20):
        n = int(rng.integers(1, 40))
        x = np.round(rng.normal(size=n), 1)
        y = rng.choice([-1, 1], size=n)
        est = OracleThreshold1D().fit(x[:, None], y)
        cands = np.concatenate([np.unique(x), [x.max() + 1]])
        best = max(np.mean(o * np.where(x >= t, 1, -1) == y) for t in cands for o in (1, -1))
        assert est.score(x[:, None], y) == pytest.approx(best, abs=1e-12)
