"""scikit-learn style wrappers around the one-dimensional learners.

``fit(X, y)`` trains on samples (treated as an empirical distribution of
point masses); ``fit_distribution(d)`` trains on an exact group mixture.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .distributions import Component, GroupDistribution, Point, expected_accuracy_threshold
from .learners import Classifier1D, hard_svm_sample, oracle_threshold, soft_svm_solve


def _empirical_distribution(x, y):
    """Samples as equally weighted point-mass components."""
    w = 1.0 / len(x)
    comps = [Component(Point(float(xi)), w, int(yi)) for xi, yi in zip(x, y)]
    return GroupDistribution(tuple(comps)).merged()


class _Base1D(ClassifierMixin, BaseEstimator):
    def _validate(self, X, y):
        X, y = check_X_y(X, y, ensure_2d=False)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError("one-dimensional features expected")
            X = X[:, 0]
        labels = set(np.unique(y).tolist())
        if not labels <= {-1, 1}:
            raise ValueError("labels must be -1 or +1")
        return X.astype(float), y.astype(int)

    def fit_distribution(self, d):
        self.classifier_ = self._learn(d)
        self.classes_ = np.array([-1, 1])
        return self

    def fit(self, X, y):
        X, y = self._validate(X, y)
        return self.fit_distribution(_empirical_distribution(X, y))

    def predict(self, X):
        check_is_fitted(self, "classifier_")
        X = check_array(X, ensure_2d=False)
        return self.classifier_.predict(X.reshape(-1))

    def accuracy(self, d):
        check_is_fitted(self, "classifier_")
        return float(expected_accuracy_threshold(d, self.classifier_))


def _empirical_oracle(x, y):
    """Best threshold on samples by sorting and cumulative counts.

    Empirical accuracy is constant between consecutive distinct values, so
    the candidates are the gap midpoints plus one threshold beyond each end.
    Ties go to the smaller threshold, then to orientation +1.
    """
    u, inv = np.unique(x, return_inverse=True)
    pos = np.bincount(inv, weights=(y == 1).astype(float), minlength=u.size)
    neg = np.bincount(inv, weights=(y == -1).astype(float), minlength=u.size)
    pad = max(1.0, u[-1] - u[0])
    theta = np.concatenate([[u[0] - pad], 0.5 * (u[:-1] + u[1:]), [u[-1] + pad]])
    # correct for orientation +1 with theta between u[j-1] and u[j]: negatives left, positives right
    neg_left = np.concatenate([[0.0], np.cumsum(neg)])
    pos_right = pos.sum() - np.concatenate([[0.0], np.cumsum(pos)])
    acc_pos = (neg_left + pos_right) / len(x)
    acc = np.concatenate([acc_pos, 1.0 - acc_pos])
    orient = np.concatenate([np.ones(theta.size), -np.ones(theta.size)])
    theta = np.concatenate([theta, theta])
    ties = np.flatnonzero(acc >= acc.max() - 1e-12)
    j = ties[np.lexsort((-orient[ties], theta[ties]))[0]]
    return Classifier1D(float(theta[j]), int(orient[j]))


class OracleThreshold1D(_Base1D):
    """Best 1-D threshold classifier (exact on distributions and on samples)."""

    def fit(self, X, y):
        X, y = self._validate(X, y)
        self.classifier_ = _empirical_oracle(X, y)
        self.classes_ = np.array([-1, 1])
        return self

    def _learn(self, d):
        return oracle_threshold(d)


class SoftSVM1D(_Base1D):
    """Soft-margin SVM; the penalty on ``w^2`` is ``reg_scale * lam``."""

    def __init__(self, lam=1.0, quad_tol=1e-10, reg_scale=1.0):
        self.lam = lam
        self.quad_tol = quad_tol
        self.reg_scale = reg_scale

    def _learn(self, d):
        res = soft_svm_solve(d, self.lam, self.quad_tol, self.reg_scale)
        self.objective_ = res.objective
        self.premise_w_le_1_ = res.premise_w_le_1
        return res.classifier


class HardSVM1D(_Base1D):
    """Maximum-margin threshold on linearly separable samples."""

    def fit(self, X, y):
        X, y = self._validate(X, y)
        self.classifier_ = hard_svm_sample(X, y)
        self.classes_ = np.array([-1, 1])
        return self

    def _learn(self, d):
        raise NotImplementedError("hard-SVM needs finite samples; use fit(X, y)")
