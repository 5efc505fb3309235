"""Learning algorithms that map a training distribution to a classifier.

Population-limit learners (oracle threshold, soft-SVM) operate directly on a
:class:`~evogame.distributions.GroupDistribution`. Sample-based learners
(hard-SVM) work on feature/label arrays. :mod:`evogame.estimators` wraps
them in the scikit-learn ``fit``/``predict`` interface.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, erfc, exp, pi, sqrt

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .distributions import (
    Gaussian,
    Point,
    Triangular,
    Uniform,
    mixture,
    sample_from_uniforms,
    threshold_accuracy_curve,
)
from .population import check_state, project_to_simplex

ONE_CLASS_SENTINEL = 1e300
ORACLE_SCAN = 1024
ORACLE_XTOL = 1e-10
TIE_ATOL = 1e-12
MAX_POLISH = 8
SVM_W_MAX = 10.0
SVM_B_MAX = 5.0
SQRT2 = sqrt(2.0)


class NotSeparableError(ValueError):
    """Hard-SVM training data is not linearly separable."""


@dataclass(frozen=True)
class Classifier1D:
    """Threshold rule ``orientation * sign(x - theta)`` with ``sign(0) = +1``."""

    theta: float
    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (-1, 1):
            raise ValueError("orientation must be -1 or +1")

    def predict(self, x):
        s = np.where(np.asarray(x, dtype=float) >= self.theta, 1, -1)
        return self.orientation * s

    def positive_rate(self, shape):
        right = 1.0 - shape.cdf_left(self.theta)
        return right if self.orientation == 1 else 1.0 - right


@dataclass(frozen=True)
class LinearClassifier1D:
    """Affine rule ``sign(w x + b)`` with ``sign(0) = +1``."""

    w: float
    b: float
    one_class: int = 0

    def __post_init__(self):
        if self.w == 0.0 and self.b == 0.0:
            raise ValueError("w and b cannot both be zero")

    @property
    def boundary(self):
        return -self.b / self.w if self.w != 0.0 else np.copysign(np.inf, -self.b)

    def predict(self, x):
        return np.where(self.w * np.asarray(x, dtype=float) + self.b >= 0.0, 1, -1)

    def positive_rate(self, shape):
        if self.w == 0.0:
            return 1.0 if self.b > 0 else 0.0
        t = -self.b / self.w
        if self.w > 0:
            return 1.0 - shape.cdf_left(t)
        return shape.cdf(t)


# ---------------------------------------------------------------------------
# oracle threshold classifier


def _scan_grid(breaks):
    lo, hi = breaks[0], breaks[-1]
    pad = max(1.0, hi - lo)
    pieces = [np.array([lo - pad])]
    for a, b in zip(breaks, breaks[1:]):
        pieces.append(np.linspace(a, b, ORACLE_SCAN + 1))
    pieces.append(np.array([hi + pad]))
    return np.concatenate(pieces)


def oracle_threshold(d):
    """Exact 0-1 loss minimizer over 1-D threshold classifiers.

    Breakpoints of all component shapes split the line into intervals; each
    interval is scanned at ``1/1024`` of its width, and the best scan points
    are polished with a bounded Brent search to ``1e-10``. Ties go to the
    smaller threshold, then to orientation +1.
    """
    breaks = d.breakpoints()
    grid = _scan_grid(breaks)
    acc_pos = threshold_accuracy_curve(d, grid)
    thetas = [grid, grid]
    orients = [np.ones(grid.size), -np.ones(grid.size)]
    values = [acc_pos, 1.0 - acc_pos]
    best = max(acc_pos.max(), 1.0 - acc_pos.min())

    # polish scan points that beat a neighbour and tie the other, near the best value
    extra_t, extra_o, extra_v = [], [], []
    for o, vals in ((1, values[0]), (-1, values[1])):
        mid = vals[1:-1]
        left, right = vals[:-2], vals[2:]
        peak = (mid >= left) & (mid >= right) & ((mid > left) | (mid > right))
        idx = np.flatnonzero(peak & (mid >= best - 1e-3)) + 1
        for i in idx[np.argsort(-vals[idx], kind="stable")][:MAX_POLISH]:
            sign = float(o)
            res = minimize_scalar(
                lambda t: -(sign * (threshold_accuracy_curve(d, t) - 0.5) + 0.5),
                bounds=(grid[i - 1], grid[i + 1]),
                method="bounded",
                options={"xatol": ORACLE_XTOL},
            )
            extra_t.append(float(res.x))
            extra_o.append(o)
            extra_v.append(float(-res.fun))
    theta = np.concatenate(thetas + [np.array(extra_t)])
    orient = np.concatenate(orients + [np.array(extra_o, dtype=float)])
    value = np.concatenate(values + [np.array(extra_v)])
    ties = np.flatnonzero(value >= value.max() - TIE_ATOL)
    j = ties[np.lexsort((-orient[ties], theta[ties]))[0]]
    return Classifier1D(float(theta[j]), int(orient[j]))


# ---------------------------------------------------------------------------
# soft-SVM in the population limit


def _scalar_funcs(shape):
    """Pure-float ``(cdf, cdf_left, partial_moment)`` for a shape.

    The soft-SVM solver evaluates these thousands of times on scalars, where
    numpy call overhead dominates.
    """
    if isinstance(shape, Uniform):
        lo, hi = shape.lo, shape.hi
        span = hi - lo

        def cdf(x):
            return min(1.0, max(0.0, (x - lo) / span))

        def pm(x):
            x = min(hi, max(lo, x))
            return (x * x - lo * lo) / (2.0 * span)

        return cdf, cdf, pm
    if isinstance(shape, Triangular):
        a, b, c = shape.a, shape.b, shape.c
        kl = 1.0 / ((b - a) * (c - a)) if c > a else 0.0
        kr = 1.0 / ((b - a) * (b - c)) if b > c else 0.0

        def cdf(x):
            if x <= a:
                return 0.0
            if x >= b:
                return 1.0
            if x < c:
                return (x - a) ** 2 * kl
            return 1.0 - (b - x) ** 2 * kr

        def m_left(x):
            return 2.0 * kl * ((x**3 - a**3) / 3.0 - a * (x**2 - a**2) / 2.0)

        def m_right(x):
            return 2.0 * kr * (b * (x**2 - c**2) / 2.0 - (x**3 - c**3) / 3.0)

        at_c = m_left(c) if c > a else 0.0

        def pm(x):
            x = min(b, max(a, x))
            if x < c:
                return m_left(x)
            return at_c + (m_right(x) if b > c else 0.0)

        return cdf, cdf, pm
    if isinstance(shape, Point):
        a = shape.a
        return (lambda x: 1.0 if x >= a else 0.0), (lambda x: 1.0 if x > a else 0.0), (
            lambda x: a if x >= a else 0.0
        )
    if isinstance(shape, Gaussian):
        m, s = shape.mean, shape.std

        def cdf(x):
            return 0.5 * erfc(-(x - m) / (s * SQRT2))

        def pm(x):
            z = (x - m) / s
            return m * 0.5 * erfc(-z / SQRT2) - s * exp(-0.5 * z * z) / sqrt(2.0 * pi)

        return cdf, cdf, pm
    raise TypeError(f"unsupported shape {shape!r}")


def _label_parts(d):
    """Per component: scalar functions, mean, mass with label +1 and with -1."""
    parts = []
    for c in d.components:
        if c.weight == 0.0:
            continue
        keep, flip = c.weight * (1.0 - c.flip_prob), c.weight * c.flip_prob
        pos, neg = (keep, flip) if c.label == 1 else (flip, keep)
        cdf, cdf_left, pm = _scalar_funcs(c.shape)
        parts.append((cdf, cdf_left, pm, float(c.shape.expectation()), pos, neg))
    return parts


def _hinge(parts, w, b):
    total = 0.0
    for cdf, cdf_left, pm, mu, pos, neg in parts:
        if w > 0:
            u, l = (1.0 - b) / w, (-1.0 - b) / w
            hp = (1.0 - b) * cdf(u) - w * pm(u)
            hn = (1.0 + b) * (1.0 - cdf_left(l)) + w * (mu - pm(l))
        elif w < 0:
            u, l = (1.0 - b) / w, (-1.0 - b) / w
            hp = (1.0 - b) * (1.0 - cdf_left(u)) - w * (mu - pm(u))
            hn = (1.0 + b) * cdf(l) + w * pm(l)
        else:
            hp, hn = max(0.0, 1.0 - b), max(0.0, 1.0 + b)
        total += pos * hp + neg * hn
    return total


def _b_gradient(parts, w, b):
    g = 0.0
    for cdf, cdf_left, _, _, pos, neg in parts:
        if w > 0:
            in_pos = cdf((1.0 - b) / w)
            in_neg = 1.0 - cdf_left((-1.0 - b) / w)
        elif w < 0:
            in_pos = 1.0 - cdf_left((1.0 - b) / w)
            in_neg = cdf((-1.0 - b) / w)
        else:
            in_pos = 1.0 if b <= 1.0 else 0.0
            in_neg = 1.0 if b >= -1.0 else 0.0
        g += neg * in_neg - pos * in_pos
    return g


def expected_hinge(d, w, b):
    """E[max(0, 1 - y (w x + b))] from exact CDFs and partial first moments."""
    return _hinge(_label_parts(d), float(w), float(b))


def soft_svm_objective(d, w, b, lam, reg_scale=1.0):
    return reg_scale * lam * w * w + expected_hinge(d, w, b)


def svm_b_gradient(d, w, b):
    """dL/db = Pr[w x + b >= -1, y = -1] - Pr[w x + b <= 1, y = +1]."""
    return _b_gradient(_label_parts(d), float(w), float(b))


def _optimal_b(parts, w, flat_tol=1e-14, xtol=1e-12):
    """Minimizer of the (convex) objective in b for fixed w.

    When the objective is flat in b the midpoint of the flat interval is
    returned, which keeps symmetric problems exactly at b = 0.
    """
    grad = lambda b: _b_gradient(parts, w, b)
    lo, hi = -SVM_B_MAX, SVM_B_MAX
    if grad(lo) > flat_tol:
        return lo
    if grad(hi) < -flat_tol:
        return hi
    g0 = grad(0.0)
    if abs(g0) > flat_tol:
        a, c = (lo, 0.0) if g0 > 0 else (0.0, hi)
        root = brentq(grad, a, c, xtol=xtol) if grad(a) * grad(c) < 0 else a
        if abs(grad(root)) > flat_tol:
            return root
        mid = root
    else:
        mid = 0.0

    # flat stretch around ``mid``: bisect for both of its edges
    a, c = lo, mid
    while c - a > xtol:
        m = 0.5 * (a + c)
        a, c = (a, m) if grad(m) >= -flat_tol else (m, c)
    left = 0.5 * (a + c)
    a, c = mid, hi
    while c - a > xtol:
        m = 0.5 * (a + c)
        a, c = (m, c) if grad(m) <= flat_tol else (a, m)
    return 0.5 * (left + 0.5 * (a + c))


@dataclass(frozen=True)
class SoftSVMResult:
    classifier: LinearClassifier1D
    objective: float

    @property
    def premise_w_le_1(self):
        return 0.0 < self.classifier.w <= 1.0


def soft_svm_solve(d, lam, quad_tol=1e-10, reg_scale=1.0):
    """Minimize ``reg_scale*lam*w^2 + E[hinge]`` over ``(w, b)``.

    The objective is jointly convex, so the profile ``w -> min_b L(w, b)`` is
    convex too and a single bounded Brent search on ``w`` in ``[-10, 10]``
    finds its minimum. ``quad_tol`` is the absolute tolerance on ``w``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    parts = _label_parts(d)
    pen = reg_scale * lam

    def profile(w):
        b = _optimal_b(parts, w)
        return pen * w * w + _hinge(parts, w, b), b

    res = minimize_scalar(
        lambda w: profile(w)[0], bounds=(-SVM_W_MAX, SVM_W_MAX), method="bounded",
        options={"xatol": quad_tol},
    )
    w = float(res.x)
    obj, b = profile(w)
    if w == 0.0 and b == 0.0:
        b = 1e-300
    return SoftSVMResult(LinearClassifier1D(w, b), obj)


def soft_svm_population(d, lam, quad_tol=1e-10, reg_scale=1.0):
    return soft_svm_solve(d, lam, quad_tol, reg_scale).classifier


# ---------------------------------------------------------------------------
# k-NN with label noise (closed form)


def phi_k(k, alpha):
    """P(Binomial(k, alpha) <= floor(k/2)) by exact summation."""
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be an odd positive integer")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return sum(comb(k, j) * alpha**j * (1.0 - alpha) ** (k - j) for j in range(k // 2 + 1))


def _knn_acc_a(alpha, beta, k, pb):
    gamma = pb - 2.0 * pb * beta + beta
    q_pos = beta * (1.0 - pb) / gamma if gamma > 0 else 0.0
    q_neg = beta * pb / (1.0 - gamma) if gamma < 1 else 0.0
    noisy = (1.0 + (1.0 - 2.0 * alpha) * (-1.0 + 2.0 * phi_k(k, q_pos * alpha))) / 2.0
    clean = (1.0 - (1.0 - 2.0 * phi_k(k, q_neg * alpha))) / 2.0
    return beta * noisy + (1.0 - beta) * clean


def knn_fitness(alpha, beta, k, p):
    """Expected per-group k-NN accuracy for the symmetric label-noise groups.

    ``p = (p_A, p_B)``; group B follows from A by the reflection p_B -> 1 - p_B.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if not 0.5 <= beta <= 1.0:
        raise ValueError("beta must lie in [0.5, 1]")
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be an odd positive integer")
    p = check_state(p, K=2)
    pb = float(p[1])
    return np.array([_knn_acc_a(alpha, beta, k, pb), _knn_acc_a(alpha, beta, k, 1.0 - pb)])


# ---------------------------------------------------------------------------
# hard-SVM on finite samples


def hard_svm_sample(x, y):
    """Max-margin 1-D threshold; one-class data gets a constant classifier."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.size == 0:
        raise ValueError("need at least one sample")
    pos, neg = x[y == 1], x[y == -1]
    if neg.size == 0:
        return LinearClassifier1D(1.0, ONE_CLASS_SENTINEL, one_class=1)
    if pos.size == 0:
        return LinearClassifier1D(1.0, -ONE_CLASS_SENTINEL, one_class=-1)
    lo, hi = neg.max(), pos.min()
    if hi < lo:
        raise NotSeparableError(f"max negative x {lo} exceeds min positive x {hi}")
    return LinearClassifier1D(1.0, float(-0.5 * (lo + hi)) + 0.0)


def hard_svm_margins(groups, n, p, uniforms):
    """Per-trial hard-SVM thresholds for common-random-number uniforms.

    ``uniforms`` has shape ``(trials, n, 3)``. One-class trials map to
    ``-/+ONE_CLASS_SENTINEL`` thresholds (all positive / all negative).
    """
    d = mixture(groups, p)
    x, y = sample_from_uniforms(d, uniforms)
    pos = np.where(y == 1, x, np.inf).min(axis=1)
    neg = np.where(y == -1, x, -np.inf).max(axis=1)
    bad = np.isfinite(pos) & np.isfinite(neg) & (pos < neg)
    if np.any(bad):
        raise NotSeparableError(f"{int(bad.sum())} of {len(bad)} draws are not separable")
    theta = 0.5 * (pos + neg)
    theta = np.where(~np.isfinite(neg), -ONE_CLASS_SENTINEL, theta)
    theta = np.where(~np.isfinite(pos), ONE_CLASS_SENTINEL, theta)
    return theta


def hard_svm_fitness_mc(groups, n, trials, p, rng):
    """Monte-Carlo per-group accuracy of hard-SVM trained on ``n`` samples.

    Returns ``(mean, standard_error)`` arrays over ``trials`` draws.
    """
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be at least 1")
    p = check_state(p, K=len(groups))
    rng = np.random.default_rng(rng)
    theta = hard_svm_margins(groups, n, p, rng.random((trials, n, 3)))
    accs = np.stack([threshold_accuracy_curve(g, theta) for g in groups], axis=1)
    mean = accs.mean(axis=0)
    se = accs.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(len(groups))
    return mean, se


# ---------------------------------------------------------------------------
# wrappers


def stabilized_state(p, p_star):
    """Mirror ``p`` through ``p_star`` and project back onto the simplex."""
    p = np.asarray(p, dtype=float)
    p_star = np.asarray(p_star, dtype=float)
    if p.shape != p_star.shape:
        raise ValueError("state dimensions differ")
    return project_to_simplex(2.0 * p_star - p)


def retention_apply(f, a, b):
    """Affine retention ``a * F_k - b_k``."""
    if a <= 0:
        raise ValueError("retention slope a must be positive")
    b = np.broadcast_to(np.asarray(b, dtype=float), np.shape(f))
    if np.any(b < 0):
        raise ValueError("retention shifts must be non-negative")
    return a * np.asarray(f, dtype=float) - b
