"""One-dimensional labeled group distributions.

A group is a finite mixture of :class:`Component` objects. Each component
carries a feature shape, a clean label and a label-flip probability, which
is enough to evaluate threshold classifiers exactly through shape CDFs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np
from scipy.special import ndtr, ndtri

GAUSS_TAIL = 8.0
WEIGHT_ATOL = 1e-12
_INV_SQRT_2PI = 1.0 / sqrt(2.0 * np.pi)


class UnknownShapeError(ValueError):
    """Raised when a JSON shape names an unsupported kind."""


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float
    kind = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform needs lo < hi, got ({self.lo}, {self.hi})")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    cdf_left = cdf

    def partial_moment(self, x):
        """Integral of ``t * pdf(t)`` from -inf to ``x``."""
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return (x * x - self.lo * self.lo) / (2.0 * (self.hi - self.lo))

    def expectation(self):
        return 0.5 * (self.lo + self.hi)

    def ppf(self, u):
        return self.lo + np.asarray(u) * (self.hi - self.lo)

    def breakpoints(self):
        return (self.lo, self.hi)

    def bounds(self):
        return (self.lo, self.hi)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Triangular:
    """Triangular density on ``[a, b]`` with mode ``c``."""

    a: float
    b: float
    c: float
    kind = "triangular"

    def __post_init__(self):
        if not (self.a <= self.c <= self.b and self.a < self.b):
            raise ValueError(f"triangular needs a <= c <= b and a < b, got {self}")

    def cdf(self, x):
        a, b, c = self.a, self.b, self.c
        x = np.clip(np.asarray(x, dtype=float), a, b)
        left = (x - a) ** 2 / ((b - a) * (c - a)) if c > a else np.zeros_like(x)
        right = 1.0 - (b - x) ** 2 / ((b - a) * (b - c)) if b > c else np.ones_like(x)
        return np.where(x < c, left, right)

    cdf_left = cdf

    def _moment_left(self, x):
        a, b, c = self.a, self.b, self.c
        k = 2.0 / ((b - a) * (c - a))
        return k * ((x**3 - a**3) / 3.0 - a * (x**2 - a**2) / 2.0)

    def _moment_right(self, x):
        a, b, c = self.a, self.b, self.c
        k = 2.0 / ((b - a) * (b - c))
        return k * (b * (x**2 - c**2) / 2.0 - (x**3 - c**3) / 3.0)

    def partial_moment(self, x):
        a, b, c = self.a, self.b, self.c
        x = np.clip(np.asarray(x, dtype=float), a, b)
        at_c = self._moment_left(c) if c > a else 0.0
        left = self._moment_left(np.minimum(x, c)) if c > a else np.zeros_like(x)
        right = self._moment_right(np.maximum(x, c)) if b > c else np.zeros_like(x)
        return np.where(x < c, left, at_c + right)

    def expectation(self):
        return (self.a + self.b + self.c) / 3.0

    def ppf(self, u):
        a, b, c = self.a, self.b, self.c
        u = np.asarray(u, dtype=float)
        fc = (c - a) / (b - a)
        lo = a + np.sqrt(u * (b - a) * (c - a))
        hi = b - np.sqrt((1.0 - u) * (b - a) * (b - c))
        return np.where(u < fc, lo, hi)

    def breakpoints(self):
        return (self.a, self.c, self.b)

    def bounds(self):
        return (self.a, self.b)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b, "c": self.c}


@dataclass(frozen=True)
class Point:
    a: float
    kind = "point"

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.a).astype(float)

    def cdf_left(self, x):
        return (np.asarray(x, dtype=float) > self.a).astype(float)

    def partial_moment(self, x):
        return np.where(np.asarray(x, dtype=float) >= self.a, self.a, 0.0)

    def expectation(self):
        return self.a

    def ppf(self, u):
        return np.full(np.shape(u), self.a, dtype=float)

    def breakpoints(self):
        return (self.a,)

    def bounds(self):
        return (self.a, self.a)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a}


@dataclass(frozen=True)
class Gaussian:
    mean: float
    std: float
    kind = "gaussian"

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("gaussian needs std > 0")

    def cdf(self, x):
        return ndtr((np.asarray(x, dtype=float) - self.mean) / self.std)

    cdf_left = cdf

    def partial_moment(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return self.mean * ndtr(z) - self.std * _INV_SQRT_2PI * np.exp(-0.5 * z * z)

    def expectation(self):
        return self.mean

    def ppf(self, u):
        return self.mean + self.std * ndtri(np.asarray(u, dtype=float))

    def breakpoints(self):
        t = GAUSS_TAIL * self.std
        return (self.mean - t, self.mean, self.mean + t)

    def bounds(self):
        return (-np.inf, np.inf)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "std": self.std}


Shape = Uniform | Triangular | Point | Gaussian


@dataclass(frozen=True)
class Component:
    shape: Shape
    weight: float
    label: int
    flip_prob: float = 0.0

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.label}")
        if self.weight < 0:
            raise ValueError("component weight must be non-negative")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")

    def with_weight(self, weight):
        return Component(self.shape, weight, self.label, self.flip_prob)

    def to_dict(self):
        return {
            "shape": self.shape.to_dict(),
            "weight": self.weight,
            "label": self.label,
            "flip_prob": self.flip_prob,
        }


@dataclass(frozen=True)
class GroupDistribution:
    components: tuple[Component, ...] = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a group distribution needs at least one component")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > WEIGHT_ATOL:
            raise ValueError(f"component weights sum to {total!r}, not 1")

    def __len__(self):
        return len(self.components)

    def breakpoints(self):
        pts = sorted({float(x) for c in self.components for x in c.shape.breakpoints()})
        return pts

    def class_mass(self, label):
        """Probability of observing ``label`` after label noise."""
        m = 0.0
        for c in self.components:
            m += c.weight * ((1.0 - c.flip_prob) if c.label == label else c.flip_prob)
        return m

    def merged(self):
        """Combine components that share shape and clean label.

        The merged flip probability is the weight-averaged flip probability,
        e.g. mixing a noisy copy (flip ``a``, weight ``1-q``) with a clean copy
        (weight ``q``) yields flip ``(1-q) * a``. Zero-weight components are
        dropped.
        """
        order, acc = [], {}
        for c in self.components:
            key = (c.shape, c.label)
            if key not in acc:
                order.append(key)
                acc[key] = [0.0, 0.0]
            acc[key][0] += c.weight
            acc[key][1] += c.weight * c.flip_prob
        comps = []
        for key in order:
            w, wf = acc[key]
            if w > 0:
                comps.append(Component(key[0], w, key[1], wf / w))
        return GroupDistribution(tuple(comps))

    def to_dict(self):
        return {"components": [c.to_dict() for c in self.components]}


def shape_from_dict(d):
    kind = d.get("kind")
    if kind == "uniform":
        return Uniform(float(d["lo"]), float(d["hi"]))
    if kind == "triangular":
        return Triangular(float(d["a"]), float(d["b"]), float(d["c"]))
    if kind == "point":
        return Point(float(d["a"]))
    if kind == "gaussian":
        return Gaussian(float(d["mean"]), float(d["std"]))
    raise UnknownShapeError(f"unknown shape kind {kind!r}")


def group_from_dict(d):
    comps = []
    for c in d["components"]:
        comps.append(
            Component(
                shape_from_dict(c["shape"]),
                float(c["weight"]),
                int(c["label"]),
                float(c.get("flip_prob", 0.0)),
            )
        )
    return GroupDistribution(tuple(comps))


def mixture(groups, p):
    """Mixture distribution sum_k p_k D_k as one flat component list."""
    p = np.asarray(p, dtype=float)
    if len(groups) != p.size:
        raise ValueError(f"{len(groups)} groups but state has {p.size} entries")
    comps = [c.with_weight(float(pk) * c.weight) for g, pk in zip(groups, p) for c in g.components]
    total = sum(c.weight for c in comps)
    # renormalize away round-off so the invariant holds to 1e-12
    comps = [c.with_weight(c.weight / total) for c in comps]
    return GroupDistribution(tuple(comps))


def _positive_rate(shape, theta, orientation):
    """P(h(x) = +1) for h(x) = orientation * sign(x - theta), sign(0) = +1."""
    right = 1.0 - shape.cdf_left(theta)
    return right if orientation == 1 else 1.0 - right


def component_accuracy(comp, positive_rate):
    clean = positive_rate if comp.label == 1 else 1.0 - positive_rate
    return comp.flip_prob + (1.0 - 2.0 * comp.flip_prob) * clean


def expected_accuracy_threshold(d, h):
    """Exact accuracy of a classifier on ``d``.

    ``h`` is anything with a ``positive_rate(shape)`` method (the classifier
    types in :mod:`evogame.learners`). Array-valued thresholds broadcast.
    """
    total = 0.0
    for c in d.components:
        if c.weight == 0.0:
            continue
        total = total + c.weight * component_accuracy(c, h.positive_rate(c.shape))
    return total


def threshold_accuracy_curve(d, thetas):
    """Accuracy of ``sign(x - theta)`` (orientation +1) for an array of thresholds.

    The orientation -1 classifier predicts the exact opposite everywhere, so its
    accuracy is ``1 - curve``.
    """
    thetas = np.asarray(thetas, dtype=float)
    out = np.zeros_like(thetas)
    for c in d.components:
        if c.weight == 0.0:
            continue
        out += c.weight * component_accuracy(c, _positive_rate(c.shape, thetas, 1))
    return out


def sample_from_uniforms(d, u):
    """Map uniforms of shape ``(..., 3)`` to samples ``(x, y)``.

    The three uniforms pick the component, the feature and the label flip.
    Reusing the same uniforms across distributions gives common random
    numbers.
    """
    u = np.asarray(u, dtype=float)
    weights = np.array([c.weight for c in d.components])
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    idx = np.minimum(np.searchsorted(cum, u[..., 0], side="right"), len(weights) - 1)
    x = np.empty(u.shape[:-1])
    y = np.empty(u.shape[:-1], dtype=int)
    for j, c in enumerate(d.components):
        m = idx == j
        if not np.any(m):
            continue
        x[m] = c.shape.ppf(u[..., 1][m])
        flipped = u[..., 2][m] < c.flip_prob
        y[m] = np.where(flipped, -c.label, c.label)
    return x, y


def sample(d, n, rng):
    """Draw ``n`` i.i.d. labeled samples; returns feature and label arrays."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(rng)
    if n == 0:
        return np.empty(0), np.empty(0, dtype=int)
    return sample_from_uniforms(d, rng.random((n, 3)))


def min_support_gap(d):
    """Smallest gap between supports of components with different shapes.

    Returns ``inf`` for a single shape and a non-positive number when supports
    touch or overlap (always the case with Gaussian components).
    """
    intervals = sorted({c.shape.bounds() for c in d.components})
    gap = np.inf
    for (_, hi), (lo2, _) in zip(intervals, intervals[1:]):
        gap = min(gap, lo2 - hi)
    return gap
