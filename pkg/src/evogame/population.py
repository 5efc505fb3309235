"""Simplex arithmetic for population states.

States are plain 1-D float arrays on the probability simplex. The helpers
here validate, project and enumerate them; every other module goes through
:func:`check_state` before trusting an input vector.
"""
from __future__ import annotations

import itertools
import json
from math import comb

import numpy as np

DEFAULT_SUPPORT_EPS = 1e-9
CLAMP_EPS = 1e-15
SIMPLEX_ATOL = 1e-12
DESERIALIZE_ATOL = 1e-6


class SimplexError(ValueError):
    """Raised for vectors that are not valid population states."""


def normalize(v):
    """Clamp tiny or negative weights to zero and renormalize."""
    v = np.asarray(v, dtype=float).copy()
    v[v < CLAMP_EPS] = 0.0
    total = v.sum()
    if total <= 0.0:
        raise SimplexError("cannot normalize a vector with no positive mass")
    return v / total


def check_state(p, K=None, atol=SIMPLEX_ATOL):
    """Validate a population state and return it as a normalized array.

    Parameters
    ----------
    p : array-like
        Candidate weights.
    K : int, optional
        Required number of groups.
    atol : float
        Allowed deviation of the weight sum from 1 before rejection.
    """
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise SimplexError(f"state must be a non-empty 1-D vector, got shape {arr.shape}")
    if K is not None and arr.size != K:
        raise SimplexError(f"expected {K} groups, got {arr.size}")
    total, low = float(arr.sum()), float(arr.min())
    if not np.isfinite(total):
        raise SimplexError("state has non-finite entries")
    if low < -atol:
        raise SimplexError(f"state has negative weights: {arr.tolist()}")
    if abs(total - 1.0) > atol:
        raise SimplexError(f"weights sum to {total!r}, not 1")
    if low >= CLAMP_EPS and total == 1.0:
        return arr.copy()
    return normalize(np.clip(arr, 0.0, None))


def support(p, eps=DEFAULT_SUPPORT_EPS):
    """Indices whose weight is strictly above ``eps``."""
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    return tuple(int(i) for i in np.flatnonzero(np.asarray(p) > eps))


def project_to_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex.

    Uses the sort-and-threshold algorithm (Held et al.; Duchi et al. 2008).
    Points already on the simplex are returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("expected a non-empty 1-D vector")
    if np.all(v >= 0.0) and v.sum() == 1.0:
        return v.copy()
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, v.size + 1)
    cond = u - (css - 1.0) / ks > 0
    rho = ks[cond][-1]
    tau = (css[rho - 1] - 1.0) / rho
    out = np.maximum(v - tau, 0.0)
    return out / out.sum()


def simplex_grid(K, resolution):
    """All states whose weights are multiples of ``1/resolution``.

    States are ordered lexicographically by their integer numerators with the
    first coordinate descending, so for K=2 the list runs from (1, 0) to (0, 1).
    """
    if K not in (2, 3):
        raise ValueError("simplex_grid supports K in {2, 3}")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    states = []
    for head in itertools.product(range(resolution, -1, -1), repeat=K - 1):
        rest = resolution - sum(head)
        if rest < 0:
            continue
        states.append(np.array([*head, rest], dtype=float) / resolution)
    assert len(states) == comb(resolution + K - 1, K - 1)
    return states


def vertex(K, k):
    e = np.zeros(K)
    e[k] = 1.0
    return e


def state_to_json(p):
    return json.dumps([float(x) for x in p])


def state_from_json(text):
    """Parse a JSON array into a state; off-simplex by more than 1e-6 is rejected."""
    data = json.loads(text) if isinstance(text, str) else text
    return check_state(data, atol=DESERIALIZE_ATOL)
