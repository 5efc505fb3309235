"""Population games whose payoffs are per-group prediction accuracies.

A game maps a population state ``p`` to a fitness vector ``F(p)``. The
providers below cover classifiers retrained on the current mixture, the
closed-form k-NN game, Monte-Carlo hard-SVM games, tabulated fitness, and
the stabilized / retention wrappers. Equilibrium search, stability and
fairness measures only rely on ``game.fitness``.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import LinearNDInterpolator
from scipy.optimize import minimize

from .distributions import expected_accuracy_threshold, mixture, threshold_accuracy_curve
from .learners import (
    _knn_acc_a,
    hard_svm_margins,
    knn_fitness,
    oracle_threshold,
    retention_apply,
    soft_svm_solve,
    stabilized_state,
)
from .population import check_state, simplex_grid, support, vertex

EQ_TOL_ANALYTIC = 1e-6
EQ_TOL_STOCHASTIC = 1e-3
EQ_MARGIN_ANALYTIC = 1e-7
EQ_MARGIN_TABLE = 1e-4
DEFAULT_RESOLUTION = {2: 200, 3: 60}
CONTINUUM_RUN = 5


class ExtrapolationError(ValueError):
    """A table game was queried outside the convex hull of its grid."""


def _key(p):
    return np.asarray(p, dtype=float).tobytes()


class Game:
    """Base class: subclasses implement ``_fitness(p)`` on validated states."""

    K: int
    eq_tol = EQ_TOL_ANALYTIC
    eq_margin = EQ_MARGIN_ANALYTIC
    stochastic = False

    def fitness(self, p):
        return self._fitness(check_state(p, K=self.K))

    def fitness_se(self, p):
        """Standard error of the fitness estimate (zeros for exact games)."""
        return np.zeros(self.K)

    def describe(self):
        return {"kind": type(self).__name__}


class _Memo:
    """Per-state cache; dict insertion is atomic under the GIL."""

    def __init__(self):
        self._cache = {}

    def get(self, p, fn):
        k = _key(p)
        hit = self._cache.get(k)
        if hit is None:
            hit = fn(p)
            self._cache[k] = hit
        return hit


class ClassifierGame(Game):
    """Each group's accuracy under a classifier retrained on the mixture.

    Parameters
    ----------
    groups : list of GroupDistribution
    learner : callable
        Maps a mixture distribution to a classifier with ``positive_rate``.
    variant : str
        Learner name; ``"oracle_threshold"`` enables the oracle potential.
    """

    def __init__(self, groups, learner, variant="custom", params=None):
        self.groups = list(groups)
        self.K = len(self.groups)
        self.learner = learner
        self.variant = variant
        self.params = dict(params or {})
        self._memo = _Memo()

    def classifier(self, p):
        p = check_state(p, K=self.K)
        return self._memo.get(p, lambda q: self.learner(mixture(self.groups, q)))

    def _fitness(self, p):
        h = self.classifier(p)
        return np.array([expected_accuracy_threshold(g, h) for g in self.groups])

    def describe(self):
        return {"kind": "analytic", "learner": self.variant, **self.params}


def oracle_game(groups):
    return ClassifierGame(groups, oracle_threshold, "oracle_threshold")


def soft_svm_game(groups, lam, quad_tol=1e-10, reg_scale=1.0):
    learner = lambda d: soft_svm_solve(d, lam, quad_tol, reg_scale).classifier
    return ClassifierGame(
        groups, learner, "soft_svm", {"lambda": lam, "quad_tol": quad_tol, "reg_scale": reg_scale}
    )


class KNNGame(Game):
    """Closed-form two-group k-NN game with label noise."""

    K = 2

    def __init__(self, alpha, beta, k=1):
        knn_fitness(alpha, beta, k, (1.0, 0.0))  # validates parameters
        self.alpha, self.beta, self.k = alpha, beta, k

    def _fitness(self, p):
        pb = float(p[1])
        return np.array([_knn_acc_a(self.alpha, self.beta, self.k, pb),
                         _knn_acc_a(self.alpha, self.beta, self.k, 1.0 - pb)])

    def describe(self):
        return {"kind": "knn_closed_form", "alpha": self.alpha, "beta": self.beta, "k": self.k}


class HardSVMGame(Game):
    """Monte-Carlo hard-SVM game on a fixed common-random-number draw.

    The uniforms are drawn once from ``seed``, so ``fitness`` is a
    deterministic function of ``p`` and repeated queries agree exactly.
    """

    eq_tol = EQ_TOL_STOCHASTIC
    stochastic = True

    def __init__(self, groups, n, trials, seed=0):
        if n < 1 or trials < 1:
            raise ValueError("n and trials must be at least 1")
        self.groups = list(groups)
        self.K = len(self.groups)
        self.n, self.trials, self.seed = n, trials, seed
        self._uniforms = np.random.default_rng(seed).random((trials, n, 3))
        self._memo = _Memo()

    def _stats(self, p):
        def run(q):
            theta = hard_svm_margins(self.groups, self.n, q, self._uniforms)
            accs = np.stack([threshold_accuracy_curve(g, theta) for g in self.groups], axis=1)
            se = accs.std(axis=0, ddof=1) / np.sqrt(self.trials) if self.trials > 1 else 0 * accs[0]
            return accs.mean(axis=0), se

        return self._memo.get(p, run)

    def _fitness(self, p):
        return self._stats(p)[0].copy()

    def fitness_se(self, p):
        return self._stats(check_state(p, K=self.K))[1].copy()

    def describe(self):
        return {"kind": "hard_svm_mc", "n": self.n, "trials": self.trials, "seed": self.seed}


class TableGame(Game):
    """Fitness tabulated on grid states, linearly interpolated in between."""

    eq_margin = EQ_MARGIN_TABLE

    def __init__(self, states, values, se=None, stochastic=False):
        states = np.asarray(states, dtype=float)
        values = np.asarray(values, dtype=float)
        if states.ndim != 2 or states.shape != values.shape:
            raise ValueError("states and values must be matching (n, K) arrays")
        if not np.all(np.isfinite(values)):
            raise ValueError("fitness rows must be finite")
        self.K = states.shape[1]
        if self.K not in (2, 3):
            raise ValueError("table games support K in {2, 3}")
        for s in states:
            check_state(s, K=self.K, atol=1e-9)
        for k in range(self.K):
            if not np.any(np.all(np.abs(states - vertex(self.K, k)) < 1e-12, axis=1)):
                raise ValueError(f"table grid is missing vertex {k}")
        self.states, self.values = states, values
        self.se = None if se is None else np.asarray(se, dtype=float)
        self.stochastic = stochastic or self.se is not None
        if self.stochastic:
            self.eq_tol = EQ_TOL_STOCHASTIC
        if self.K == 2:
            order = np.argsort(states[:, 0], kind="stable")
            self._x = states[order, 0]
            self._y = values[order]
        else:
            self._interp = LinearNDInterpolator(states[:, :2], values)

    def _fitness(self, p):
        if self.K == 2:
            x = p[0]
            if x < self._x[0] - 1e-12 or x > self._x[-1] + 1e-12:
                raise ExtrapolationError(f"state {p.tolist()} outside the table grid")
            return np.array([np.interp(x, self._x, self._y[:, k]) for k in range(2)])
        out = self._interp(p[None, :2])[0]
        if np.any(np.isnan(out)):
            # points on the hull edge can fall out by rounding; nudge inward
            q = p + 1e-12 * (np.full(3, 1 / 3) - p)
            out = self._interp(q[None, :2])[0]
            if np.any(np.isnan(out)):
                raise ExtrapolationError(f"state {p.tolist()} outside the table grid")
        return np.asarray(out, dtype=float)

    def describe(self):
        return {"kind": "table", "rows": int(len(self.states))}


class StabilizedGame(Game):
    """Fitness of a learner trained at the mirrored state ``2 p* - p``."""

    def __init__(self, inner, p_star):
        self.inner = inner
        self.K = inner.K
        self.p_star = check_state(p_star, K=self.K)
        self.eq_tol, self.eq_margin, self.stochastic = inner.eq_tol, inner.eq_margin, inner.stochastic

    def _fitness(self, p):
        return self.inner.fitness(stabilized_state(p, self.p_star))

    def describe(self):
        return {"kind": "stabilized", "p_star": self.p_star.tolist(), "inner": self.inner.describe()}


class RetentionGame(Game):
    """Affine retention ``a * F_k - b_k`` applied to an inner game."""

    def __init__(self, inner, a=1.0, b=None):
        self.inner = inner
        self.K = inner.K
        self.a = float(a)
        self.b = np.zeros(self.K) if b is None else np.asarray(b, dtype=float)
        retention_apply(np.zeros(self.K), self.a, self.b)  # validates
        self.eq_tol, self.eq_margin, self.stochastic = inner.eq_tol, inner.eq_margin, inner.stochastic

    def _fitness(self, p):
        return retention_apply(self.inner.fitness(p), self.a, self.b)

    def describe(self):
        return {"kind": "retention", "a": self.a, "b": self.b.tolist(), "inner": self.inner.describe()}


def constant_game(values):
    """Two- or three-group game with the same fitness everywhere."""
    values = np.asarray(values, dtype=float)
    K = values.size
    states = [vertex(K, k) for k in range(K)]
    return TableGame(states, [values] * K)


# ---------------------------------------------------------------------------
# scalar measures


def average_fitness(p, f):
    p, f = np.asarray(p, dtype=float), np.asarray(f, dtype=float)
    if p.shape != f.shape:
        raise ValueError("state and fitness dimensions differ")
    return float(p @ f)


def replicator_velocity(p, f):
    p, f = np.asarray(p, dtype=float), np.asarray(f, dtype=float)
    return p * (f - p @ f)


def potential_oracle(g, p):
    """Mixture accuracy of the oracle classifier retrained at ``p``."""
    if getattr(g, "variant", None) != "oracle_threshold":
        raise TypeError("potential_oracle needs an oracle-threshold classifier game")
    p = check_state(p, K=g.K)
    return float(expected_accuracy_threshold(mixture(g.groups, p), g.classifier(p)))


def potential_two_group(g, resolution=256):
    """Cumulative trapezoid integral of ``F_A - F_B`` over ``p_A`` in [0, 1].

    Returns ``(p_A, value)`` arrays with ``value[0] = 0``.
    """
    if g.K != 2:
        raise ValueError("potential_two_group needs a two-group game")
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    x = np.linspace(0.0, 1.0, resolution + 1)
    diff = np.array([np.subtract(*g.fitness((xi, 1.0 - xi))) for xi in x])
    return x, cumulative_trapezoid(diff, x, initial=0.0)


def fairness_gap(g, p, eps=1e-9, f=None):
    """Spread of fitness across the supported groups."""
    p = check_state(p, K=g.K)
    f = g.fitness(p) if f is None else np.asarray(f, dtype=float)
    idx = list(support(p, eps))
    return float(f[idx].max() - f[idx].min())


def welfare(p, f, a=1.0, b=None):
    f = np.asarray(f, dtype=float)
    b = np.zeros_like(f) if b is None else b
    return average_fitness(p, retention_apply(f, a, b))


def nash_residual(p, f, eps=1e-9):
    """Largest shortfall of a supported group below the best fitness."""
    idx = list(support(p, eps))
    return float(np.max(f) - np.min(f[idx]))


def restricted_residual(p, f, eps=1e-9):
    idx = list(support(p, eps))
    return float(np.max(f[idx]) - np.min(f[idx]))


# ---------------------------------------------------------------------------
# stability


def _tangent_basis(p, eps):
    """Basis of tangent directions plus a flag per direction: two-sided or inward."""
    K = p.size
    supp = list(support(p, eps))
    out = [k for k in range(K) if k not in supp]
    anchor = supp[-1]
    dirs = []
    for k in supp[:-1]:
        dirs.append((vertex(K, k) - vertex(K, anchor), True))
    centre = np.zeros(K)
    centre[supp] = 1.0 / len(supp)
    for m in out:
        dirs.append((vertex(K, m) - centre, False))
    return dirs


def stability_eigenvalues(g, p_star, h_step=1e-5, eps=1e-9):
    """Eigenvalues of the replicator Jacobian on the simplex tangent space.

    Directions along the support face use central differences; directions
    pointing into the simplex from a face use a one-sided step inward.
    """
    p = check_state(p_star, K=g.K)
    dirs = _tangent_basis(p, eps)
    B = np.stack([d for d, _ in dirs], axis=1)
    v0 = replicator_velocity(p, g.fitness(p))
    cols = []
    for d, central in dirs:
        if central:
            h = min(h_step, 0.5 * float(np.min(p[d != 0])))
            vp = replicator_velocity(p + h * d, g.fitness(p + h * d))
            vm = replicator_velocity(p - h * d, g.fitness(p - h * d))
            dv = (vp - vm) / (2 * h)
        else:
            q = p + h_step * d
            q = np.clip(q, 0.0, None)
            q = q / q.sum()
            dv = (replicator_velocity(q, g.fitness(q)) - v0) / h_step
        cols.append(np.linalg.lstsq(B, dv, rcond=None)[0])
    J = np.stack(cols, axis=1)
    return np.linalg.eigvals(J)


def classify_stability(g, p_star, h_step=1e-5, eq_margin=None):
    """Return ``(label, eigenvalues)`` with label one of
    ``stable``, ``unstable``, ``saddle`` or ``inconclusive``."""
    margin = g.eq_margin if eq_margin is None else eq_margin
    ev = stability_eigenvalues(g, p_star, h_step)
    re = ev.real
    if np.any(np.abs(re) <= margin):
        label = "inconclusive"
    elif np.all(re < 0):
        label = "stable"
    elif np.all(re > 0):
        label = "unstable"
    else:
        label = "saddle"
    return label, ev


# ---------------------------------------------------------------------------
# equilibrium search


@dataclass
class Equilibrium:
    state: np.ndarray
    kind: str  # "nash" or "restricted_only"
    stability: str
    support_size: int
    fitness: np.ndarray
    residual: float
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self):
        return {
            "state": [float(x) for x in self.state],
            "kind": self.kind,
            "stability": self.stability,
            "support_size": self.support_size,
            "fitness": [float(x) for x in self.fitness],
            "residual": float(self.residual),
            "eigenvalues_real": [float(x) for x in np.real(self.eigenvalues)],
        }


class EquilibriumList(list):
    """Equilibria plus search diagnostics."""

    def __init__(self, items=(), continuum=False, diagnostics=()):
        super().__init__(items)
        self.continuum = continuum
        self.diagnostics = list(diagnostics)

    def n_kind(self, kind="nash"):
        return sum(1 for e in self if e.kind == kind)

    def to_dict(self):
        return {
            "equilibria": [e.to_dict() for e in self],
            "nash_count": self.n_kind("nash"),
            "possible_continuum": self.continuum,
            "diagnostics": self.diagnostics,
        }


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _edge_roots(g, i, j, resolution, refine_tol, eq_tol, threads):
    """Roots of ``F_i - F_j`` strictly inside the edge between vertices i and j.

    Returns (roots, continuum_runs) where runs are lists of near-zero grid states.
    """
    K = g.K
    xs = np.linspace(1.0, 0.0, resolution + 1)

    def state(x):
        s = np.zeros(K)
        s[i], s[j] = x, 1.0 - x
        return s

    diff = np.array(_map(lambda x: (lambda f: f[i] - f[j])(g.fitness(state(x))), xs, threads))
    roots = []
    for a in range(resolution):
        da, db = diff[a], diff[a + 1]
        if 0 < a and da == 0.0:
            roots.append(state(xs[a]))
        if da * db < 0:
            lo, hi, flo = xs[a], xs[a + 1], da
            while abs(hi - lo) > refine_tol:
                mid = 0.5 * (lo + hi)
                fm = np.subtract(*g.fitness(state(mid))[[i, j]])
                if fm == 0.0:
                    lo = hi = mid
                    break
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(state(0.5 * (lo + hi)))
    near = np.abs(diff) <= eq_tol
    runs, cur = [], []
    for a in range(1, resolution):
        if near[a]:
            cur.append(state(xs[a]))
        else:
            if len(cur) >= CONTINUUM_RUN:
                runs.append(cur)
            cur = []
    if len(cur) >= CONTINUUM_RUN:
        runs.append(cur)
    return roots, runs


def _interior_candidates(g, resolution, threads):
    """Zeros of the piecewise-linear fitness differences in each grid triangle."""
    n = resolution
    pts = {}
    idx = [(a, b) for a in range(n + 1) for b in range(n + 1 - a)]
    states = [np.array([a, b, n - a - b], dtype=float) / n for a, b in idx]
    vals = _map(g.fitness, states, threads)
    for (a, b), f in zip(idx, vals):
        pts[(a, b)] = np.array([f[0] - f[2], f[1] - f[2]])
    starts = []
    for a in range(n):
        for b in range(n - a):
            tris = [((a, b), (a + 1, b), (a, b + 1))]
            if a + b + 2 <= n:
                tris.append(((a + 1, b), (a, b + 1), (a + 1, b + 1)))
            for tri in tris:
                D = np.stack([pts[t] for t in tri], axis=1)  # 2 x 3
                M = np.vstack([D, np.ones(3)])
                try:
                    lam = np.linalg.solve(M, np.array([0.0, 0.0, 1.0]))
                except np.linalg.LinAlgError:
                    continue
                if np.all(lam >= -1e-12):
                    c = sum(l * np.array([t[0], t[1], n - t[0] - t[1]]) for l, t in zip(lam, tri)) / n
                    if np.all(c > 0):
                        starts.append(c)
    return starts


def _refine_interior(g, start, refine_tol):
    def obj(z):
        q = np.array([z[0], z[1], 1.0 - z[0] - z[1]])
        if np.any(q < 0):
            return 1e3 + float(np.sum(np.minimum(q, 0) ** 2))
        f = g.fitness(q)
        return float((f[0] - f[2]) ** 2 + (f[1] - f[2]) ** 2)

    res = minimize(
        obj, start[:2], method="Nelder-Mead",
        options={"xatol": refine_tol, "fatol": 1e-30, "maxiter": 4000,
                 "initial_simplex": np.array([start[:2], start[:2] + [1e-4, 0], start[:2] + [0, 1e-4]])},
    )
    q = np.clip([res.x[0], res.x[1], 1.0 - res.x[0] - res.x[1]], 0.0, None)
    return q / q.sum()


def find_equilibria(g, grid_resolution=None, refine_tol=1e-10, eq_tol=None, h_step=1e-5,
                    threads=1, eps=1e-9):
    """Locate Nash and restricted equilibria of a two- or three-group game.

    Vertices are always restricted equilibria. Edge equilibria are sign
    changes of the pairwise fitness difference refined by bisection; interior
    three-group equilibria start at zeros of the piecewise-linear fitness
    differences on each grid triangle and are polished with Nelder-Mead.
    Candidates whose residual exceeds ``eq_tol`` are dropped; candidates
    closer than ``max(10 * refine_tol, 1e-6)`` are merged.
    """
    K = g.K
    if K not in (2, 3):
        raise ValueError("equilibrium search supports K in {2, 3}")
    res = grid_resolution or DEFAULT_RESOLUTION[K]
    tol = g.eq_tol if eq_tol is None else eq_tol
    radius = max(10 * refine_tol, 1e-6)

    candidates = [vertex(K, k) for k in range(K)]
    runs = []
    for i in range(K):
        for j in range(i + 1, K):
            roots, r = _edge_roots(g, i, j, res, refine_tol, tol, threads)
            candidates.extend(roots)
            runs.extend(r)
    if K == 3:
        for s in _interior_candidates(g, res, threads):
            candidates.append(_refine_interior(g, s, refine_tol))

    found, diagnostics = [], []
    for c in candidates:
        if any(np.max(np.abs(c - e.state)) < radius for e in found):
            continue
        f = g.fitness(c)
        r_restricted = restricted_residual(c, f, eps)
        if r_restricted > tol:
            diagnostics.append(f"dropped candidate {c.tolist()} with residual {r_restricted:.3g}")
            continue
        r_nash = nash_residual(c, f, eps)
        kind = "nash" if r_nash <= tol else "restricted_only"
        label, ev = classify_stability(g, c, h_step)
        found.append(Equilibrium(c, kind, label, len(support(c, eps)), f,
                                 r_nash if kind == "nash" else r_restricted, ev))

    continuum = bool(runs)
    for run in runs:
        diagnostics.append(f"possible equilibrium continuum over {len(run)} grid states")
        for s in run:
            if any(np.max(np.abs(s - e.state)) < radius for e in found):
                continue
            f = g.fitness(s)
            kind = "nash" if nash_residual(s, f, eps) <= tol else "restricted_only"
            found.append(Equilibrium(s, kind, "inconclusive", len(support(s, eps)), f,
                                     restricted_residual(s, f, eps)))
    found.sort(key=lambda e: tuple(-e.state))
    return EquilibriumList(found, continuum, diagnostics)


# ---------------------------------------------------------------------------
# fitness tables


def fitness_table(g, resolution, threads=1):
    """Tabulate ``g`` over ``simplex_grid``; returns (states, F, SE or None)."""
    states = simplex_grid(g.K, resolution)
    F = np.array(_map(g.fitness, states, threads))
    se = np.array([g.fitness_se(s) for s in states]) if g.stochastic else None
    return np.array(states), F, se


def read_fitness_table(path):
    """Load a ``p_1..p_K,F_1..F_K[,SE_1..SE_K]`` CSV into a :class:`TableGame`.

    Lines starting with ``#`` are comments.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#")) if r]
    header, body = rows[0], np.array(rows[1:], dtype=float)
    K = sum(1 for h in header if h.startswith("p_"))
    expected = [f"p_{k + 1}" for k in range(K)] + [f"F_{k + 1}" for k in range(K)]
    if header[: 2 * K] != expected:
        raise ValueError(f"unexpected table header {header}")
    se = body[:, 2 * K: 3 * K] if len(header) >= 3 * K and header[2 * K] == "SE_1" else None
    return TableGame(body[:, :K], body[:, K: 2 * K], se=se)
