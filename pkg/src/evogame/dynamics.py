"""Selection dynamics on the simplex: step maps, integrators and basins."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .game import StabilizedGame, _map, fairness_gap, find_equilibria
from .population import check_state, normalize, simplex_grid

VARIANTS = ("replicator_continuous", "replicator_discrete", "multiplicative_weights",
            "stochastic_replicator")
MAX_STEP_MOVE = 0.2


class IntegrationError(RuntimeError):
    """A step moved the state too far; the step size is too large."""


@dataclass(frozen=True)
class DynamicsSpec:
    """Integrator settings.

    ``horizon`` is in time units for the continuous replicator and in steps
    for the map-based variants. ``noise_std`` is a scalar or per-group list
    of fitness noise scales used by ``stochastic_replicator``.
    """

    variant: str = "replicator_continuous"
    dt: float = 0.01
    horizon: float = 1e4
    beta: float = 2.0
    eta: float = 0.0
    noise_std: float | tuple = 0.0
    fixed_point_tol: float = 1e-8
    dominance_eps: float = 1e-3
    record_every: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown dynamics variant {self.variant!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if np.any(np.asarray(self.noise_std) < 0):
            raise ValueError("noise_std must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if isinstance(self.noise_std, list):
            object.__setattr__(self, "noise_std", tuple(self.noise_std))

    def to_dict(self):
        d = asdict(self)
        if isinstance(d["noise_std"], tuple):
            d["noise_std"] = list(d["noise_std"])
        return d


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    fitness: np.ndarray
    terminated_by: str
    extra: dict = field(default_factory=dict)

    @property
    def final_state(self):
        return self.states[-1]

    def __len__(self):
        return len(self.times)


def replicator_field(p, f):
    """``p_k (F_k - p.F)``, tangent to the simplex."""
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=float)
    if p.shape != f.shape:
        raise ValueError("state and fitness dimensions differ")
    return p * (f - p @ f)


def replicator_step_discrete(p, f):
    """Discrete-time replicator map ``p_k (F_k + 1) / (p.F + 1)``."""
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=float)
    if np.any(f <= -1.0):
        raise ValueError("discrete replicator needs every fitness > -1")
    return normalize(p * (f + 1.0) / (p @ f + 1.0))


def mw_step(p, f, beta):
    """Multiplicative weights ``p_k beta^F_k``, renormalized."""
    if not beta > 1:
        raise ValueError("beta must exceed 1")
    p = np.asarray(p, dtype=float)
    f = np.asarray(f, dtype=float)
    w = p * np.power(beta, f - np.max(f))
    return normalize(w / w.sum())


def _rk4(g, p, f0, dt):
    k1 = replicator_field(p, f0)
    q = normalize(np.clip(p + 0.5 * dt * k1, 0, None))
    k2 = replicator_field(q, g.fitness(q))
    q = normalize(np.clip(p + 0.5 * dt * k2, 0, None))
    k3 = replicator_field(q, g.fitness(q))
    q = normalize(np.clip(p + dt * k3, 0, None))
    k4 = replicator_field(q, g.fitness(q))
    return p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(g, p0, spec=None, rng=None):
    """Evolve ``p0`` under ``spec`` until horizon, fixed point or dominance.

    A run stops at a fixed point when the replicator field is below
    ``fixed_point_tol`` in max-norm (deterministic variants only) and at
    dominance when one group holds at least ``1 - dominance_eps``.
    """
    spec = spec or DynamicsSpec()
    p = check_state(p0, K=g.K)
    rng = np.random.default_rng(rng)
    continuous = spec.variant == "replicator_continuous"
    stochastic = spec.variant == "stochastic_replicator"
    step_len = spec.dt if continuous else 1.0
    n_steps = int(np.ceil(spec.horizon / step_len - 1e-9))
    noise = spec.eta * np.broadcast_to(np.asarray(spec.noise_std, dtype=float), (g.K,))

    times, states, fits = [], [], []
    f = g.fitness(p)
    t = 0.0

    def record():
        times.append(t)
        states.append(p.copy())
        fits.append(f.copy())

    record()
    reason = "horizon"
    for i in range(1, n_steps + 1):
        if not stochastic and np.max(np.abs(replicator_field(p, f))) < spec.fixed_point_tol:
            reason = "fixed_point"
            break
        if np.max(p) >= 1.0 - spec.dominance_eps:
            reason = "dominance"
            break
        if continuous:
            new = _rk4(g, p, f, spec.dt)
        elif spec.variant == "replicator_discrete":
            new = replicator_step_discrete(p, f)
        elif spec.variant == "multiplicative_weights":
            new = mw_step(p, f, spec.beta)
        else:
            new = replicator_step_discrete(p, f + noise * rng.standard_normal(g.K))
        move = float(np.max(np.abs(new - p)))
        if move > MAX_STEP_MOVE or not np.all(np.isfinite(new)):
            raise IntegrationError(
                f"step {i} at t={t:.6g} moved the state by {move:.3g} "
                f"(limit {MAX_STEP_MOVE}); reduce dt"
            )
        p = normalize(new)
        f = g.fitness(p)
        t = i * step_len
        if i % spec.record_every == 0:
            record()
    if times[-1] != t:
        record()
    return Trajectory(np.array(times), np.array(states), np.array(fits), reason)


def time_to_dominance(traj, eps=0.01):
    """First recorded time at which some group's share is at most ``eps``."""
    hit = np.flatnonzero(np.min(traj.states, axis=1) <= eps)
    return float(traj.times[hit[0]]) if hit.size else None


def basins(g, grid_resolution, spec=None, equilibria=None, label_radius=1e-3, threads=1):
    """Outcome label for every grid initial state.

    Trajectories stopped by dominance are labeled by the dominant vertex;
    fixed points by the nearest equilibrium within ``label_radius``; runs that
    hit the horizon are ``nonconvergent``.

    Returns ``(rows, equilibria)`` where each row is ``(p0, label, time)`` and
    labels are ``eq<i>`` indices into ``equilibria``.
    """
    spec = spec or DynamicsSpec()
    eqs = find_equilibria(g, threads=threads) if equilibria is None else equilibria
    points = np.array([e.state for e in eqs]) if len(eqs) else np.zeros((0, g.K))

    def nearest(q, radius):
        if not len(points):
            return None
        d = np.max(np.abs(points - q), axis=1)
        j = int(np.argmin(d))
        return j if d[j] <= radius else None

    def run(p0):
        traj = integrate(g, p0, spec)
        q = traj.final_state
        if traj.terminated_by == "dominance":
            j = nearest(np.eye(g.K)[int(np.argmax(q))], 1e-12)
        elif traj.terminated_by == "fixed_point":
            j = nearest(q, label_radius)
        else:
            j = None
        label = f"eq{j}" if j is not None else (
            "nonconvergent" if traj.terminated_by == "horizon" else "unmatched")
        return p0, label, float(traj.times[-1])

    rows = _map(run, simplex_grid(g.K, grid_resolution), threads)
    return rows, eqs


def stabilization_outcome_scan(g, estimates, spec=None, p0=None, threads=1):
    """Integrate the mirror-stabilized game once per equilibrium estimate.

    Returns dicts with the estimate, the reached state, the fairness gap
    there, and a ``degenerate`` flag for estimates on the simplex boundary.
    """
    spec = spec or DynamicsSpec()
    p0 = np.full(g.K, 1.0 / g.K) if p0 is None else check_state(p0, K=g.K)

    def run(est):
        est = check_state(est, K=g.K)
        sg = StabilizedGame(g, est)
        traj = integrate(sg, p0, spec)
        q = traj.final_state
        return {
            "estimate": est,
            "reached": q,
            "fairness_gap": fairness_gap(sg, q),
            "terminated_by": traj.terminated_by,
            "degenerate": bool(np.min(est) <= 0.0),
        }

    return _map(run, list(estimates), threads)
