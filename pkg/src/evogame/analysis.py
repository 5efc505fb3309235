"""Studies built from games and dynamics: bifurcations, coexistence maps,
fairness timelines and invariant-check reports."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsSpec, integrate
from .game import (
    KNNGame,
    StabilizedGame,
    _map,
    classify_stability,
    fairness_gap,
    find_equilibria,
    potential_oracle,
)
from .population import support

NEAR_CRITICAL = 0.01


@dataclass
class BifurcationResult:
    param: str
    values: list
    equilibria: list  # EquilibriumList or None per value
    errors: list
    near_critical: list

    def counts(self):
        return [None if e is None else e.n_kind("nash") for e in self.equilibria]

    def to_dict(self):
        out = []
        for v, eq, err, nc in zip(self.values, self.equilibria, self.errors, self.near_critical):
            entry = {"value": v, "nash_count": None, "equilibria": [], "error": err,
                     "near_critical": nc}
            if eq is not None:
                entry.update(eq.to_dict())
            out.append(entry)
        return {"param": self.param, "results": out}


def bifurcation_scan(build_game, param_name, values, threads=1, **search):
    """Run the equilibrium search on a rebuilt game for each parameter value.

    ``build_game(value)`` returns the game for one value. Failures are
    recorded per value and do not stop the scan. A value is flagged
    ``near_critical`` when any equilibrium's stability is inconclusive.
    """
    values = [float(v) for v in values]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("parameter values must be strictly increasing")

    def one(v):
        try:
            eqs = find_equilibria(build_game(v), **search)
            return eqs, None
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    runs = _map(one, values, threads)
    eqs = [r[0] for r in runs]
    errs = [r[1] for r in runs]
    near = [e is not None and any(x.stability == "inconclusive" for x in e) for e in eqs]
    return BifurcationResult(param_name, values, eqs, errs, near)


def knn_coexistence_region(beta, alpha_grid, k=1, threads=1):
    """Detected stable-coexistence flag per alpha against the closed-form test.

    Returns dicts with ``alpha``, ``simulated``, ``predicted`` (the
    ``alpha < 1 - 1/(2 beta)`` condition) and ``near_critical``.
    """
    boundary = 1.0 - 1.0 / (2.0 * beta)

    def one(alpha):
        eqs = find_equilibria(KNNGame(alpha, beta, k), grid_resolution=50)
        sim = any(e.support_size == 2 and e.kind == "nash" and e.stability == "stable" for e in eqs)
        return {
            "alpha": float(alpha),
            "beta": float(beta),
            "simulated": bool(sim),
            "predicted": bool(0.0 < alpha < boundary),
            "near_critical": bool(abs(alpha - boundary) < NEAR_CRITICAL),
        }

    return _map(one, list(alpha_grid), threads)


@dataclass
class FairnessTimeline:
    times: np.ndarray
    fitness: np.ndarray
    supports: list
    disparity: np.ndarray
    masked_exclusion: bool = False
    exit_events: list = field(default_factory=list)

    def rows(self):
        for t, f, s, d in zip(self.times, self.fitness, self.supports, self.disparity):
            yield [t, *f, "|".join(str(k + 1) for k in s), d]

    def header(self):
        K = self.fitness.shape[1]
        return ["t", *[f"F_{k + 1}" for k in range(K)], "support", "disparity"]


def fairness_timeline(traj, g=None, eps=0.01):
    """Per-step disparity over groups holding more than ``eps`` of the population.

    ``masked_exclusion`` is set when a group leaves the support and the
    disparity among the remaining groups at that moment is below its
    initial value.
    """
    fits = traj.fitness if g is None else np.array([g.fitness(p) for p in traj.states])
    supports, disp = [], []
    for p, f in zip(traj.states, fits):
        s = support(p, eps)
        supports.append(s)
        disp.append(float(f[list(s)].max() - f[list(s)].min()))
    disp = np.array(disp)
    events = []
    for i in range(1, len(supports)):
        for k in set(supports[i - 1]) - set(supports[i]):
            events.append({"group": k, "time": float(traj.times[i]), "index": i,
                           "disparity_before": float(disp[0]), "disparity_after": float(disp[i])})
    masked = any(e["disparity_after"] < e["disparity_before"] for e in events)
    return FairnessTimeline(traj.times, fits, supports, disp, masked, events)


# ---------------------------------------------------------------------------
# invariant report


def _check(name, passed, value=None, detail=""):
    return {"name": name, "passed": passed, "value": value, "detail": detail}


def _random_simplex(rng, K, n):
    return rng.dirichlet(np.ones(K), size=n)


def theorem_report(g, *, rng=0, segments=3, segment_points=201, trajectories=10,
                   steps=400, fairness_tol=1e-6, search=None, threads=1):
    """Run the oracle-game invariant suite on one game and collect results.

    Checks: convexity of the retrained-oracle potential along random
    segments, monotone population accuracy along discrete-replicator
    trajectories, stable equilibria at vertices, interior equilibria
    unstable, fairness at multi-group Nash equilibria, and mirror
    stabilization of a two-group interior equilibrium. Checks that do not
    apply to the game are reported with ``passed = None``.
    """
    rng = np.random.default_rng(rng)
    search = dict(search or {})
    is_oracle = getattr(g, "variant", None) == "oracle_threshold"
    checks = []

    if is_oracle:
        worst = np.inf
        for a, b in zip(_random_simplex(rng, g.K, segments), _random_simplex(rng, g.K, segments)):
            ts = np.linspace(0.0, 1.0, segment_points)
            vals = np.array(_map(lambda t: potential_oracle(g, (1 - t) * a + t * b), ts, threads))
            worst = min(worst, float(np.min(vals[2:] - 2 * vals[1:-1] + vals[:-2])))
        checks.append(_check("potential_convexity", worst >= -1e-9, worst,
                             "minimum second difference along random segments"))

        spec = DynamicsSpec(variant="replicator_discrete", horizon=steps)

        def smallest_change(p0):
            traj = integrate(g, p0, spec)
            pot = np.array([potential_oracle(g, p) for p in traj.states])
            return float(np.min(np.diff(pot))) if len(pot) > 1 else np.inf

        starts = _random_simplex(rng, g.K, trajectories)
        worst = min(_map(smallest_change, starts, threads), default=np.inf)
        checks.append(_check("accuracy_monotone", worst >= -1e-8, worst,
                             "smallest one-step change of population accuracy"))
    else:
        checks.append(_check("potential_convexity", None, None, "needs an oracle game"))
        checks.append(_check("accuracy_monotone", None, None, "needs an oracle game"))

    eqs = find_equilibria(g, threads=threads, **search)
    if eqs.continuum:
        checks.append(_check("stable_equilibria_are_vertices", None, None,
                             "possible equilibrium continuum; groups share an oracle"))
    else:
        bad = [e.state.tolist() for e in eqs if e.stability == "stable" and e.support_size > 1]
        checks.append(_check("stable_equilibria_are_vertices", (not bad) if is_oracle else None,
                             bad, "" if is_oracle else "informational; not an oracle game"))
    interior = [e for e in eqs if e.support_size == g.K and e.stability != "inconclusive"]
    bad = [e.state.tolist() for e in interior if e.stability != "unstable"]
    detail = f"{len(interior)} interior equilibria"
    if not is_oracle:
        detail += "; informational, not an oracle game"
    checks.append(_check("interior_equilibria_unstable", (not bad) if is_oracle else None,
                         bad, detail))

    gaps = [fairness_gap(g, e.state, f=e.fitness) for e in eqs
            if e.kind == "nash" and e.support_size > 1]
    worst = max(gaps) if gaps else 0.0
    checks.append(_check("fairness_at_nash", worst <= fairness_tol, worst,
                         f"largest gap over {len(gaps)} multi-group Nash equilibria"))

    unstable = [e for e in eqs if g.K == 2 and e.support_size == 2 and e.stability == "unstable"]
    if unstable:
        p_star = unstable[0].state
        sg = StabilizedGame(g, p_star)
        label, _ = classify_stability(sg, p_star)
        p0 = np.clip(p_star + np.array([0.05, -0.05]), 0.01, 0.99)
        traj = integrate(sg, p0 / p0.sum(), DynamicsSpec(variant="replicator_discrete", horizon=5000))
        dist = float(np.max(np.abs(traj.final_state - p_star)))
        checks.append(_check("stabilization", label == "stable" and dist <= 1e-3, dist,
                             f"mirror-stabilized equilibrium is {label}"))
    else:
        checks.append(_check("stabilization", None, None, "no unstable two-group interior equilibrium"))

    decided = [c["passed"] for c in checks if c["passed"] is not None]
    return {
        "game": g.describe(),
        "checks": checks,
        "equilibria": eqs.to_dict(),
        "all_passed": bool(all(decided)),
    }
