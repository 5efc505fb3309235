"""Finite-population agent models whose mean field is the replicator equation.

Three behavioral rules are provided: invitation/dropout reproduction,
pairwise proportional imitation, and multiplicative-weights budget
allocation. :func:`run_micro` drives any of them with fitness queried at
the empirical group proportions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import Trajectory, mw_step
from .population import simplex_grid


class ExtinctionError(RuntimeError):
    """The total population reached zero."""


@dataclass(frozen=True)
class ReproductionModel:
    """Invitations at rate ``lambda_rate*dt*alpha_invite*acc``; dropouts w.p. ``lambda_rate*dt*beta_drop``."""

    lambda_rate: float = 1.0
    alpha_invite: float = 0.5
    beta_drop: float = 0.3
    dt: float = 0.1
    model = "reproduction"

    def __post_init__(self):
        if not self.lambda_rate > 0:
            raise ValueError("lambda_rate must be positive")
        for name in ("alpha_invite", "beta_drop"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.lambda_rate * self.dt * self.beta_drop > 1.0:
            raise ValueError("dropout probability lambda_rate*dt*beta_drop exceeds 1")

    def matched_fitness(self, acc):
        """Replicator fitness with the same mean-field growth rates."""
        return self.lambda_rate * (self.alpha_invite * np.asarray(acc) - self.beta_drop)

    def to_dict(self):
        return {"model": self.model, **asdict(self)}


@dataclass(frozen=True)
class ImitationModel:
    """Pairwise proportional imitation; ``scale=None`` fixes it from the game."""

    pairs_per_step: int = 1000
    scale: float | None = None
    model = "imitation"

    def __post_init__(self):
        if self.pairs_per_step < 1:
            raise ValueError("pairs_per_step must be at least 1")
        if self.scale is not None and not self.scale > 0:
            raise ValueError("scale must be positive")

    def to_dict(self):
        return {"model": self.model, **asdict(self)}


@dataclass(frozen=True)
class MWAllocationModel:
    """Budget shares reweighted by ``beta ** (revenue*conversion*acc_k - costs_k)``."""

    beta: float = 2.0
    revenue: float = 1.0
    costs: tuple = ()
    conversion: float = 1.0
    budget: float = 1.0
    model = "mw_allocation"

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError("beta must exceed 1")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        object.__setattr__(self, "costs", tuple(float(c) for c in self.costs))

    def utility(self, acc):
        costs = np.asarray(self.costs) if self.costs else np.zeros(len(acc))
        return self.revenue * self.conversion * np.asarray(acc) - costs

    def to_dict(self):
        d = {"model": self.model, **asdict(self)}
        d["costs"] = list(self.costs)
        return d


def reproduction_step(counts, acc, model, rng):
    """One step of Poisson invitations and binomial dropouts per group.

    The expected count is multiplied by ``1 + lambda*dt*(alpha*acc_k - beta)``.
    """
    counts = np.asarray(counts, dtype=np.int64)
    acc = np.asarray(acc, dtype=float)
    if np.any(acc < 0) or np.any(acc > 1):
        raise ValueError("accuracies must lie in [0, 1]")
    rate = model.lambda_rate * model.dt
    born = rng.poisson(counts * rate * model.alpha_invite * acc)
    gone = rng.binomial(counts, rate * model.beta_drop)
    return counts + born - gone


def imitation_step(counts, f, pairs, rng, scale):
    """Apply ``pairs`` imitation encounters against start-of-batch proportions.

    An ordered pair (i, j) of distinct agents is drawn with probability
    ``N_i N_j / (N (N-1))``; agent i switches to j's group with probability
    ``scale * max(0, F_j - F_i)``. Switch counts are drawn jointly from one
    multinomial, so total population is conserved exactly.
    """
    counts = np.asarray(counts, dtype=np.int64).copy()
    f = np.asarray(f, dtype=float)
    N = int(counts.sum())
    K = counts.size
    if N < 2:
        return counts
    probs, moves = [], []
    for i in range(K):
        for j in range(K):
            if i != j:
                gain = scale * max(0.0, f[j] - f[i])
                if gain > 1.0 + 1e-12:
                    raise ValueError("scale * fitness difference exceeds 1")
                probs.append(counts[i] * counts[j] / (N * (N - 1.0)) * min(gain, 1.0))
                moves.append((i, j))
    rest = max(0.0, 1.0 - sum(probs))
    drawn = rng.multinomial(pairs, probs + [rest])
    for (i, j), n in zip(moves, drawn[:-1]):
        n = min(int(n), int(counts[i]))
        counts[i] -= n
        counts[j] += n
    return counts


def imitation_scale(g, resolution=20):
    """``1 / max |F_i - F_j|`` over a simplex grid (1 for constant games)."""
    spread = 0.0
    for s in simplex_grid(g.K, resolution):
        f = g.fitness(s)
        spread = max(spread, float(np.max(f) - np.min(f)))
    return 1.0 / spread if spread > 0 else 1.0


def run_micro(g, init, model, horizon, rng):
    """Simulate an agent model and record empirical proportions.

    Time is measured in mean-field units: ``dt`` per reproduction step,
    ``pairs * scale / N`` per imitation batch and 1 per allocation round.
    The returned trajectory carries the population totals in ``extra["N"]``.
    """
    rng = np.random.default_rng(rng)
    is_mw = isinstance(model, MWAllocationModel)
    counts = np.asarray(init, dtype=float if is_mw else np.int64)
    if counts.ndim != 1 or counts.size != g.K:
        raise ValueError(f"expected {g.K} group counts")
    if np.any(counts < 0) or counts.sum() <= 0:
        raise ValueError("counts must be non-negative with a positive total")
    if isinstance(model, ImitationModel):
        scale = model.scale if model.scale is not None else imitation_scale(g)
    if is_mw:
        counts = counts / counts.sum() * model.budget

    if isinstance(model, ReproductionModel):
        step = model.dt
    elif isinstance(model, ImitationModel):
        step = model.pairs_per_step * scale / counts.sum()  # N is conserved
    else:
        step = 1.0
    n_steps = int(np.ceil(horizon / step - 1e-9))
    i, t = 0, 0.0
    times, states, fits, totals = [], [], [], []
    reason = "horizon"
    while True:
        N = counts.sum()
        p = counts / N
        f = g.fitness(p)
        times.append(t)
        states.append(p)
        fits.append(f)
        totals.append(float(N))
        if i >= n_steps:
            break
        if np.max(p) == 1.0 and not is_mw:
            reason = "absorbed"
            break
        if isinstance(model, ReproductionModel):
            counts = reproduction_step(counts, f, model, rng)
        elif isinstance(model, ImitationModel):
            counts = imitation_step(counts, f, model.pairs_per_step, rng, scale)
        else:
            counts = mw_step(p, model.utility(f), model.beta) * model.budget
        i += 1
        t = i * step
        if counts.sum() <= 0:
            raise ExtinctionError(f"population went extinct at t={t:.6g}")
    return Trajectory(np.array(times), np.array(states), np.array(fits), reason,
                      {"N": np.array(totals)})
