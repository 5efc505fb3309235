import numpy as np
import pytest

from evogame import scenarios
from evogame.dynamics import DynamicsSpec, integrate
from evogame.distributions import expected_accuracy_threshold, mixture
from evogame.game import (
    ClassifierGame, HardSVMGame, KNNGame, RetentionGame, StabilizedGame, TableGame,
    average_fitness, classify_stability, constant_game, fairness_gap, find_equilibria,
    fitness_table, nash_residual, oracle_game, potential_oracle, potential_two_group,
    replicator_velocity, soft_svm_game, welfare,
)
from evogame.learners import Classifier1D, knn_fitness, oracle_threshold
from evogame.population import simplex_grid


def test_table_game_constant_interpolation():
    g = TableGame([[1, 0], [0, 1]], [[0.9, 0.7], [0.9, 0.7]])
    assert np.allclose(g.fitness([0.5, 0.5]), [0.9, 0.7])
    assert fairness_gap(g, [0.5, 0.5]) == pytest.approx(0.2, abs=1e-15)
    assert fairness_gap(g, [1.0, 0.0]) == 0.0


def test_table_game_validation():
    with pytest.raises(ValueError):
        TableGame([[0.5, 0.5], [0, 1]], [[1, 0], [1, 0]])
    with pytest.raises(ValueError):
        TableGame([[1, 0], [0, 1]], [[1, np.nan], [1, 0]])


def test_table_game_three_groups_linear():
    states = simplex_grid(3, 4)
    values = states @ np.array([[1.0, 0.0, 0.5], [0.2, 0.3, 0.1], [0.0, 0.4, 0.9]])
    g = TableGame(states, values)
    p = np.array([0.23, 0.41, 0.36])
    assert np.allclose(g.fitness(p), p @ np.array([[1.0, 0.0, 0.5], [0.2, 0.3, 0.1],
                                                   [0.0, 0.4, 0.9]]), atol=1e-12)


def test_oracle_game_perfect_classifier(separable_groups):
    g = oracle_game(separable_groups)
    for x in (0.0, 0.2, 0.5, 1.0):
        assert np.allclose(g.fitness([x, 1 - x]), [1.0, 1.0])


def test_knn_game_matches_closed_form():
    g = KNNGame(0.2, 0.8, 1)
    assert np.allclose(g.fitness([1.0, 0.0]), [0.744, 0.8], atol=1e-12)
    for x in np.linspace(0, 1, 7):
        assert np.array_equal(g.fitness([x, 1 - x]), knn_fitness(0.2, 0.8, 1, [x, 1 - x]))


def test_fitness_is_group_accuracy_of_retrained_oracle():
    groups = scenarios.gaussian_skewed()
    g = oracle_game(groups)
    p = np.array([0.3, 0.7])
    h = oracle_threshold(mixture(groups, p))
    ref = [expected_accuracy_threshold(d, h) for d in groups]
    assert np.allclose(g.fitness(p), ref, atol=0)


def test_average_fitness_examples():
    assert average_fitness([0.5, 0.5], [1, 0]) == 0.5
    assert average_fitness([1.0, 0.0], [0.3, 0.9]) == 0.3
    assert average_fitness(np.ones(3) / 3, [0.7] * 3) == pytest.approx(0.7, abs=1e-15)


def test_replicator_velocity_positive_correlation():
    rng = np.random.default_rng(0)
    for _ in range(200):
        p = rng.dirichlet(np.ones(3))
        f = rng.random(3)
        v = replicator_velocity(p, f)
        assert abs(v.sum()) < 1e-15
        if np.linalg.norm(v) > 0:
            assert v @ f > 0


def test_potential_oracle_examples(separable_groups):
    groups = scenarios.gaussian_pair()
    g = oracle_game(groups)
    assert potential_oracle(g, [1, 0]) == pytest.approx(g.fitness([1, 0])[0], abs=1e-15)
    same = oracle_game([groups[0], groups[0]])
    vals = [potential_oracle(same, [x, 1 - x]) for x in np.linspace(0, 1, 5)]
    assert np.ptp(vals) < 1e-12
    with pytest.raises(TypeError):
        potential_oracle(KNNGame(0.2, 0.8), [0.5, 0.5])


def test_potential_oracle_overlapping_uniforms_scan():
    from conftest import one_group
    from evogame.distributions import Uniform
    a = one_group((Uniform(-1, 0.5), 1.0, -1))
    b = one_group((Uniform(-0.5, 1), 1.0, 1))
    g = oracle_game([a, b])
    d = mixture([a, b], [0.5, 0.5])
    thetas = np.linspace(-1, 1, 10001)
    best = max(expected_accuracy_threshold(d, Classifier1D(t, o)) for t in thetas for o in (1, -1))
    assert potential_oracle(g, [0.5, 0.5]) == pytest.approx(best, abs=1e-12)


def test_potential_two_group_examples():
    x, v = potential_two_group(constant_game([0.4, 0.4]), 16)
    assert np.all(v == 0)
    x, v = potential_two_group(constant_game([1.0, 0.0]), 16)
    assert np.allclose(v, x, atol=1e-15)


def test_potential_two_group_matches_oracle_potential(gaussian_game):
    x, v = potential_two_group(gaussian_game, 4096)
    idx = np.arange(0, 4097, 128)
    ref = np.array([potential_oracle(gaussian_game, [xi, 1 - xi]) for xi in x[idx]])
    shifted = ref - ref[0]
    assert np.max(np.abs(v[idx] - shifted)) <= 1e-5


def test_welfare_examples():
    p, f = np.array([0.3, 0.7]), np.array([0.9, 0.6])
    assert welfare(p, f) == average_fitness(p, f)
    assert welfare([0.2, 0.8], [0.9, 0.9], 1.0, np.array([0.1, 0.1])) == pytest.approx(0.8)


def test_welfare_non_decreasing_along_oracle_trajectory(gaussian_game):
    traj = integrate(gaussian_game, [0.45, 0.55], DynamicsSpec("replicator_discrete", horizon=300))
    w = [welfare(p, f) for p, f in zip(traj.states, traj.fitness)]
    assert np.min(np.diff(w)) >= -1e-12


def test_nash_residual():
    assert nash_residual(np.array([1.0, 0.0]), np.array([0.9, 0.95])) == pytest.approx(0.05)
    assert nash_residual(np.array([0.5, 0.5]), np.array([0.9, 0.9])) == 0.0


def test_equilibria_constant_game():
    eqs = find_equilibria(constant_game([1.0, 0.0]))
    nash = [e for e in eqs if e.kind == "nash"]
    assert len(nash) == 1
    assert np.array_equal(nash[0].state, [1.0, 0.0])
    assert nash[0].stability == "stable"
    label, _ = classify_stability(constant_game([1.0, 0.0]), np.array([1.0, 0.0]))
    assert label == "stable"


def test_equilibria_knn():
    eqs = find_equilibria(KNNGame(0.2, 0.8, 1))
    interior = [e for e in eqs if e.support_size == 2]
    assert len(interior) == 1
    assert np.allclose(interior[0].state, [0.5, 0.5], atol=1e-6)
    assert interior[0].stability == "stable"
    assert interior[0].kind == "nash"


def test_equilibria_oracle_interior_unstable(gaussian_game):
    eqs = find_equilibria(gaussian_game)
    interior = [e for e in eqs if e.support_size == 2]
    assert len(interior) == 1
    assert interior[0].stability == "unstable"
    assert all(e.stability == "stable" for e in eqs if e.support_size == 1 and e.kind == "nash")


def test_equilibria_soft_svm_five():
    g = soft_svm_game(scenarios.soft_svm_groups(0.75), 1000.0, reg_scale=1 / 3000)
    eqs = find_equilibria(g)
    assert eqs.n_kind("nash") == 5
    states = sorted(e.state[0] for e in eqs)
    assert states[0] == 0.0 and states[-1] == 1.0
    mid = [e for e in eqs if abs(e.state[0] - 0.5) < 0.02]
    assert len(mid) == 1 and mid[0].stability == "stable"


def test_equilibria_three_groups_and_threads():
    g = oracle_game(scenarios.three_group_oracle())
    one = find_equilibria(g, grid_resolution=20, threads=1)
    four = find_equilibria(g, grid_resolution=20, threads=4)
    assert [e.state.tolist() for e in one] == [e.state.tolist() for e in four]
    # edge equilibria may be saddles; only vertices are stable
    assert all(e.support_size == 1 for e in one if e.stability == "stable")
    assert all(e.stability in ("unstable", "saddle") for e in one if e.support_size > 1)


def test_fairness_gap_at_detected_nash():
    for g in (KNNGame(0.2, 0.8), oracle_game(scenarios.triangular_pair())):
        for e in find_equilibria(g):
            if e.kind == "nash" and e.support_size > 1:
                assert fairness_gap(g, e.state) <= g.eq_tol


def test_identical_groups_flag_continuum():
    grp = scenarios.gaussian_pair()[0]
    eqs = find_equilibria(oracle_game([grp, grp]))
    assert eqs.continuum


def test_stabilized_and_retention_wrappers(gaussian_game):
    sg = StabilizedGame(gaussian_game, [0.5, 0.5])
    assert np.allclose(sg.fitness([0.6, 0.4]), gaussian_game.fitness([0.4, 0.6]))
    label, _ = classify_stability(sg, np.array([0.5, 0.5]))
    assert label == "stable"
    rg = RetentionGame(gaussian_game, 1.0, [0.05, 0.0])
    assert np.allclose(rg.fitness([0.3, 0.7]), gaussian_game.fitness([0.3, 0.7]) - [0.05, 0.0])


def test_hard_svm_game_is_deterministic_and_reports_se():
    groups = scenarios.hard_svm_groups(1 / 256)
    a = HardSVMGame(groups, 16, 200, seed=5)
    b = HardSVMGame(groups, 16, 200, seed=5)
    assert np.array_equal(a.fitness([0.3, 0.7]), b.fitness([0.3, 0.7]))
    assert np.all(a.fitness_se([0.3, 0.7]) > 0)
    assert a.eq_tol == 1e-3


def test_fitness_table_rows():
    states, F, se = fitness_table(KNNGame(0.2, 0.8), 10)
    assert len(states) == 11 and se is None
    for s, f in zip(states, F):
        assert np.allclose(f, knn_fitness(0.2, 0.8, 1, s), atol=1e-12)
    _, _, se = fitness_table(HardSVMGame(scenarios.hard_svm_groups(1 / 256), 8, 50), 2)
    assert se.shape == (3, 2)


def test_custom_classifier_game():
    groups = scenarios.gaussian_pair()
    g = ClassifierGame(groups, lambda d: Classifier1D(0.0, 1))
    assert np.allclose(g.fitness([0.5, 0.5]), g.fitness([0.1, 0.9]))


@pytest.mark.parametrize("make", [
    lambda: KNNGame(0.2, 0.8),
    lambda: oracle_game(scenarios.gaussian_skewed()),
    lambda: oracle_game(scenarios.three_group_oracle()),
])
def test_every_equilibrium_meets_its_residual(make):
    from evogame.game import restricted_residual
    g = make()
    for e in find_equilibria(g, grid_resolution=24 if g.K == 3 else None):
        f = g.fitness(e.state)
        r = nash_residual(e.state, f) if e.kind == "nash" else restricted_residual(e.state, f)
        assert r <= g.eq_tol


def test_table_exact_at_nodes_and_linear_between():
    states = np.array(simplex_grid(2, 8))
    values = np.column_stack([np.sin(3 * states[:, 0]), np.cos(states[:, 0])])
    g = TableGame(states, values)
    for s, v in zip(states, values):
        assert np.array_equal(g.fitness(s), v)
    mid = 0.5 * (states[2] + states[3])
    assert np.allclose(g.fitness(mid), 0.5 * (values[2] + values[3]), atol=1e-15)
