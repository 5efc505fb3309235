import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evogame.population import (
    SimplexError, check_state, normalize, project_to_simplex, simplex_grid, state_from_json,
    state_to_json, support, vertex,
)


def test_support_examples():
    assert support([0.5, 0.5], 1e-6) == (0, 1)
    assert support([1.0, 0.0], 1e-6) == (0,)
    assert support([0.999, 0.001], 0.01) == (0,)


def test_check_state_rejects_bad_input():
    with pytest.raises(SimplexError):
        check_state([0.7, 0.7])
    with pytest.raises(SimplexError):
        check_state([1.1, -0.1])
    with pytest.raises(SimplexError):
        check_state([0.5, 0.5], K=3)
    with pytest.raises(SimplexError):
        check_state([np.nan, 1.0])


def test_check_state_renormalizes_within_tolerance():
    p = check_state([0.5 + 1e-13, 0.5])
    assert p.sum() == pytest.approx(1.0, abs=1e-15)


def test_normalize_zero_vector_fails():
    with pytest.raises(SimplexError):
        normalize([0.0, 0.0])


def test_projection_examples():
    assert np.array_equal(project_to_simplex([0.5, 0.5]), [0.5, 0.5])
    assert np.allclose(project_to_simplex([0.0, 0.0]), [0.5, 0.5])
    assert np.allclose(project_to_simplex([1.2, -0.2]), [1.0, 0.0])


def test_projection_matches_brute_force_grid():
    target = np.array([1.2, -0.2])
    xs = np.arange(0.0, 1.0 + 1e-4 / 2, 1e-4)
    grid = np.column_stack([xs, 1.0 - xs])
    best = grid[np.argmin(np.linalg.norm(grid - target, axis=1))]
    assert np.allclose(project_to_simplex(target), best, atol=1e-4)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=5))
def test_projection_idempotent_and_on_simplex(v):
    p = project_to_simplex(v)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(project_to_simplex(p), p, atol=1e-12)


def test_grid_examples():
    g = simplex_grid(2, 2)
    assert np.allclose(g, [[1, 0], [0.5, 0.5], [0, 1]])
    assert len(simplex_grid(2, 10)) == 11
    assert len(simplex_grid(3, 2)) == 6


@pytest.mark.parametrize("K,r", [(2, 7), (3, 2), (3, 5)])
def test_grid_matches_lattice_enumeration(K, r):
    brute = {c for c in itertools.product(range(r + 1), repeat=K) if sum(c) == r}
    got = {tuple(int(round(x * r)) for x in row) for row in simplex_grid(K, r)}
    assert got == brute
    assert len(simplex_grid(K, r)) == len(brute)


def test_vertex_and_json_round_trip():
    assert np.array_equal(vertex(3, 1), [0.0, 1.0, 0.0])
    p = np.array([0.1, 0.2, 0.7])
    assert np.array_equal(state_from_json(state_to_json(p)), p)
    assert json.loads(state_to_json(p)) == [0.1, 0.2, 0.7]
