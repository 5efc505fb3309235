import numpy as np
import pytest

from evogame import scenarios
from evogame.distributions import Component, GroupDistribution, Uniform
from evogame.game import oracle_game


def one_group(*parts):
    """Build a group from ``(shape, weight, label[, flip])`` tuples."""
    return GroupDistribution(tuple(Component(*p) for p in parts))


@pytest.fixture
def separable_groups():
    # one threshold at zero is perfect for both groups at every mixture
    a = one_group((Uniform(-1.0, 0.0), 0.5, -1), (Uniform(0.0, 1.0), 0.5, 1))
    b = one_group((Uniform(-2.0, 0.0), 0.3, -1), (Uniform(0.0, 2.0), 0.7, 1))
    return [a, b]


@pytest.fixture(scope="session")
def gaussian_game():
    return oracle_game(scenarios.gaussian_pair())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
