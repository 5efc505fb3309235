"""Ready-made group constructions used by the shipped configs and tests."""
from __future__ import annotations

from .distributions import Component, Gaussian, GroupDistribution, Point, Triangular, Uniform


def _group(*parts):
    return GroupDistribution(tuple(Component(*p) for p in parts))


def soft_svm_groups(alpha=0.75):
    """Two triangular groups whose soft-SVM game bifurcates with regularization.

    Group A puts mass ``alpha`` on a negative class piled up near -1 and the
    rest on a positive class piled near 0; group B is its mirror image.
    """
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (0.5, 1)")
    a = _group(
        (Triangular(-1.0, 0.0, -1.0), alpha, -1),
        (Triangular(0.0, 1.0, 0.0), 1.0 - alpha, 1),
    )
    b = _group(
        (Triangular(-1.0, 0.0, 0.0), 1.0 - alpha, -1),
        (Triangular(0.0, 1.0, 1.0), alpha, 1),
    )
    return [a, b]


def hard_svm_groups(epsilon):
    """Separable groups: a spread-out class against a point mass just across 0.

    Group A is ``Uniform[eps, 1+eps]`` labeled +1 plus a point at ``-eps``
    labeled -1, each with weight 1/2; group B is the reflection ``x -> -x``.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    a = _group((Uniform(epsilon, 1.0 + epsilon), 0.5, 1), (Point(-epsilon), 0.5, -1))
    b = _group((Uniform(-1.0 - epsilon, -epsilon), 0.5, -1), (Point(epsilon), 0.5, 1))
    return [a, b]


def knn_groups(alpha, beta, gap=10.0):
    """Label-noise groups with positive and negative supports ``2*gap`` apart.

    Group A is mostly the positive subgroup with labels flipped at rate
    ``alpha``; group B is mostly the noisy negative subgroup.
    """
    pos, neg = Uniform(gap, gap + 1.0), Uniform(-gap - 1.0, -gap)
    a = _group((pos, beta, 1, alpha), (neg, 1.0 - beta, -1))
    b = _group((pos, 1.0 - beta, 1), (neg, beta, -1, alpha))
    return [a, b]


def gaussian_pair(shift=1.0, std=1.0):
    """Balanced Gaussian classes at -1/+1; group B is group A shifted by ``shift``.

    The game is symmetric about (0.5, 0.5), where the oracle game has an
    unstable interior equilibrium.
    """
    a = _group((Gaussian(-1.0, std), 0.5, -1), (Gaussian(1.0, std), 0.5, 1))
    b = _group((Gaussian(-1.0 + shift, std), 0.5, -1), (Gaussian(1.0 + shift, std), 0.5, 1))
    return [a, b]


def gaussian_skewed():
    """Unbalanced Gaussian pair with different class separations."""
    a = _group((Gaussian(-1.0, 1.0), 0.6, -1), (Gaussian(1.5, 1.0), 0.4, 1))
    b = _group((Gaussian(0.0, 0.7), 0.5, -1), (Gaussian(2.0, 0.7), 0.5, 1))
    return [a, b]


def triangular_pair():
    """Overlapping triangular classes with group-specific decision boundaries."""
    a = _group((Triangular(-2.0, 0.0, -1.0), 0.5, -1), (Triangular(-0.5, 1.5, 0.5), 0.5, 1))
    b = _group((Triangular(-1.0, 1.0, 0.0), 0.4, -1), (Triangular(0.5, 2.5, 1.5), 0.6, 1))
    return [a, b]


def three_group_fairness(noise=0.3):
    """Two mirrored strong groups and a weak group with label noise.

    Groups A and B have shifted class boundaries; group C is centred
    between them but has labels flipped with probability ``noise``.
    """
    s = 0.6
    a = _group((Gaussian(-1.3, s), 0.5, -1), (Gaussian(0.7, s), 0.5, 1))
    b = _group((Gaussian(-0.7, s), 0.5, -1), (Gaussian(1.3, s), 0.5, 1))
    c = _group((Gaussian(-1.0, s), 0.5, -1, noise), (Gaussian(1.0, s), 0.5, 1, noise))
    return [a, b, c]


def three_group_oracle():
    """Three groups with distinct oracle thresholds at -0.5, 0 and 0.6."""
    a = _group((Gaussian(-1.5, 0.8), 0.5, -1), (Gaussian(0.5, 0.8), 0.5, 1))
    b = _group((Gaussian(-1.0, 0.8), 0.5, -1), (Gaussian(1.0, 0.8), 0.5, 1))
    c = _group((Gaussian(-0.4, 0.8), 0.5, -1), (Gaussian(1.6, 0.8), 0.5, 1))
    return [a, b, c]


SCENARIOS = {
    "soft_svm": soft_svm_groups,
    "hard_svm": hard_svm_groups,
    "knn": knn_groups,
    "gaussian_pair": gaussian_pair,
    "gaussian_skewed": gaussian_skewed,
    "triangular_pair": triangular_pair,
    "three_group_fairness": three_group_fairness,
    "three_group_oracle": three_group_oracle,
}
