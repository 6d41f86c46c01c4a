import numpy as np
import pytest
from scipy import stats

from oracles import exhaustive_energy, random_instance
from nnmggd.energy import energy_distance
from nnmggd.exceptions import DataError


def test_two_points():
    z, y = np.array([[0.0]]), np.array([[1.0]])
    assert energy_distance(z, y, scaled=False) == pytest.approx(2.0)
    assert energy_distance(z, y) == pytest.approx(1.0)


def test_identical_point_sets():
    x = np.random.default_rng(0).standard_normal((15, 4))
    assert energy_distance(x, x[::-1], scaled=False) == pytest.approx(0.0, abs=1e-12)


def test_small_instances_match_double_sum():
    rng = np.random.default_rng(1)
    for _ in range(30):
        z, y = random_instance(rng, n_max=10, m_max=5)
        assert energy_distance(z, y, scaled=False) == pytest.approx(exhaustive_energy(z, y), rel=1e-10, abs=1e-12)


def test_scaling_factor():
    rng = np.random.default_rng(2)
    z, y = rng.standard_normal((7, 3)), rng.standard_normal((4, 3))
    assert energy_distance(z, y) == pytest.approx(energy_distance(z, y, scaled=False) * 7 * 4 / 11)


def test_rigid_motion_and_dilation():
    rng = np.random.default_rng(3)
    z, y = rng.standard_normal((20, 5)), rng.standard_normal((25, 5)) + 0.3
    q, _ = np.linalg.qr(rng.standard_normal((5, 5)))
    e0 = energy_distance(z, y)
    assert energy_distance(z @ q + 2, y @ q + 2) == pytest.approx(e0, rel=1e-10)
    assert energy_distance(4 * z, 4 * y) == pytest.approx(4 * e0, rel=1e-10)


def test_dimension_mismatch():
    with pytest.raises(DataError):
        energy_distance(np.zeros((2, 2)), np.zeros((2, 3)))


def test_null_distribution_matches_permutation():
    rng = np.random.default_rng(4)
    # 600 replicates keep the two-sample KS noise well under 0.1
    n, m, reps = 100, 10, 600
    draws, perms = [], []
    for _ in range(reps):
        z, y = rng.standard_normal((n, m)), rng.standard_normal((n, m))
        draws.append(energy_distance(z, y))
        pooled = rng.permutation(np.vstack([z, y]))
        perms.append(energy_distance(pooled[:n], pooled[n:]))
    assert stats.ks_2samp(draws, perms).statistic < 0.1
