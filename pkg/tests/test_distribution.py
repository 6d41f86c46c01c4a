import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import gammaln

from nnmggd.distribution import (
    MggdParams,
    RadialLaw,
    log_density,
    mahalanobis_moment,
    radial_concentration_const,
    sample_mggd,
    sample_multivariate_t,
    sample_radius,
    sample_standard_mggd,
    sample_unit_sphere,
    validate_beta,
)
from nnmggd.exceptions import DataError


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_spd(m, rng):
    b = rng.standard_normal((m, m))
    return b @ b.T / m + 0.5 * np.eye(m)


# -- parameters ---------------------------------------------------------------


@pytest.mark.parametrize("beta", [0.0, -1.0, 0.005, 150.0])
def test_beta_envelope(beta):
    with pytest.raises(DataError):
        validate_beta(beta)


def test_params_reject_non_spd():
    with pytest.raises(Exception):
        MggdParams(np.zeros(2), np.diag([1.0, -1.0]), 1.0)


def test_params_dimension_mismatch():
    with pytest.raises(DataError):
        MggdParams(np.zeros(3), np.eye(2), 1.0)


# -- unit sphere --------------------------------------------------------------


def test_sphere_one_dimensional(rng):
    u = sample_unit_sphere(1, rng, 4000)
    assert set(np.unique(u)) == {-1.0, 1.0}
    assert abs(np.mean(u > 0) - 0.5) < 4 * 0.5 / math.sqrt(4000)


def test_sphere_unit_norm(rng):
    for _ in range(10):
        assert abs(np.linalg.norm(sample_unit_sphere(3, rng)) - 1) < 1e-12


def test_sphere_coordinate_means(rng):
    m, n = 10, 100_000
    u = sample_unit_sphere(m, rng, n)
    assert np.all(np.abs(u.mean(axis=0)) < 3 * math.sqrt(1 / (m * n)))


# -- radial law ---------------------------------------------------------------


def test_radius_gaussian_case(rng):
    r = sample_radius(RadialLaw(2, 1.0), rng, 50_000)
    assert stats.kstest(r**2, stats.expon(scale=2).cdf).statistic < 0.01


def test_radius_gamma_mean(rng):
    law = RadialLaw(50, 0.5)
    w = 0.5 * sample_radius(law, rng, 100_000) ** (2 * law.beta)
    assert abs(w.mean() - 50) < 0.01 * 50


def test_radius_thin_shell(rng):
    r = sample_radius(RadialLaw(200, 0.5), rng, 20_000)
    assert abs(np.mean(r / 200 ** (1 / (2 * 0.5))) - 2.0) < 0.02 * 2


@pytest.mark.parametrize("beta, expected", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.5**0.25)])
def test_radial_concentration_const(beta, expected):
    assert radial_concentration_const(beta) == pytest.approx(expected, rel=1e-12)


def test_radial_law_small_gamma_shape(rng):
    # m/(2 beta) < 1: the gamma sampler must handle shape below one
    law = RadialLaw(1, 2.0)
    assert law.gamma_shape == 0.25
    w = 0.5 * sample_radius(law, rng, 50_000) ** 4
    assert stats.kstest(w, stats.gamma(0.25).cdf).statistic < 0.01


# -- sampler ------------------------------------------------------------------


def test_gaussian_sampler_marginals(rng):
    x = sample_mggd(MggdParams.standard(4, 1.0), 10_000, rng)
    for j in range(4):
        assert stats.kstest(x[:, j], "norm").pvalue > 1e-3


def test_location_equivariance(rng):
    m, n = 6, 20_000
    sigma = random_spd(m, rng)
    x = sample_mggd(MggdParams(np.full(m, 5.0), sigma, 0.7), n, rng)
    se = x.std(axis=0, ddof=1) / math.sqrt(n)
    assert np.all(np.abs(x.mean(axis=0) - 5.0) < 4 * se)


def test_radial_gamma_ks(rng):
    x = sample_mggd(MggdParams.standard(50, 0.5), 100_000, rng)
    w = 0.5 * np.linalg.norm(x, axis=1) ** (2 * 0.5)
    assert stats.kstest(w, stats.gamma(50).cdf).statistic < 0.01


def test_affine_equivariance_of_sampler(rng):
    m, beta = 8, 0.6
    params = MggdParams(rng.uniform(-1, 1, m), random_spd(m, rng), beta)
    x = sample_mggd(params, 20_000, rng)
    z = (x - params.mu) @ params.sigma.inv_sqrt
    q = np.einsum("ij,ij->i", z, z)
    q0 = np.einsum("ij,ij->i", *(2 * [sample_standard_mggd(m, beta, 20_000, rng)]))
    assert stats.ks_2samp(q, q0).pvalue > 1e-3


# -- density ------------------------------------------------------------------


def test_log_density_standard_normal_mode():
    assert log_density(MggdParams.standard(1, 1.0), np.zeros(1)) == pytest.approx(-0.5 * math.log(2 * math.pi), abs=1e-12)


def test_log_density_reduces_to_gaussian(rng):
    m = 7
    mu = rng.standard_normal(m)
    sigma = random_spd(m, rng)
    x = mu + rng.standard_normal((100, m)) * 2
    got = log_density(MggdParams(mu, sigma, 1.0), x)
    want = stats.multivariate_normal(mu, sigma).logpdf(x)
    assert np.max(np.abs(got - want)) < 1e-10


@pytest.mark.parametrize("m, beta", [(4, 0.5), (3, 2.0), (1, 0.3)])
def test_log_density_integrates_to_one(m, beta):
    params = MggdParams.standard(m, beta)
    log_area = math.log(2) + (m / 2) * math.log(math.pi) - gammaln(m / 2)

    def radial(r):
        x = np.zeros(m)
        x[0] = r
        return math.exp(log_area + (m - 1) * math.log(r) + log_density(params, x)) if r > 0 else 0.0

    # integrate in pieces so quad resolves the peak and the tail
    edges = [0, 1, 5, 20, 100, 1000, np.inf]
    mass = sum(integrate.quad(radial, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)[0] for a, b in zip(edges, edges[1:]))
    assert mass == pytest.approx(1.0, abs=1e-6)


def test_log_density_errors():
    params = MggdParams.standard(3, 1.0)
    with pytest.raises(DataError):
        log_density(params, np.zeros(2))
    with pytest.raises(DataError):
        log_density(params, np.array([0.0, np.nan, 0.0]))


def test_log_density_large_dimension_finite():
    # Gamma(m/(2 beta)) overflows for m=200, beta=0.1; log-space keeps it finite
    val = log_density(MggdParams.standard(200, 0.1), np.ones(200))
    assert np.isfinite(val)


# -- moments ------------------------------------------------------------------


@pytest.mark.parametrize("m", [1, 5, 10, 200])
def test_moment_gaussian_mean(m):
    assert mahalanobis_moment(m, 1.0, 1) == pytest.approx(m, rel=1e-12)


def test_moment_gaussian_second():
    assert mahalanobis_moment(10, 1.0, 2) == pytest.approx(120, rel=1e-12)


def test_moment_laplace_closed_form():
    # beta=0.5: Q = 4 W^2 with W ~ Gamma(10), so E[Q] = 4 * 10 * 11
    assert mahalanobis_moment(10, 0.5, 1) == pytest.approx(440, rel=1e-12)


def test_moment_laplace_monte_carlo(rng):
    q = np.sum(sample_standard_mggd(10, 0.5, 1_000_000, rng) ** 2, axis=1)
    assert abs(q.mean() / mahalanobis_moment(10, 0.5, 1) - 1) < 0.005


@pytest.mark.parametrize("beta", [0.3, 0.8, 2.5])
@pytest.mark.parametrize("k", [1, 2])
def test_moment_within_three_standard_errors(rng, beta, k):
    n = 200_000
    qk = np.sum(sample_standard_mggd(6, beta, n, rng) ** 2, axis=1) ** k
    se = qk.std(ddof=1) / math.sqrt(n)
    assert abs(qk.mean() - mahalanobis_moment(6, beta, k)) < 3 * se


def test_moment_overflow_is_reported():
    with pytest.raises(OverflowError):
        mahalanobis_moment(200, 0.01, 3)


# -- multivariate t -----------------------------------------------------------


def test_t_large_nu_is_gaussian(rng):
    # 10^5 draws: at 10^4 a KS distance of 0.01 is within sampling noise
    x = sample_multivariate_t(np.zeros(3), np.eye(3), 1e6, 100_000, rng)
    assert stats.kstest(x[:, 0], "norm").statistic < 0.01


def test_t3_upper_quantile(rng):
    x = sample_multivariate_t(np.zeros(1), np.eye(1), 3, 100_000, rng)[:, 0]
    oracle = stats.t(3).ppf(0.95)
    assert oracle == pytest.approx(2.353, abs=1e-3)
    assert abs(np.quantile(x, 0.95) / oracle - 1) < 0.05


def test_t3_heavy_kurtosis(rng):
    x = sample_multivariate_t(np.zeros(1), np.eye(1), 3, 100_000, rng)[:, 0]
    assert stats.kurtosis(x, fisher=False) > 5
