"""Likelihood-based model comparison (Normal, Student t, MGGD) and QQ data."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .distribution import MggdParams, as_sample, log_density
from .estimation import TylerConfig, spatial_median, tyler_regularized
from .exceptions import DataError, NumericalError
from .linalg import SpdMatrix

logger = logging.getLogger(__name__)

NU_GRID = tuple(np.round(np.arange(1.0, 50.0 + 1e-9, 0.5), 10))
BETA_GRID = tuple(np.round(np.arange(0.2, 4.0 + 1e-9, 0.05), 10))
REFINE_STEP = 0.01
EM_TOL = 1e-10
EM_MAX_ITER = 2000


@dataclass(frozen=True)
class ModelFit:
    name: str
    loglik: float
    k: int
    n: int
    shape: float | None = None  # nu for t, beta for MGGD
    at_grid_edge: bool = False

    @property
    def aic(self) -> float:
        return 2 * self.k - 2 * self.loglik

    @property
    def bic(self) -> float:
        return self.k * math.log(self.n) - 2 * self.loglik


@dataclass(frozen=True)
class ModelComparison:
    fits: tuple
    beta_profile: tuple  # ((beta, loglik), ...) on the coarse grid plus refinement
    nu_profile: tuple = field(default=(), repr=False)

    def __getitem__(self, name: str) -> ModelFit:
        for f in self.fits:
            if f.name == name:
                return f
        raise KeyError(name)

    def ranking(self, criterion: str = "aic") -> list:
        return [f.name for f in sorted(self.fits, key=lambda f: getattr(f, criterion))]


def _base_k(m: int) -> int:
    return m + m * (m + 1) // 2


def _check(x):
    x = as_sample(x, min_rows=1)
    n, m = x.shape
    if n <= m + 2:
        raise DataError(f"need n > m + 2 for a covariance fit, got n={n}, m={m}")
    return x


def _spd(a) -> SpdMatrix:
    try:
        return SpdMatrix(a)
    except NumericalError as exc:
        raise NumericalError(f"singular scatter estimate: {exc}") from exc


def fit_normal(x) -> ModelFit:
    """Closed-form Gaussian MLE."""
    x = _check(x)
    n, m = x.shape
    mu = x.mean(axis=0)
    cov = _spd(np.cov(x, rowvar=False, bias=True))
    ll = float(np.sum(log_density(MggdParams(mu, cov, 1.0), x)))
    return ModelFit("Normal", ll, _base_k(m), n)


def t_logpdf(x, mu, sigma: SpdMatrix, nu: float) -> np.ndarray:
    m = len(mu)
    c = x - mu
    d = np.einsum("ij,jk,ik->i", c, sigma.inverse, c)
    return (
        gammaln((nu + m) / 2)
        - gammaln(nu / 2)
        - 0.5 * m * math.log(nu * math.pi)
        - 0.5 * sigma.logdet
        - 0.5 * (nu + m) * np.log1p(d / nu)
    )


def fit_t_fixed_nu(x, nu: float, start=None):
    """EM for location and scatter of a multivariate t with known ``nu``.

    Returns ``(loglik, mu, sigma)``. The log-likelihood is nondecreasing
    over iterations.
    """
    n, m = x.shape
    if start is None:
        mu, sigma = x.mean(axis=0), _spd(np.cov(x, rowvar=False, bias=True))
    else:
        mu, sigma = start
    ll = float(np.sum(t_logpdf(x, mu, sigma, nu)))
    for _ in range(EM_MAX_ITER):
        c = x - mu
        d = np.einsum("ij,jk,ik->i", c, sigma.inverse, c)
        w = (nu + m) / (nu + d)
        mu = (w @ x) / w.sum()
        c = x - mu
        sigma = _spd((c * w[:, None]).T @ c / n)
        new = float(np.sum(t_logpdf(x, mu, sigma, nu)))
        done = new - ll <= EM_TOL * max(1.0, abs(ll))
        ll = new
        if done:
            break
    return ll, mu, sigma


def fit_t(x, nu_grid=NU_GRID) -> tuple:
    """Profile the t likelihood over ``nu_grid``; returns (ModelFit, profile)."""
    x = _check(x)
    n, m = x.shape
    profile = []
    start = None
    # descending nu: each fit warm-starts from the previous, closer one
    for nu in sorted(nu_grid, reverse=True):
        ll, mu, sigma = fit_t_fixed_nu(x, nu, start)
        start = (mu, sigma)
        profile.append((float(nu), ll))
    profile.sort()
    best = max(range(len(profile)), key=lambda i: profile[i][1])
    edge = best in (0, len(profile) - 1)
    if edge:
        logger.warning("t likelihood maximised at the grid edge nu=%g", profile[best][0])
    fit = ModelFit("t", profile[best][1], _base_k(m) + 1, n, profile[best][0], edge)
    return fit, tuple(profile)


def _mggd_loglik(q, logdet_shape, m, beta):
    """Profile log-likelihood at ``beta`` with the scale maximised in closed form.

    With Sigma = s * S and q the squared distances under S, the maximiser is
    ``s = (beta * sum(q^beta) / (n m))^(1/beta)``.
    """
    n = len(q)
    log_sum = np.log(np.sum(q**beta))
    log_s = (math.log(beta) + log_sum - math.log(n * m)) / beta
    const = (
        math.log(beta)
        + gammaln(m / 2)
        - 0.5 * m * math.log(math.pi)
        - gammaln(m / (2 * beta))
        - (m / (2 * beta)) * math.log(2)
    )
    # at the optimum sum((q/s)^beta) = n m / beta
    return n * const - 0.5 * n * (logdet_shape + m * log_s) - 0.5 * n * m / beta, math.exp(log_s)


def fit_mggd_profile(x, beta_grid=BETA_GRID, refine=True, tyler: TylerConfig | None = None):
    """Profile the MGGD likelihood over ``beta_grid``.

    Location and shape come from the spatial median and the regularized
    Tyler estimator; the scale is maximised in closed form per beta. The
    best grid point is refined on a 0.01 grid within one coarse step.

    Returns (ModelFit, profile).
    """
    x = _check(x)
    n, m = x.shape
    mu = spatial_median(x)
    shape = tyler_regularized(x, mu, tyler or TylerConfig())
    c = x - mu
    q = np.einsum("ij,jk,ik->i", c, shape.inverse, c)
    q = np.maximum(q, 1e-300)

    def ll(b):
        return _mggd_loglik(q, shape.logdet, m, b)[0]

    profile = {float(b): ll(b) for b in beta_grid}
    grid = sorted(profile)
    best = max(grid, key=profile.get)
    edge = best in (grid[0], grid[-1])
    if edge:
        logger.warning("MGGD likelihood maximised at the grid edge beta=%g", best)
    if refine and not edge:
        step = grid[1] - grid[0]
        for b in np.round(np.arange(best - step, best + step + 1e-9, REFINE_STEP), 10):
            profile.setdefault(float(b), ll(float(b)))
        best = max(profile, key=profile.get)

    best_ll = profile[best]
    fit = ModelFit("MGGD", best_ll, _base_k(m) + 1, n, best, edge)
    return fit, tuple(sorted(profile.items()))


def model_comparison(x, beta_grid=BETA_GRID, nu_grid=NU_GRID, tyler: TylerConfig | None = None) -> ModelComparison:
    """Fit Normal, t and MGGD models and report log-likelihood, AIC and BIC."""
    x = _check(x)
    normal = fit_normal(x)
    t_fit, nu_profile = fit_t(x, nu_grid)
    mggd, beta_profile = fit_mggd_profile(x, beta_grid, tyler=tyler)
    return ModelComparison((normal, t_fit, mggd), beta_profile, nu_profile)


def mahalanobis_qq(x):
    """Chi-square(m) quantiles at (i - 0.5)/n against sorted squared Mahalanobis distances.

    Distances use the sample mean and the unbiased sample covariance. A single
    row gives one pair at the chi-square median with distance zero.
    """
    x = as_sample(x, min_rows=1)
    n, m = x.shape
    theo = stats.chi2(m).ppf((np.arange(1, n + 1) - 0.5) / n)
    if n == 1:
        return theo, np.zeros(1)
    c = x - x.mean(axis=0)
    cov = _spd(np.cov(x, rowvar=False, ddof=1).reshape(m, m))
    q = np.einsum("ij,jk,ik->i", c, cov.inverse, c)
    return theo, np.sort(q)
