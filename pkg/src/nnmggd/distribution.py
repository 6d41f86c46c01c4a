"""Multivariate generalised Gaussian distribution (MGGD).

Density, for ``Q = (x - mu)^T Sigma^{-1} (x - mu)``::

    f(x) = beta Gamma(m/2) / (pi^{m/2} Gamma(m/(2 beta)) 2^{m/(2 beta)} |Sigma|^{1/2})
           * exp(-Q^beta / 2)

``beta = 1`` is the Gaussian, ``beta = 0.5`` a Laplace-type law. Some
references use the exponent ``s = 2 beta``; this module uses ``beta``
throughout.

Sampling uses the elliptical representation ``X = mu + Sigma^{1/2} R U``
with ``U`` uniform on the unit sphere and ``W = R^{2 beta} / 2`` distributed
as Gamma(m / (2 beta), 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import constants
from .exceptions import DataError
from .linalg import SpdMatrix


def validate_beta(beta) -> float:
    beta = float(beta)
    if not (constants.BETA_MIN <= beta <= constants.BETA_MAX):
        raise DataError(
            f"shape parameter beta={beta} outside [{constants.BETA_MIN}, {constants.BETA_MAX}]"
        )
    return beta


def as_sample(x, min_rows: int = 2) -> np.ndarray:
    """Return ``x`` as a finite float (n, m) array with at least ``min_rows`` rows."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DataError(f"sample must be 2-D, got shape {x.shape}")
    n, m = x.shape
    if n < min_rows or m < 1:
        raise DataError(f"sample needs n >= {min_rows} and m >= 1, got n={n}, m={m}")
    if not np.all(np.isfinite(x)):
        raise DataError("sample has non-finite entries")
    return x


@dataclass(frozen=True)
class MggdParams:
    """Location, scatter and shape of an MGGD.

    ``sigma`` may be given as an array; it is converted to :class:`SpdMatrix`.
    """

    mu: np.ndarray
    sigma: SpdMatrix
    beta: float

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = self.sigma if isinstance(self.sigma, SpdMatrix) else SpdMatrix(self.sigma)
        if mu.ndim != 1 or mu.shape[0] != sigma.dim:
            raise DataError(f"mu has shape {mu.shape}, sigma is {sigma.dim}x{sigma.dim}")
        if not np.all(np.isfinite(mu)):
            raise DataError("mu has non-finite entries")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "beta", validate_beta(self.beta))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @classmethod
    def standard(cls, m: int, beta: float) -> "MggdParams":
        return cls(np.zeros(m), np.eye(m), beta)


@dataclass(frozen=True)
class RadialLaw:
    """Law of the standardized radius ``R = ||X||`` for X ~ MGGD(0, I, beta)."""

    m: int
    beta: float

    def __post_init__(self):
        if int(self.m) < 1:
            raise DataError("dimension must be >= 1")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "beta", validate_beta(self.beta))

    @property
    def gamma_shape(self) -> float:
        return self.m / (2.0 * self.beta)


def sample_unit_sphere(m: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) on the unit sphere in R^m (normalized Gaussian vectors)."""
    if m < 1:
        raise DataError("dimension must be >= 1")
    n = 1 if size is None else int(size)
    g = rng.standard_normal((n, m))
    norms = np.linalg.norm(g, axis=1)
    # zero-norm draws have probability zero; regenerate them anyway
    bad = norms == 0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), m))
        norms[bad] = np.linalg.norm(g[bad], axis=1)
        bad = norms == 0
    u = g / norms[:, None]
    return u[0] if size is None else u


def sample_radius(law: RadialLaw, rng: np.random.Generator, size: int | None = None):
    """Draw ``R = (2 W)^{1/(2 beta)}`` with ``W ~ Gamma(m/(2 beta), 1)``."""
    w = rng.gamma(law.gamma_shape, 1.0, size=size)
    return (2.0 * w) ** (1.0 / (2.0 * law.beta))


def radial_concentration_const(beta: float) -> float:
    """Limit of ``||X|| / m^{1/(2 beta)}`` as m grows: ``(1/beta)^{1/(2 beta)}``."""
    beta = validate_beta(beta)
    return (1.0 / beta) ** (1.0 / (2.0 * beta))


def sample_standard_mggd(m: int, beta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws from MGGD(0, I_m, beta)."""
    law = RadialLaw(m, beta)
    u = sample_unit_sphere(m, rng, n)
    r = sample_radius(law, rng, n)
    return u * r[:, None]


def sample_mggd(params: MggdParams, n: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise DataError("n must be >= 1")
    z = sample_standard_mggd(params.dim, params.beta, n, rng)
    return params.mu + z @ params.sigma.sqrt


def log_normalizer(m: int, beta: float) -> float:
    """Log of the density constant for Sigma = I."""
    a = m / (2.0 * beta)
    return (
        math.log(beta)
        + gammaln(m / 2.0)
        - (m / 2.0) * math.log(math.pi)
        - gammaln(a)
        - a * math.log(2.0)
    )


def mahalanobis_sq(x, mu, sigma: SpdMatrix) -> np.ndarray:
    c = np.atleast_2d(np.asarray(x, dtype=float)) - mu
    y = c @ sigma.inv_sqrt
    return np.einsum("ij,ij->i", y, y)


def log_density(params: MggdParams, x) -> np.ndarray | float:
    """Log-density at a point, or at every row of a 2-D array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if x.shape[-1] != params.dim or x.ndim > 2:
        raise DataError(f"expected points of dimension {params.dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("x has non-finite entries")
    q = mahalanobis_sq(x, params.mu, params.sigma)
    out = log_normalizer(params.dim, params.beta) - 0.5 * params.sigma.logdet - 0.5 * q**params.beta
    return float(out[0]) if single else out


def mahalanobis_moment(m: int, beta: float, k: int) -> float:
    """``E[Q^k]`` for ``Q = ||X||^2``, X ~ MGGD(0, I_m, beta).

    Equals ``2^{k/beta} Gamma(m/(2 beta) + k/beta) / Gamma(m/(2 beta))``,
    evaluated in log-space.
    """
    beta = validate_beta(beta)
    if k < 1:
        raise DataError("moment order must be a positive integer")
    a = m / (2.0 * beta)
    log_val = (k / beta) * math.log(2.0) + gammaln(a + k / beta) - gammaln(a)
    if not np.isfinite(log_val):
        raise OverflowError("moment not representable in log-space")
    return math.exp(log_val)


def sample_multivariate_t(mu, sigma, nu: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws of ``mu + Sigma^{1/2} Z / sqrt(S / nu)``, S ~ chi-square(nu)."""
    if nu <= 0:
        raise DataError("degrees of freedom must be positive")
    sigma = sigma if isinstance(sigma, SpdMatrix) else SpdMatrix(sigma)
    mu = np.asarray(mu, dtype=float)
    z = rng.standard_normal((n, sigma.dim))
    s = rng.chisquare(nu, size=n)
    return mu + (z / np.sqrt(s / nu)[:, None]) @ sigma.sqrt
