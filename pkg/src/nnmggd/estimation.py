"""Robust estimation of MGGD location, scatter and shape.

The fit runs in four stages: spatial median for location, regularized
Tyler fixed point for the scatter *shape* (trace normalized to m), a
moment-ratio equation for beta, and a closed-form scale so the mean
squared Mahalanobis radius matches its MGGD expectation.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dpotrf, dtrtrs
from scipy.special import gammaln

from . import constants
from .distribution import MggdParams, as_sample, mahalanobis_moment, validate_beta
from .exceptions import ConvergenceWarning, DataError, NumericalError
from .linalg import SpdMatrix, SpectrumReport, WhiteningMap, condition_diagnostics

logger = logging.getLogger(__name__)


def default_rho(n: int, m: int) -> float:
    """Regularization weight growing with m/n.

    The lower clamp ``1 - 0.9 n/m`` keeps the fixed point well defined when
    m > n (a solution exists only for rho > 1 - n/m).
    """
    rho = max(0.05, m / (m + 2.0 * n))
    if m > n:
        rho = max(rho, 1.0 - 0.9 * n / m)
    return min(0.9, rho)


@dataclass(frozen=True)
class TylerConfig:
    rho: float | None = None  # None -> default_rho(n, m)
    max_iter: int = constants.TYLER_MAX_ITER
    tol: float = constants.TYLER_TOL

    def __post_init__(self):
        if self.rho is not None and not 0 < self.rho < 1:
            raise DataError(f"rho must lie in (0, 1), got {self.rho}")
        if self.max_iter < 1 or self.tol <= 0:
            raise DataError("max_iter must be >= 1 and tol > 0")

    def resolve_rho(self, n: int, m: int) -> float:
        return default_rho(n, m) if self.rho is None else float(self.rho)


# -- location ---------------------------------------------------------------


def _weiszfeld(x, tol, max_iter):
    n = x.shape[0]
    y = np.median(x, axis=0)
    atol = 1e-14 * (1.0 + np.abs(x).max())
    f_prev = np.inf
    y_prev = y
    grad = np.inf
    for it in range(1, max_iter + 1):
        diff = x - y
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        f = d.sum()
        if f > f_prev * (1 + 1e-14):
            # objective went up: damp the last step
            y = y_prev + constants.MEDIAN_DAMPING * (y - y_prev)
            continue
        nz = d > atol
        eta = n - int(nz.sum())
        if eta == n:
            return y, it, 0.0, True
        w = 1.0 / d[nz]
        r_vec = w @ diff[nz]
        r = float(np.linalg.norm(r_vec))
        grad = max(r - eta, 0.0) / n
        if grad <= tol:
            return y, it, grad, True
        t = (w @ x[nz]) / w.sum()
        if eta == 0:
            y_new = t
        else:
            # Vardi-Zhang step away from a data point
            y_new = (1 - eta / r) * t + min(1.0, eta / r) * y
        f_prev, y_prev, y = f, y, y_new
    return y, max_iter, grad, False


def spatial_median(x, tol: float = constants.MEDIAN_TOL, max_iter: int = constants.MEDIAN_MAX_ITER):
    """Minimizer of ``sum_i ||x_i - mu||`` by (damped) Weiszfeld iteration.

    Stops when the norm of the mean unit residual falls below ``tol``. On
    non-convergence the best iterate is returned with a warning.
    """
    x = as_sample(x)
    mu, it, grad, ok = _weiszfeld(x, tol, max_iter)
    if not ok:
        warnings.warn(
            f"spatial median stopped after {it} iterations (gradient {grad:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    return mu


# -- scatter ----------------------------------------------------------------


@dataclass(frozen=True)
class TylerResult:
    shape: SpdMatrix  # trace normalized to m
    raw: np.ndarray  # fixed point before normalization
    rho: float
    iterations: int
    residual: float
    converged: bool
    n_dropped: int


def tyler_map(c: np.ndarray, sigma: np.ndarray, rho: float) -> np.ndarray:
    """Right-hand side of the regularized Tyler equation for centered rows ``c``."""
    n, m = c.shape
    chol, info = dpotrf(sigma, lower=1, clean=0)
    if info != 0:
        raise NumericalError("Tyler iterate lost positive definiteness")
    v, info = dtrtrs(chol, c.T, lower=1)
    q = np.einsum("ij,ij->j", v, v)
    if q.min() < constants.TYLER_MIN_DENOMINATOR:
        raise NumericalError("zero denominator in Tyler fixed point")
    s = (c.T / q) @ c
    out = (1.0 - rho) * (m / n) * s
    out.flat[:: m + 1] += rho
    return 0.5 * (out + out.T)


def _center_nonzero(x, mu_hat):
    c = x - mu_hat
    keep = np.any(c != 0, axis=1)
    return c[keep], int((~keep).sum())


def tyler_regularized(x, mu_hat, cfg: TylerConfig | None = None, full_output: bool = False):
    """Regularized Tyler scatter, trace normalized to m.

    Iterates ``S <- (1 - rho)(m/n) sum_i c_i c_i^T / (c_i^T S^{-1} c_i) + rho I``
    from the identity until the relative Frobenius change is at most
    ``cfg.tol``. Rows equal to ``mu_hat`` are dropped. The returned iterate
    is the one whose fixed-point residual was last measured.

    With ``full_output=True`` a :class:`TylerResult` is returned instead.
    """
    cfg = cfg or TylerConfig()
    x = as_sample(x)
    c, n_dropped = _center_nonzero(x, np.asarray(mu_hat, dtype=float))
    if n_dropped:
        logger.warning("dropped %d rows equal to the location estimate", n_dropped)
    n, m = c.shape
    if n < 2:
        raise DataError("fewer than two rows differ from the location estimate")
    rho = cfg.resolve_rho(n, m)
    if m > n and rho <= 1.0 - n / m:
        raise DataError(f"rho={rho} too small for m={m}, n={n}: need rho > {1 - n / m:.3f}")

    sigma = np.eye(m)
    residual = np.inf
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        new = tyler_map(c, sigma, rho)
        residual = float(np.linalg.norm(new - sigma) / np.linalg.norm(sigma))
        if residual <= cfg.tol:
            converged = True
            break
        sigma = new
    if not converged:
        warnings.warn(
            f"Tyler iteration hit max_iter={cfg.max_iter} (residual {residual:.2e})",
            ConvergenceWarning,
            stacklevel=2,
        )
    shape = SpdMatrix(sigma * (m / np.trace(sigma)))
    if not full_output:
        return shape
    return TylerResult(shape, sigma, rho, it, residual, converged, n_dropped)


def calibrate_scale(sigma_shape: SpdMatrix, x, mu_hat, beta_hat: float) -> SpdMatrix:
    """Rescale ``sigma_shape`` so the mean squared Mahalanobis radius equals E[Q]."""
    x = as_sample(x)
    q = _radii(x, mu_hat, sigma_shape)
    mean_q = q.mean()
    if not mean_q > 0:
        raise NumericalError("all Mahalanobis radii are zero")
    s2 = mean_q / mahalanobis_moment(x.shape[1], beta_hat, 1)
    return sigma_shape.scaled(s2)


def _radii(x, mu, sigma: SpdMatrix) -> np.ndarray:
    y = (x - mu) @ sigma.inv_sqrt
    return np.einsum("ij,ij->i", y, y)


# -- shape ------------------------------------------------------------------


def moment_ratio(m: int, beta: float) -> float:
    """``E[Q^2] / E[Q]^2`` under MGGD(0, I_m, beta); decreasing in beta."""
    a = m / (2.0 * beta)
    return math.exp(gammaln(a) + gammaln(a + 2.0 / beta) - 2.0 * gammaln(a + 1.0 / beta))


def solve_beta(ratio: float, m: int, bounds=constants.BETA_BOUNDS, tol=constants.BETA_TOL):
    """Solve ``moment_ratio(m, beta) = ratio`` by bisection.

    Returns ``(beta, clamped)``; ``clamped`` is True when the ratio lies
    outside the range attainable on ``bounds``.
    """
    lo, hi = bounds
    if ratio >= moment_ratio(m, lo):
        return lo, True
    if ratio <= moment_ratio(m, hi):
        return hi, True
    for _ in range(constants.BETA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if moment_ratio(m, mid) > ratio:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi), False


def estimate_beta(x, mu_hat, sigma_hat: SpdMatrix, bounds=constants.BETA_BOUNDS, tol=constants.BETA_TOL) -> float:
    """Moment (kurtosis-matching) estimate of the MGGD shape parameter.

    Matches ``mean(Q^2) / mean(Q)^2`` of the squared Mahalanobis radii to its
    theoretical value. The ratio is scale free, so only the shape of
    ``sigma_hat`` matters.
    """
    x = as_sample(x, min_rows=4)
    q = _radii(x, mu_hat, sigma_hat)
    beta, clamped = solve_beta(float(np.mean(q**2) / np.mean(q) ** 2), x.shape[1], bounds, tol)
    if clamped:
        warnings.warn(f"beta estimate clamped to bound {beta}", ConvergenceWarning, stacklevel=2)
    return beta


# -- full fit ---------------------------------------------------------------


@dataclass(frozen=True)
class FitDiagnostics:
    median_iterations: int
    median_converged: bool
    tyler_iterations: int
    tyler_residual: float
    tyler_converged: bool
    rho: float
    n_dropped: int
    beta_clamped: bool
    beta_refinement_change: float
    spectrum: SpectrumReport

    @property
    def converged(self) -> bool:
        return self.median_converged and self.tyler_converged

    @property
    def ill_conditioned(self) -> bool:
        return self.spectrum.condition_number > constants.WARN_CONDITION


@dataclass(frozen=True)
class FittedNull:
    params: MggdParams
    whitening: WhiteningMap
    diagnostics: FitDiagnostics = field(repr=False)


MIN_FIT_ROWS = 10


def fit_mggd(
    x,
    cfg: TylerConfig | None = None,
    beta: float | None = None,
    beta_bounds=constants.BETA_BOUNDS,
) -> FittedNull:
    """Fit (mu, Sigma, beta) robustly and build the whitening map.

    Pass ``beta`` to pin the shape (``beta=1`` fits the Gaussian null).
    """
    cfg = cfg or TylerConfig()
    x = as_sample(x, min_rows=MIN_FIT_ROWS)
    m = x.shape[1]
    mu, med_it, _, med_ok = _weiszfeld(x, constants.MEDIAN_TOL, constants.MEDIAN_MAX_ITER)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        ty = tyler_regularized(x, mu, cfg, full_output=True)

    q_shape = _radii(x, mu, ty.shape)
    clamped = False
    if beta is None:
        ratio = float(np.mean(q_shape**2) / np.mean(q_shape) ** 2)
        beta_hat, clamped = solve_beta(ratio, m, beta_bounds)
    else:
        beta_hat = validate_beta(beta)
    s2 = q_shape.mean() / mahalanobis_moment(m, beta_hat, 1)
    if not s2 > 0:
        raise NumericalError("all Mahalanobis radii are zero")
    sigma = ty.shape.scaled(s2)

    # one refinement pass under the calibrated scale
    change = 0.0
    if beta is None:
        q = _radii(x, mu, sigma)
        beta_new, clamped = solve_beta(float(np.mean(q**2) / np.mean(q) ** 2), m, beta_bounds)
        change = abs(beta_new - beta_hat)
        if change > 0:
            beta_hat = beta_new
            sigma = sigma.scaled(q.mean() / mahalanobis_moment(m, beta_hat, 1))

    params = MggdParams(mu, sigma, beta_hat)
    diag = FitDiagnostics(
        median_iterations=med_it,
        median_converged=med_ok,
        tyler_iterations=ty.iterations,
        tyler_residual=ty.residual,
        tyler_converged=ty.converged,
        rho=ty.rho,
        n_dropped=ty.n_dropped,
        beta_clamped=clamped,
        beta_refinement_change=change,
        spectrum=condition_diagnostics(sigma),
    )
    if diag.ill_conditioned:
        logger.warning("fitted scatter is ill conditioned (cond=%.3g)", diag.spectrum.condition_number)
    return FittedNull(params, WhiteningMap.from_scatter(mu, sigma), diag)
