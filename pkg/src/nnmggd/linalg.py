"""Symmetric positive-definite matrix algebra.

A single eigendecomposition per matrix serves the symmetric square root,
the inverse square root, the log-determinant and the conditioning report.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import constants
from .exceptions import (
    ConditioningError,
    DataError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)


@dataclass(frozen=True)
class SpectrumReport:
    lambda_min: float
    lambda_max: float
    condition_number: float


class SpdMatrix:
    """Symmetric positive-definite matrix with a cached spectral factorization.

    Eigenvalues are stored in descending order. Instances are immutable;
    derived matrices are computed lazily and cached.
    """

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DataError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DataError("matrix has non-finite entries")
        scale = np.max(np.abs(a)) if a.size else 0.0
        asym = np.max(np.abs(a - a.T)) if a.size else 0.0
        if asym > constants.SYMMETRY_RTOL * scale:
            raise NotSymmetricError(f"max asymmetry {asym:.3e} exceeds tolerance")
        a = 0.5 * (a + a.T)
        w, v = np.linalg.eigh(a)
        if w[0] <= 0:
            raise NotPositiveDefiniteError(w[0])
        self._a = a
        self._a.setflags(write=False)
        self.eigenvalues = w[::-1].copy()
        self.eigenvectors = v[:, ::-1].copy()
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def matrix(self) -> np.ndarray:
        return self._a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._a, dtype=dtype)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, cond={self.condition_number:.3g})"

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues[0] / self.eigenvalues[-1])

    def _check_conditioning(self):
        if self.condition_number > constants.MAX_CONDITION:
            raise ConditioningError(self.condition_number)

    def _spectral(self, power):
        v = self.eigenvectors
        out = (v * self.eigenvalues**power) @ v.T
        return 0.5 * (out + out.T)

    @cached_property
    def sqrt(self) -> np.ndarray:
        self._check_conditioning()
        out = self._spectral(0.5)
        out.setflags(write=False)
        return out

    @cached_property
    def inv_sqrt(self) -> np.ndarray:
        self._check_conditioning()
        out = self._spectral(-0.5)
        out.setflags(write=False)
        return out

    @cached_property
    def inverse(self) -> np.ndarray:
        out = self._spectral(-1.0)
        out.setflags(write=False)
        return out

    @cached_property
    def logdet(self) -> float:
        return float(np.sum(np.log(self.eigenvalues)))

    def scaled(self, c: float) -> "SpdMatrix":
        """``c * self`` for c > 0, reusing the eigenvectors."""
        if not c > 0:
            raise NotPositiveDefiniteError(c)
        out = object.__new__(SpdMatrix)
        out._a = c * self._a
        out._a.setflags(write=False)
        out.eigenvalues = c * self.eigenvalues
        out.eigenvalues.setflags(write=False)
        out.eigenvectors = self.eigenvectors
        return out

    def reconstruction_error(self) -> float:
        """Relative Frobenius error of ``V diag(lambda) V^T`` against the entries."""
        v = self.eigenvectors
        rec = (v * self.eigenvalues) @ v.T
        return float(np.linalg.norm(rec - self._a) / np.linalg.norm(self._a))


def factorize(a) -> SpdMatrix:
    """Validate a symmetric matrix and cache its eigendecomposition."""
    return SpdMatrix(a)


def sqrt(s: SpdMatrix) -> np.ndarray:
    return s.sqrt


def inv_sqrt(s: SpdMatrix) -> np.ndarray:
    return s.inv_sqrt


def condition_diagnostics(s: SpdMatrix) -> SpectrumReport:
    lmin = float(s.eigenvalues[-1])
    lmax = float(s.eigenvalues[0])
    return SpectrumReport(lmin, lmax, lmax / lmin)


@dataclass(frozen=True)
class WhiteningMap:
    """Affine map ``x -> sigma_inv_sqrt @ (x - mu_hat)``."""

    mu_hat: np.ndarray
    sigma_inv_sqrt: np.ndarray

    @classmethod
    def from_scatter(cls, mu_hat, sigma: SpdMatrix) -> "WhiteningMap":
        return cls(np.asarray(mu_hat, dtype=float), sigma.inv_sqrt)

    @property
    def dim(self) -> int:
        return self.mu_hat.shape[0]

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DataError(f"dimension mismatch: map has m={self.dim}, data has {x.shape[-1]}")
        return x

    def whiten(self, x) -> np.ndarray:
        x = self._check(x)
        # sigma_inv_sqrt is symmetric, so right-multiplication applies it row-wise
        return (x - self.mu_hat) @ self.sigma_inv_sqrt

    def unwhiten(self, z) -> np.ndarray:
        z = self._check(z)
        return np.linalg.solve(self.sigma_inv_sqrt, z.T).T + self.mu_hat


def whiten(wmap: WhiteningMap, x) -> np.ndarray:
    return wmap.whiten(x)
