"""Pooled-sample 1-nearest-neighbour graph and cross-edge counts.

Distances are compared as squared Euclidean norms computed from explicit
coordinate differences, so both search paths see identical numbers. Ties
go to the smallest index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .distribution import as_sample
from .exceptions import DataError

logger = logging.getLogger(__name__)

DATA = 0
REFERENCE = 1

_BLOCK_ELEMENTS = 1 << 20


def _sq_dists(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = points[None, :, :] - query[:, None, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _nn_brute(points, rows):
    n_pts, m = points.shape
    out = np.empty(len(rows), dtype=np.intp)
    block = max(1, _BLOCK_ELEMENTS // max(1, n_pts * m))
    for start in range(0, len(rows), block):
        idx = rows[start : start + block]
        d = _sq_dists(points, points[idx])
        d[np.arange(len(idx)), idx] = np.inf
        # argmin returns the first minimum: smallest-index tie rule
        out[start : start + block] = np.argmin(d, axis=1)
    return out


def _nn_kdtree(points, rows):
    tree = cKDTree(points)
    dist, nbr = tree.query(points[rows], k=2)
    out = np.empty(len(rows), dtype=np.intp)
    for j, i in enumerate(rows):
        radius = dist[j, 1] if nbr[j, 0] == i else dist[j, 0]
        cand = np.asarray(tree.query_ball_point(points[i], radius * (1 + 1e-9) + 1e-300), dtype=np.intp)
        cand = np.sort(cand[cand != i])
        d = _sq_dists(points[cand], points[i : i + 1])[0]
        out[j] = cand[np.argmin(d)]
    return out


def nearest_neighbor_indices(points, method: str = "brute", rows=None) -> np.ndarray:
    """Index of each point's nearest other point.

    Parameters
    ----------
    points : (N, m) array, N >= 2
    method : {"brute", "kdtree"}
        Both return identical results, ties included.
    rows : optional index array restricting the query points.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 2:
        raise DataError("need at least two points")
    rows = np.arange(points.shape[0]) if rows is None else np.asarray(rows, dtype=np.intp)
    if method == "brute":
        return _nn_brute(points, rows)
    if method == "kdtree":
        return _nn_kdtree(points, rows)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class PooledCloud:
    """Pooled points with a DATA/REFERENCE label per row."""

    points: np.ndarray
    labels: np.ndarray

    @classmethod
    def pool(cls, z, y) -> "PooledCloud":
        z = as_sample(z, min_rows=1)
        y = as_sample(y, min_rows=1)
        if z.shape[1] != y.shape[1]:
            raise DataError(f"dimension mismatch: {z.shape[1]} vs {y.shape[1]}")
        points = np.vstack([z, y])
        labels = np.r_[np.full(len(z), DATA), np.full(len(y), REFERENCE)]
        n_unique = len(np.unique(points, axis=0))
        if n_unique < len(points):
            logger.warning("pooled cloud has %d duplicate points; ties resolved by index", len(points) - n_unique)
        return cls(points, labels)

    def count(self, label) -> int:
        return int(np.sum(self.labels == label))


def within_count(cloud: PooledCloud, target_label=REFERENCE, method: str = "brute") -> int:
    """Number of points with ``target_label`` whose nearest neighbour shares that label."""
    rows = np.flatnonzero(cloud.labels == target_label)
    if len(rows) == 0:
        return 0
    nn = nearest_neighbor_indices(cloud.points, method, rows)
    return int(np.sum(cloud.labels[nn] == target_label))


@dataclass(frozen=True)
class NnStatResult:
    t_count: int
    n: int

    @property
    def z_score(self) -> float:
        return (self.t_count - self.n / 2) / math.sqrt(self.n / 4)


def cross_edge_statistic(z, y, method: str = "brute") -> NnStatResult:
    """Count reference points whose nearest pooled neighbour is a reference point."""
    cloud = PooledCloud.pool(z, y)
    return NnStatResult(within_count(cloud, REFERENCE, method), cloud.count(REFERENCE))
