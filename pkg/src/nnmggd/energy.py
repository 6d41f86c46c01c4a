"""Two-sample energy distance."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .distribution import as_sample
from .exceptions import DataError


def energy_distance(z, y, scaled: bool = True) -> float:
    """``2 E||Z - Y|| - E||Z - Z'|| - E||Y - Y'||`` with V-statistic means.

    With ``scaled=True`` the value is multiplied by ``n_z n_y / (n_z + n_y)``.
    """
    z = as_sample(z, min_rows=1)
    y = as_sample(y, min_rows=1)
    if z.shape[1] != y.shape[1]:
        raise DataError(f"dimension mismatch: {z.shape[1]} vs {y.shape[1]}")
    e = 2.0 * cdist(z, y).mean() - cdist(z, z).mean() - cdist(y, y).mean()
    # rounding can leave a tiny negative value for identical samples
    e = max(e, 0.0)
    if scaled:
        nz, ny = len(z), len(y)
        e *= nz * ny / (nz + ny)
    return float(e)
