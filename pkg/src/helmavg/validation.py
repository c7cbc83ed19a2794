"""Input validation helpers shared by the estimator-facing surfaces."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .geometry import NETWORK_INPUTS, R_MAX, R_MIN, RadialProfile


def as_radii_matrix(X, check_bounds: bool = True) -> np.ndarray:
    """Coerce input to an (n, 5) float array of radii.

    Rows with 1, 2 or 3 columns are broadcast to the 5-point grid the
    network consumes (the described polygon is unchanged).
    """
    X = check_array(X, dtype=float, ensure_2d=True)
    k = X.shape[1]
    if k != NETWORK_INPUTS:
        if k not in (1, 2, 3):
            raise ValueError(f"expected 1, 2, 3 or {NETWORK_INPUTS} radii per row, got {k}")
        X = np.stack([RadialProfile(tuple(row)).as_network_input() for row in X])
    if check_bounds and (X.min() < R_MIN - 1e-12 or X.max() > R_MAX + 1e-12):
        raise ValueError(f"radii must lie in [{R_MIN}, {R_MAX}]")
    return X


def check_finite_vector(y, name: str = "y") -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite values")
    return y
