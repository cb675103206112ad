"""Input validation helpers shared by the estimator API and the CLI."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def check_series(y, name: str = "y", min_length: int = 2) -> np.ndarray:
    """Coerce to a 1-D float array and reject NaN/inf, naming the first bad row."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.shape[0] < min_length:
        raise DataError(f"{name} needs at least {min_length} observations, got {arr.shape[0]}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise DataError(f"{name} contains a non-finite value at row {int(bad[0])}")
    return arr
