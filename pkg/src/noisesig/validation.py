"""Input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import UsageError


def as_vector(y, name: str = "y") -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise UsageError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise UsageError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise UsageError(f"{name} contains a non-finite entry at position {bad}")
    return arr


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise UsageError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise UsageError(f"{name} must be non-empty")
    if not np.isfinite(arr).all():
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise UsageError(f"{name} contains a non-finite entry at row {i}, column {j}")
    return arr


def check_alpha(alpha: float, low: float = 0.0, high: float = 1.0,
                name: str = "alpha") -> float:
    alpha = float(alpha)
    if not (low < alpha < high):
        raise UsageError(f"{name} must lie in ({low}, {high}), got {alpha}")
    return alpha


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0) or not np.isfinite(value):
        raise UsageError(f"{name} must be a positive finite number, got {value}")
    return value


def check_count(value: int, name: str, minimum: int = 1) -> int:
    count = int(value)
    if count != value or count < minimum:
        raise UsageError(f"{name} must be an integer >= {minimum}, got {value}")
    return count
