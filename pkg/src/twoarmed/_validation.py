"""Argument checks shared by the public functions and estimators."""

from __future__ import annotations

import math
import numbers

import numpy as np


def check_unit_interval(value, name: str, *, open_left=False, open_right=False) -> float:
    """Return ``value`` as a float after checking it lies in [0, 1] (or an open variant)."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    v = float(value)
    if math.isnan(v):
        raise ValueError(f"{name} must not be NaN")
    lo_ok = v > 0.0 if open_left else v >= 0.0
    hi_ok = v < 1.0 if open_right else v <= 1.0
    if not (lo_ok and hi_ok):
        lb = "(" if open_left else "["
        rb = ")" if open_right else "]"
        raise ValueError(f"{name} must lie in {lb}0, 1{rb}, got {v!r}")
    return v


def check_probability(value, name: str) -> float:
    return check_unit_interval(value, name)


def check_step(value, name: str = "gamma") -> float:
    return check_unit_interval(value, name, open_left=True, open_right=True)


def check_positive(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number")
    v = float(value)
    if not v > 0.0 or math.isinf(v):
        raise ValueError(f"{name} must be finite and > 0, got {v!r}")
    return v


def check_int(value, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    v = int(value)
    if v < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {v}")
    return v


def check_seed(value, name: str = "seed") -> int:
    v = check_int(value, name, minimum=0)
    if v >= 2**64:
        raise ValueError(f"{name} must fit in 64 bits")
    return v


def check_start_values(X) -> np.ndarray:
    """Validate a column (or 1-d array) of starting values in [0, 1] and return it flat."""
    from sklearn.utils.validation import check_array

    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    arr = check_array(arr, ensure_2d=True, dtype=float)
    if arr.shape[1] != 1:
        raise ValueError(f"expected a single column of start values, got shape {arr.shape}")
    flat = arr[:, 0]
    if np.any(flat < 0.0) or np.any(flat > 1.0):
        raise ValueError("start values must lie in [0, 1]")
    return flat
