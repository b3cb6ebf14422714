"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def check_positive(name: str, value: float, *, strict: bool = True) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name}: must be finite, got {value!r}")
    if strict and value <= 0.0:
        raise ValueError(f"{name}: must be strictly positive, got {value!r}")
    if not strict and value < 0.0:
        raise ValueError(f"{name}: must be non-negative, got {value!r}")
    return value


def check_in_range(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not (lo <= value <= hi):
        raise ValueError(f"{name}: must lie in [{lo}, {hi}], got {value!r}")
    return value


def as_float_array(x, name: str, *, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name}: expected a {ndim}-d array, got shape {arr.shape}")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite entries")
    return arr


def check_pmf(p, name: str, *, tol: float = 1e-9) -> np.ndarray:
    """Validate a probability mass function: 1-d, non-negative, sums to one."""
    arr = as_float_array(p, name, ndim=1)
    if arr.size == 0:
        raise ValueError(f"{name}: empty pmf")
    if np.any(arr < 0):
        raise ValueError(f"{name}: contains negative probabilities")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name}: probabilities sum to {total!r}, expected 1")
    return arr


def check_consistent_length(name_a: str, a, name_b: str, b) -> None:
    if len(a) != len(b):
        raise ValueError(
            f"{name_a} and {name_b} must have equal length, got {len(a)} vs {len(b)}"
        )
