"""Input validation helpers shared by the public estimator API."""

from __future__ import annotations

import numbers

import numpy as np

UPSAMPLE_FACTOR_RANGE = (1, 128)


def check_upsample_factor(n) -> int:
    lo, hi = UPSAMPLE_FACTOR_RANGE
    if not isinstance(n, numbers.Integral) or isinstance(n, bool) or not lo <= int(n) <= hi:
        raise ValueError(f"upsampling factor must be an integer in [{lo}, {hi}], got {n!r}")
    return int(n)


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_nonnegative(value, name: str) -> float:
    value = float(value)
    if value < 0:
        raise ValueError(f"{name} must be non-negative, got {value}")
    return value


def check_in(value, options, name: str):
    if value not in options:
        raise ValueError(f"{name} must be one of {tuple(options)}, got {value!r}")
    return value


def check_complex_vector(x, name: str, min_length: int = 1) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if len(x) < min_length:
        raise ValueError(f"{name} must have at least {min_length} samples, got {len(x)}")
    return np.ascontiguousarray(x, dtype=np.complex128)
