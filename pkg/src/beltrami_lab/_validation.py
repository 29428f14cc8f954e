"""Input checks shared by the estimator wrappers.

``sklearn.utils.check_array`` refuses complex input, so grids are validated here.
"""
from __future__ import annotations

import numpy as np

from .grid import ComplexField, GridSpec


def check_grid_array(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a complex square array whose side is a power of two, or raise ``ValueError``."""
    if isinstance(X, ComplexField):
        return X.samples
    arr = np.asarray(X)
    if arr.dtype == object or not np.issubdtype(arr.dtype, np.number):
        raise ValueError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    n = arr.shape[0]
    if n < 16 or n & (n - 1):
        raise ValueError(f"{name} side must be a power of two >= 16, got {n}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_points(Z) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(Z, dtype=complex))
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    return pts


def as_field(X, spec: GridSpec | None = None, half_width: float = 4.0, name: str = "X") -> ComplexField:
    """Wrap ``X`` as a field on ``spec`` (or on a grid of ``half_width`` centred at 0)."""
    if isinstance(X, ComplexField):
        if spec is not None and X.spec != spec:
            raise ValueError(f"{name} lives on a different grid than the fitted one")
        return X
    arr = check_grid_array(X, name)
    spec = spec or GridSpec(0j, half_width, arr.shape[0])
    if arr.shape[0] != spec.n:
        raise ValueError(f"{name} has side {arr.shape[0]}, expected {spec.n}")
    return ComplexField(spec, arr)
