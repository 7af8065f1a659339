"""Small input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np

from .errors import DegenerateLabelsError, NumericError, ShapeError


def as_float_array(a, name, ndim=None):
    """Coerce to a float64 ndarray and reject non-finite entries.

    ``np.inf`` is rejected too; operations that legitimately accept
    infinity (right-censoring bounds) handle it before calling this.
    """
    arr = np.asarray(a, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


def check_weights(w, n=None):
    """Validate a vector of fractional cure weights in [0, 1]."""
    w = as_float_array(w, "weights", ndim=1)
    if n is not None and w.shape[0] != n:
        raise ShapeError(f"weights have length {w.shape[0]}, expected {n}")
    if np.any(w < 0) or np.any(w > 1):
        raise NumericError("weights must lie in [0, 1]")
    return w


def check_binary_labels(labels, name="labels"):
    """Validate {0,1} labels and require both classes to be present."""
    arr = np.asarray(labels)
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (0, 1))):
        raise NumericError(f"{name} must be 0/1, got values {vals}")
    if vals.size < 2:
        raise DegenerateLabelsError(f"{name} contain a single class")
    return arr.astype(np.int64)


def check_pm_labels(labels, name="labels"):
    """Validate {-1,+1} labels and require both classes to be present."""
    arr = np.asarray(labels, dtype=float)
    vals = np.unique(arr)
    if not np.all(np.isin(vals, (-1.0, 1.0))):
        raise NumericError(f"{name} must be -1/+1, got values {vals}")
    if vals.size < 2:
        raise DegenerateLabelsError(f"{name} contain a single class")
    return arr


def check_matrix(z, name="z", n_rows=None, n_cols=None):
    """Validate a 2-d finite float matrix."""
    arr = as_float_array(z, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got shape {arr.shape}")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ShapeError(f"{name} has {arr.shape[0]} rows, expected {n_rows}")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ShapeError(f"{name} has {arr.shape[1]} columns, expected {n_cols}")
    return arr
