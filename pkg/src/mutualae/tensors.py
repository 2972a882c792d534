"""Tensor construction helpers.

All numerics in this package are plain numpy float64 arrays in row-major
order.  ``tensor`` is the validating constructor: it enforces the finite-
values contract at the boundary so NaN/Inf never enter a network.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def check_finite(arr: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")
    return arr


def tensor(data, shape=None) -> np.ndarray:
    """Build a float64 array, rejecting NaN/Inf and shape mismatches."""
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None:
        shape = tuple(shape)
        if arr.size != int(np.prod(shape)):
            raise ShapeError(
                f"data length {arr.size} does not match shape {shape}"
            )
        arr = arr.reshape(shape)
    check_finite(arr)
    return arr
