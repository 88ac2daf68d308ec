"""Orthonormal 1-D Haar wavelet transform for power-of-two lengths.

Full-depth (log2 n levels) decomposition with analysis filters
(1/sqrt2, 1/sqrt2) and (1/sqrt2, -1/sqrt2), recursing on the scaling
band. Coefficient 0 of the output is the scaling/DC coefficient.
Implemented as in-place lifting over an arbitrary array axis, so stacks
of vectors transform in one call.
"""

import numpy as np

from .errors import DimensionError

_INV_SQRT2 = np.sqrt(0.5)  # directly-rounded 1/sqrt(2)


def _check_length(n: int):
    if n < 1 or (n & (n - 1)) != 0:
        raise DimensionError(f"transform length must be a power of two, got {n}")


def _scratch_pair(x):
    half = x[: x.shape[0] // 2]
    return np.empty_like(half), np.empty_like(half)


def _lift_forward(x, scratch=None):
    # in place along axis 0; caller owns x
    h = x.shape[0]
    if h == 1:
        return x
    a_buf, d_buf = scratch if scratch is not None else _scratch_pair(x)
    while h > 1:
        half = h // 2
        even = x[0:h:2]
        odd = x[1:h:2]
        a = a_buf[:half]
        d = d_buf[:half]
        np.add(even, odd, out=a)
        a *= _INV_SQRT2
        np.subtract(even, odd, out=d)
        d *= _INV_SQRT2
        x[:half] = a
        x[half:h] = d
        h = half
    return x


def _lift_inverse(x, scratch=None):
    n = x.shape[0]
    if n == 1:
        return x
    a_buf, d_buf = scratch if scratch is not None else _scratch_pair(x)
    h = 1
    while h < n:
        a = a_buf[:h]
        d = d_buf[:h]
        a[:] = x[:h]
        d[:] = x[h : 2 * h]
        even = x[0 : 2 * h : 2]
        odd = x[1 : 2 * h : 2]
        np.add(a, d, out=even)
        even *= _INV_SQRT2
        np.subtract(a, d, out=odd)
        odd *= _INV_SQRT2
        h *= 2
    return x


def haar_forward(values, axis: int = -1) -> np.ndarray:
    """Full-depth orthonormal Haar analysis along `axis`.

    Length 1 is the identity. Returns a new float64 array of the same
    shape; the DC coefficient lands at index 0 of `axis`.
    """
    x = np.array(values, dtype=np.float64, copy=True)
    moved = np.moveaxis(x, axis, 0)
    _check_length(moved.shape[0])
    _lift_forward(moved)
    return x


def haar_inverse(coeffs, axis: int = -1) -> np.ndarray:
    """Inverse of haar_forward (exact up to floating-point round-off)."""
    x = np.array(coeffs, dtype=np.float64, copy=True)
    moved = np.moveaxis(x, axis, 0)
    _check_length(moved.shape[0])
    _lift_inverse(moved)
    return x
