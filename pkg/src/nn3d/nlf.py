"""Nonlocal filter: group-wise spectrum shrinkage and weighted aggregation.

Each group of blocks listed in a GroupTable is extracted from the input
plane, its length-m fibers (one per block pixel position, running along
the similarity dimension) are Haar-transformed, every coefficient is
attenuated by the Wiener-like factor q^2/(q^2 + tau^2), and the inverse
transform yields the filtered blocks. Filtered blocks are returned to
their coordinates and averaged with one scalar weight per group, the
reciprocal of the squared 2-norm of the group's shrinkage factors.

Aggregation runs in a fixed group order regardless of the `threads`
setting, so the output is bit-reproducible for a given table.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .block_matching import GroupTable
from .errors import DimensionError
from .haar import _lift_forward, _lift_inverse

WEIGHT_ENERGY_FLOOR = 1e-12


@dataclass
class Group:
    """A stack of similar blocks and the coordinates they came from."""

    blocks: np.ndarray  # (m, n1, n1), similarity dimension first
    coords: np.ndarray  # (m, 2) int

    def __post_init__(self):
        m = self.blocks.shape[0]
        if m < 1 or (m & (m - 1)) != 0:
            raise DimensionError(f"group size must be a power of two, got {m}")
        if len(self.coords) != m:
            raise DimensionError("blocks and coords length mismatch")


def shrink(q, tau):
    """Attenuate q by q^2/(q^2 + tau^2); 0 where both q and tau are 0.

    Accepts scalars or arrays. The factor form keeps tau = 0 an exact
    identity.
    """
    q = np.asarray(q, dtype=np.float64)
    q2 = q * q
    denom = q2 + tau * tau
    factor = np.divide(q2, denom, out=np.zeros_like(q2), where=denom != 0.0)
    out = q * factor
    if out.ndim == 0:
        return float(out)
    return out


def extract_group(plane, coords, n1: int) -> Group:
    """Stack the n1 x n1 blocks at `coords` from `plane`."""
    arr = np.asarray(plane, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.int64)
    h, w = arr.shape
    if coords.min() < 0 or (coords[:, 0] + n1 > h).any() or (coords[:, 1] + n1 > w).any():
        raise DimensionError("group coordinates out of bounds")
    win = sliding_window_view(arr, (n1, n1))
    return Group(blocks=win[coords[:, 0], coords[:, 1]].copy(), coords=coords)


def filter_group(group: Group, tau: float):
    """Shrink one group's spectra; returns (filtered group, weight)."""
    m, n1, _ = group.blocks.shape
    fibers = group.blocks.reshape(m, n1 * n1).copy()
    spectrum = _lift_forward(fibers)
    q2 = spectrum * spectrum
    denom = q2 + tau * tau
    factors = np.divide(q2, denom, out=np.zeros_like(q2), where=denom != 0.0)
    energy = float(np.sum(factors * factors))
    weight = 1.0 / max(energy, WEIGHT_ENERGY_FLOOR)
    spectrum *= factors
    filtered = _lift_inverse(spectrum).reshape(m, n1, n1)
    return Group(blocks=filtered, coords=group.coords), weight


def apply_nlf(plane, table: GroupTable, tau: float, threads: int = 1) -> np.ndarray:
    """Filter every group of `table` on `plane` and aggregate the blocks.

    tau = 0 keeps every coefficient, so each block contributes its own
    unmodified pixels and the weighted average returns the input
    exactly; that case short-circuits. The transform stage may be
    chunked across `threads`; per-group results do not depend on the
    chunking and aggregation always runs in one fixed-order pass.
    """
    arr = np.asarray(plane, dtype=np.float64)
    _check_table(arr, table)
    if tau == 0.0:
        return arr.copy()
    h, w = arr.shape
    n1 = table.n1
    win = sliding_window_view(arr, (n1, n1))
    numerator = np.zeros(h * w)
    denominator = np.zeros(h * w)
    for rows_t, cols_t, lin, corners in _aggregation_plan(table, (h, w)):
        size, count = rows_t.shape
        values = np.empty((size, count * n1 * n1))
        weights = np.empty(count)
        spans = _spans(count, threads)
        if len(spans) == 1:
            _filter_span(win, rows_t, cols_t, tau, n1, values, weights, spans[0])
        else:
            with ThreadPoolExecutor(max_workers=len(spans)) as pool:
                list(
                    pool.map(
                        lambda s: _filter_span(
                            win, rows_t, cols_t, tau, n1, values, weights, s
                        ),
                        spans,
                    )
                )
        numerator += np.bincount(lin.ravel(), weights=values.ravel(), minlength=h * w)
        denominator += _denominator(corners, weights, (h, w))
    if denominator.min() <= 0.0:
        raise DimensionError("table does not cover every pixel of the plane")
    return (numerator / denominator).reshape(h, w)


def _check_table(arr, table):
    h, w = arr.shape
    if table.image_shape is not None:
        if tuple(table.image_shape) != (h, w):
            raise DimensionError(
                f"table built for {table.image_shape}, plane is {(h, w)}"
            )
        return
    if len(table):
        rows = table.coords[..., 0]
        cols = table.coords[..., 1]
        if rows.min() < 0 or cols.min() < 0:
            raise DimensionError("table coordinates out of bounds")
        if (rows + table.n1 > h).any() or (cols + table.n1 > w).any():
            raise DimensionError("table coordinates out of bounds for plane")


def _spans(n, threads):
    threads = max(1, min(int(threads), n))
    if threads == 1:
        return [(0, n)]
    bounds = np.linspace(0, n, threads + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _filter_span(win, rows_t, cols_t, tau, n1, values, weights, span):
    lo, hi = span
    npix = n1 * n1
    x = win[rows_t[:, lo:hi], cols_t[:, lo:hi]].reshape(rows_t.shape[0], -1)
    scratch = None
    if x.shape[0] > 1:
        half = np.empty_like(x[: x.shape[0] // 2])
        scratch = (half, np.empty_like(half))
    _lift_forward(x, scratch)
    q2 = x * x
    denom = q2 + tau * tau
    np.divide(q2, denom, out=denom)  # factors; tau > 0 keeps denom positive
    f3 = denom.reshape(denom.shape[0], hi - lo, npix)
    energy = np.einsum("sbp,sbp->b", f3, f3)
    w = 1.0 / np.maximum(energy, WEIGHT_ENERGY_FLOOR)
    f3 *= w[None, :, None]  # fold the group weight into the factors
    x *= denom
    _lift_inverse(x, scratch)
    values[:, lo * npix : hi * npix] = x
    weights[lo:hi] = w


def _aggregation_plan(table, shape):
    """Per-size buckets with precomputed scatter indices, cached on the table."""
    key = ("aggregation", shape)
    plan = table._cache.get(key)
    if plan is None:
        h, w = shape
        n1 = table.n1
        offsets = (np.arange(n1)[:, None] * w + np.arange(n1)).ravel()
        plan = []
        for size in np.unique(table.sizes):
            idx = np.nonzero(table.sizes == size)[0]
            rows_t = np.ascontiguousarray(table.coords[idx, :size, 0].T, dtype=np.intp)
            cols_t = np.ascontiguousarray(table.coords[idx, :size, 1].T, dtype=np.intp)
            base = rows_t * w + cols_t  # (size, count)
            lin = base[:, :, None] + offsets[None, None, :]
            corners = _corner_indices(rows_t, cols_t, n1, (h, w))
            plan.append((rows_t, cols_t, lin, corners))
        table._cache[key] = plan
    return plan


def _corner_indices(rows_t, cols_t, n1, shape):
    # rectangle corners in the (h+1, w+1) difference grid, one per block
    h, w = shape
    top_left = rows_t * (w + 1) + cols_t
    return np.stack(
        [
            top_left,
            top_left + n1 * (w + 1) + n1,
            top_left + n1,
            top_left + n1 * (w + 1),
        ]
    )


def _denominator(corners, weights, shape):
    """Sum of per-group weights over each covered pixel.

    Every block adds a weighted n1 x n1 rectangle; rectangles are
    scattered as +/- corner pulses into a difference grid and integrated
    with two cumulative sums.
    """
    h, w = shape
    cells = (h + 1) * (w + 1)
    per_block = np.broadcast_to(weights[None, :], corners.shape[1:]).ravel()
    flat = corners.reshape(4, -1)
    diff = np.bincount(flat[0], weights=per_block, minlength=cells)
    diff += np.bincount(flat[1], weights=per_block, minlength=cells)
    diff -= np.bincount(flat[2], weights=per_block, minlength=cells)
    diff -= np.bincount(flat[3], weights=per_block, minlength=cells)
    grid = diff.reshape(h + 1, w + 1).cumsum(axis=0).cumsum(axis=1)
    return grid[:h, :w].ravel()
