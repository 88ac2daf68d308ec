"""Exhaustive block matching: build the group-coordinate table once per run.

Reference blocks are laid on a stride grid (plus the last row/column) so
that every pixel is covered by at least one block. For each reference,
all in-bounds blocks whose top-left corner lies in the square search
window around the reference are ranked by sum-of-squared-differences
with raster-order tie-break; the reference itself always ranks first.
The top candidates form the group, truncated to a power of two so the
group spectrum transform stays applicable.

The per-displacement distance maps are computed with running-sum box
filters over difference images, which keeps the search exhaustive while
touching each pixel only a handful of times per displacement.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, FormatError

TABLE_MAGIC = b"NN3DGT01"


@dataclass(frozen=True)
class MatchConfig:
    """Block-matching geometry.

    n1: block side length. n2: target group size (power of two).
    search_radius: half-width of the square candidate window around each
    reference top-left corner. ref_stride: grid step between reference
    blocks; must not exceed n1 or coverage would break.
    """

    n1: int = 10
    n2: int = 32
    search_radius: int = 19
    ref_stride: int = 5

    def __post_init__(self):
        if self.n1 < 1:
            raise ConfigError(f"n1 must be >= 1, got {self.n1}")
        if self.n2 < 1 or (self.n2 & (self.n2 - 1)) != 0:
            raise ConfigError(f"n2 must be a power of two >= 1, got {self.n2}")
        if self.search_radius < 0:
            raise ConfigError(f"search_radius must be >= 0, got {self.search_radius}")
        if not (1 <= self.ref_stride <= self.n1):
            raise ConfigError(
                f"ref_stride must be in [1, n1={self.n1}], got {self.ref_stride}"
            )


@dataclass
class GroupTable:
    """Ordered groups of mutually similar block coordinates.

    coords[j, :sizes[j]] are the (row, col) block corners of group j,
    reference first. image_shape is (height, width) of the source plane
    when known (tables loaded from a sidecar file carry None).
    """

    coords: np.ndarray  # (n_groups, max_size, 2) int32
    sizes: np.ndarray  # (n_groups,) int32
    n1: int
    n2: int
    image_shape: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.sizes)

    def group(self, j: int) -> np.ndarray:
        return self.coords[j, : self.sizes[j]]

    @property
    def groups(self):
        return [self.group(j) for j in range(len(self))]

    def save(self, path) -> None:
        """Write the binary sidecar (magic, n1, n2, count, groups)."""
        parts = [
            TABLE_MAGIC,
            np.array([self.n1, self.n2, len(self)], dtype="<u4").tobytes(),
        ]
        for j in range(len(self)):
            g = self.group(j)
            parts.append(np.array([len(g)], dtype="<u4").tobytes())
            parts.append(g.astype("<u4").tobytes())
        with open(path, "wb") as fh:
            fh.write(b"".join(parts))

    @classmethod
    def load(cls, path) -> "GroupTable":
        with open(path, "rb") as fh:
            buf = fh.read()
        if len(buf) < 20 or buf[:8] != TABLE_MAGIC:
            raise FormatError(f"{path}: not a group-table sidecar")
        n1, n2, count = (int(v) for v in np.frombuffer(buf, "<u4", 3, offset=8))
        offset = 20
        groups = []
        for _ in range(count):
            if offset + 4 > len(buf):
                raise FormatError(f"{path}: truncated group table")
            size = int(np.frombuffer(buf, "<u4", 1, offset=offset)[0])
            offset += 4
            end = offset + 8 * size
            if end > len(buf):
                raise FormatError(f"{path}: truncated group table")
            g = np.frombuffer(buf, "<u4", 2 * size, offset=offset)
            groups.append(g.reshape(size, 2).astype(np.int32))
            offset = end
        if offset != len(buf):
            raise FormatError(f"{path}: trailing bytes in group table")
        max_size = max((len(g) for g in groups), default=0)
        coords = np.zeros((count, max_size, 2), dtype=np.int32)
        sizes = np.zeros(count, dtype=np.int32)
        for j, g in enumerate(groups):
            coords[j, : len(g)] = g
            sizes[j] = len(g)
        return cls(coords=coords, sizes=sizes, n1=n1, n2=n2, image_shape=None)


def match_distance(a, b) -> float:
    """Unnormalized sum of squared per-pixel differences."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"block shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sum(d * d))


def _reference_grid(extent: int, n1: int, stride: int) -> np.ndarray:
    grid = list(range(0, extent - n1 + 1, stride))
    if grid[-1] != extent - n1:
        grid.append(extent - n1)
    return np.asarray(grid, dtype=np.int64)


def _displacements(radius: int):
    side = 2 * radius + 1
    dy = np.repeat(np.arange(-radius, radius + 1), side)
    dx = np.tile(np.arange(-radius, radius + 1), side)
    return dy, dx


def _distance_matrix(pilot, n1, radius, ref_rows, ref_cols):
    """Distances from every reference to every window displacement.

    Entry [j, i] is the SSD between reference block j and the block at
    displacement i, +inf where the displaced block is out of bounds.
    The zero displacement is forced to -inf so the reference sorts
    first. Each displacement pair (d, -d) shares one difference image:
    the distance map of -d is the map of d sampled at shifted positions.
    """
    h, w = pilot.shape
    nc = len(ref_cols)
    side = 2 * radius + 1
    dist = np.full((len(ref_rows) * nc, side * side), np.inf)
    dist[:, radius * side + radius] = -np.inf
    vh, vw = h - n1, w - n1
    for dy in range(0, radius + 1):
        r1 = vh - dy
        if r1 < 0:
            break
        mask_p = ref_rows <= r1
        mask_m = ref_rows >= dy
        rows_p = ref_rows[mask_p]
        rows_m = ref_rows[mask_m] - dy
        idx_rp = np.nonzero(mask_p)[0]
        idx_rm = np.nonzero(mask_m)[0]
        rows_all = np.unique(np.concatenate([rows_p, rows_m]))
        pos_p = np.searchsorted(rows_all, rows_p)
        pos_m = np.searchsorted(rows_all, rows_m)
        for dx in range(1 if dy == 0 else -radius, radius + 1):
            c0 = max(0, -dx)
            c1 = vw - max(0, dx)
            if c1 < c0:
                continue
            a = pilot[0 : r1 + n1, c0 : c1 + n1]
            b = pilot[dy : r1 + n1 + dy, c0 + dx : c1 + n1 + dx]
            p = a - b
            np.multiply(p, p, out=p)
            cs = np.cumsum(p, axis=0)
            vert = cs[rows_all + n1 - 1]
            inner = rows_all > 0
            vert[inner] -= cs[rows_all[inner] - 1]
            c2 = np.cumsum(vert, axis=1)
            dmap = np.empty((len(rows_all), c1 - c0 + 1))
            dmap[:, 0] = c2[:, n1 - 1]
            dmap[:, 1:] = c2[:, n1:] - c2[:, :-n1]

            di = (dy + radius) * side + (dx + radius)
            mask_c = (ref_cols >= c0) & (ref_cols <= c1)
            idx_c = np.nonzero(mask_c)[0]
            sub = dmap[np.ix_(pos_p, ref_cols[mask_c] - c0)]
            dist[(idx_rp[:, None] * nc + idx_c[None, :]).ravel(), di] = sub.ravel()

            di_m = (-dy + radius) * side + (-dx + radius)
            mask_cm = (ref_cols - dx >= c0) & (ref_cols - dx <= c1)
            idx_cm = np.nonzero(mask_cm)[0]
            sub_m = dmap[np.ix_(pos_m, ref_cols[mask_cm] - dx - c0)]
            dist[(idx_rm[:, None] * nc + idx_cm[None, :]).ravel(), di_m] = sub_m.ravel()
    return dist


def _select_candidates(dist, n2):
    """Indices of the top-n2 displacements per reference.

    Ordered by (distance, raster position of the candidate); raster
    order falls out of the displacement enumeration plus stable sorting.
    The partition fast path is repaired by a full stable sort whenever
    equal distances straddle the selection boundary.
    """
    n_refs, n_disp = dist.shape
    if n_disp <= 4 * n2:
        order = np.argsort(dist, axis=1, kind="stable")
        return order[:, : min(n2, n_disp)]
    part = np.argpartition(dist, n2 - 1, axis=1)[:, :n2]
    part.sort(axis=1)
    part_vals = np.take_along_axis(dist, part, axis=1)
    by_value = np.argsort(part_vals, axis=1, kind="stable")
    sel = np.take_along_axis(part, by_value, axis=1)
    boundary = np.take_along_axis(part_vals, by_value[:, -1:], axis=1)[:, 0]
    ambiguous = np.nonzero((dist <= boundary[:, None]).sum(axis=1) > n2)[0]
    for j in ambiguous:
        sel[j] = np.argsort(dist[j], kind="stable")[:n2]
    return sel


def build_group_table(pilot, cfg: MatchConfig = MatchConfig()) -> GroupTable:
    """Build the look-up table of similar-block groups from `pilot`.

    Deterministic for identical (pilot, cfg). Groups are ordered by the
    raster position of their reference block; group j lists its
    reference coordinate first. Group size is the largest power of two
    that fits both cfg.n2 and the candidate pool.
    """
    pilot = np.asarray(pilot, dtype=np.float64)
    h, w = pilot.shape
    if h < cfg.n1 or w < cfg.n1:
        raise DimensionError(f"image {h}x{w} smaller than block size {cfg.n1}")
    ref_rows = _reference_grid(h, cfg.n1, cfg.ref_stride)
    ref_cols = _reference_grid(w, cfg.n1, cfg.ref_stride)
    dist = _distance_matrix(pilot, cfg.n1, cfg.search_radius, ref_rows, ref_cols)
    sel = _select_candidates(dist, cfg.n2)
    sel_vals = np.take_along_axis(dist, sel, axis=1)

    # pool size = selected finite candidates + the reference itself
    pool = np.isfinite(sel_vals).sum(axis=1, dtype=np.int64) + 1
    pool = np.minimum(pool, cfg.n2)
    sizes = (1 << (np.frexp(pool)[1] - 1)).astype(np.int32)

    dy, dx = _displacements(cfg.search_radius)
    refs_r = np.repeat(ref_rows, len(ref_cols))
    refs_c = np.tile(ref_cols, len(ref_rows))
    coords = np.stack(
        [refs_r[:, None] + dy[sel], refs_c[:, None] + dx[sel]], axis=2
    ).astype(np.int32)
    unused = np.arange(sel.shape[1])[None, :] >= sizes[:, None]
    coords[unused] = 0
    return GroupTable(
        coords=coords, sizes=sizes, n1=cfg.n1, n2=cfg.n2, image_shape=(h, w)
    )
