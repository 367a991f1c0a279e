"""Brute-force and baseline estimators.

TLDE evaluates the disk count at every cell center of a dense grid; it is the
correctness oracle for the tree counts and the runtime baseline.  Maxmin and
k-NN density filtering are the landmark-subsampling baselines.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from . import _backend
from .core import Trajectory
from .counts import EPS_REL
from ._store import TrajectoryStore
from .errors import DomainError, FormatError, ParameterError

__all__ = [
    "Raster",
    "tlde_counts",
    "tlde_level_set",
    "disk_stamp",
    "maxmin_landmarks",
    "knn_scores",
    "knn_density_filter",
    "jaccard",
    "topology",
]


@dataclass
class Raster:
    """Dense 2-D grid; ``values[ix, iy]`` belongs to the cell centered at
    ``origin + (ix + 0.5, iy + 0.5) * cell_size``.

    ``origin`` is the lower-left corner of cell ``(0, 0)``.
    """

    origin: np.ndarray
    cell_size: float
    values: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(-1)
        self.values = np.asarray(self.values)
        if self.values.ndim != len(self.origin):
            raise DomainError("values rank must match origin dimension")
        if not self.cell_size > 0:
            raise DomainError(f"cell_size must be positive, got {self.cell_size}")

    @classmethod
    def zeros(cls, origin, cell_size, resolution, dtype=np.int64) -> "Raster":
        shape = tuple(int(n) for n in np.broadcast_to(resolution, (len(origin),)))
        return cls(origin, cell_size, np.zeros(shape, dtype=dtype))

    @classmethod
    def covering(cls, center, half_side, resolution, dtype=np.int64) -> "Raster":
        """Square grid of ``resolution`` cells per axis over ``center +- half_side``."""
        center = np.asarray(center, dtype=np.float64)
        return cls.zeros(center - half_side, 2.0 * half_side / resolution, resolution, dtype)

    @property
    def resolution(self) -> tuple:
        return self.values.shape

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.cell_size

    def cell_centers(self) -> np.ndarray:
        """All cell centers, shape ``(*resolution, d)``."""
        axes = [self.axis_centers(k) for k in range(self.values.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def like(self, values) -> "Raster":
        return Raster(self.origin.copy(), self.cell_size, values)

    def is_binary(self) -> bool:
        return bool(np.all((self.values == 0) | (self.values == 1)))

    def write_pgm(self, path, binary: bool | None = None) -> None:
        """Write as plain PBM (P1) or PGM (P2); the top row is the highest y."""
        if self.values.ndim != 2:
            raise DomainError("PGM export needs a 2-D raster")
        binary = self.is_binary() if binary is None else binary
        img = np.asarray(self.values).T[::-1]
        ny, nx = img.shape
        ox, oy, cs = (float(v) for v in (*self.origin, self.cell_size))
        comment = f"# origin={ox!r},{oy!r} cell_size={cs!r}"
        lines = ["P1" if binary else "P2", comment, f"{nx} {ny}"]
        if not binary:
            lines.append(str(max(int(img.max(initial=0)), 1)))
        lines.extend(" ".join(map(str, row)) for row in img.astype(np.int64))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def read_pgm(cls, path) -> "Raster":
        with open(path) as fh:
            text = fh.read()
        origin, cell = None, None
        tokens = []
        for lineno, line in enumerate(text.splitlines(), 1):
            if line.startswith("#"):
                fields = dict(f.split("=", 1) for f in line[1:].split() if "=" in f)
                try:
                    origin = [float(v) for v in fields["origin"].split(",")]
                    cell = float(fields["cell_size"])
                except (KeyError, ValueError):
                    raise FormatError(f"{path}:{lineno}: bad origin/cell_size comment")
                continue
            tokens.extend(line.split())
        if not tokens or tokens[0] not in ("P1", "P2") or origin is None:
            raise FormatError(f"{path}: not a plain PBM/PGM with origin comment")
        nx, ny = int(tokens[1]), int(tokens[2])
        body = tokens[3:] if tokens[0] == "P1" else tokens[4:]
        if len(body) != nx * ny:
            raise FormatError(f"{path}: expected {nx * ny} pixels, found {len(body)}")
        img = np.array(body, dtype=np.int64).reshape(ny, nx)
        return cls(origin, cell, img[::-1].T.copy())


def _grid_store(trajs: Sequence[Trajectory]) -> TrajectoryStore | None:
    trajs = list(trajs)
    if not trajs:
        return None
    store = TrajectoryStore(trajs[0].dim)
    for t in trajs:
        if t.dim != 2:
            raise DomainError("TLDE grids are 2-D; got a trajectory of dimension %d" % t.dim)
        store.add(t)
    return store


def tlde_counts(trajs: Sequence[Trajectory], r: float, grid: Raster, method: str = "sweep") -> Raster:
    """Disk count ``C_{B_r}`` at every cell center of ``grid``.

    Parameters
    ----------
    trajs : sequence of Trajectory
        2-D trajectories.
    r : float
        Disk radius.
    grid : Raster
        Grid descriptor; its values are ignored.
    method : {"sweep", "brute"}
        ``"sweep"`` visits only the cells near each edge; ``"brute"`` clips
        every trajectory against every cell's disk, O(cells x edges).
    """
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if method not in ("sweep", "brute"):
        raise ParameterError(f"unknown TLDE method {method!r}")
    nx, ny = grid.values.shape
    store = _grid_store(trajs)
    if store is None:
        return grid.like(np.zeros((nx, ny), dtype=np.int64))
    V, cum, off, nv = store.arrays()
    fn = _backend.kernels.tlde_sweep if method == "sweep" else _backend.kernels.tlde_brute
    counts = fn(V, cum, off, nv, float(grid.origin[0]), float(grid.origin[1]),
                float(grid.cell_size), nx, ny, float(r), EPS_REL * r)
    return grid.like(np.asarray(counts, dtype=np.int64))


def _disk_footprint(radius_cells: float) -> np.ndarray:
    k = int(np.floor(radius_cells))
    i = np.arange(-k, k + 1)
    return (i[:, None] ** 2 + i[None, :] ** 2) <= radius_cells**2 * (1 + 1e-12)


def tlde_level_set(counts: Raster, r: float, tau: int) -> Raster:
    """Union of discrete disks of radius ``r`` stamped at cells with count > ``tau``."""
    seeds = np.asarray(counts.values) > tau
    if not seeds.any():
        return counts.like(np.zeros(seeds.shape, dtype=np.uint8))
    foot = _disk_footprint(r / counts.cell_size)
    out = ndimage.binary_dilation(seeds, structure=foot)
    return counts.like(out.astype(np.uint8))


def disk_stamp(raster: Raster, centers, radius: float) -> Raster:
    """Set to 1 every cell whose center lies in a closed disk about a point of ``centers``."""
    values = np.zeros(raster.values.shape, dtype=np.uint8)
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 2)
    cs = raster.cell_size
    ox, oy = raster.origin
    nx, ny = values.shape
    r2 = radius * radius
    for cx, cy in centers:
        ix0 = max(int(np.ceil((cx - radius - ox) / cs - 0.5)), 0)
        ix1 = min(int(np.floor((cx + radius - ox) / cs - 0.5)), nx - 1)
        iy0 = max(int(np.ceil((cy - radius - oy) / cs - 0.5)), 0)
        iy1 = min(int(np.floor((cy + radius - oy) / cs - 0.5)), ny - 1)
        if ix0 > ix1 or iy0 > iy1:
            continue
        xs = ox + (np.arange(ix0, ix1 + 1) + 0.5) * cs - cx
        ys = oy + (np.arange(iy0, iy1 + 1) + 0.5) * cs - cy
        inside = xs[:, None] ** 2 + ys[None, :] ** 2 <= r2
        values[ix0:ix1 + 1, iy0:iy1 + 1] |= inside.astype(np.uint8)
    return raster.like(values)


def jaccard(a: Raster, b: Raster) -> float:
    """Intersection over union of two binary rasters on the same grid (1.0 if both empty)."""
    if a.values.shape != b.values.shape:
        raise DomainError("rasters differ in shape")
    x = np.asarray(a.values) > 0
    y = np.asarray(b.values) > 0
    union = np.count_nonzero(x | y)
    return 1.0 if union == 0 else np.count_nonzero(x & y) / union


def topology(raster: Raster) -> tuple[int, int]:
    """``(components, holes)`` of a binary raster.

    Foreground uses 8-connectivity; holes are 4-connected background
    components that do not touch the border.
    """
    fg = np.asarray(raster.values) > 0
    _, n_fg = ndimage.label(fg, structure=np.ones((3, 3)))
    bg, n_bg = ndimage.label(~fg)
    border = np.unique(np.concatenate([bg[0], bg[-1], bg[:, 0], bg[:, -1]]))
    holes = n_bg - np.count_nonzero(border > 0)
    return int(n_fg), int(holes)


def maxmin_landmarks(points, n: int, seed: int = 0, first: int | None = None) -> list[int]:
    """Greedy maxmin (farthest point) landmark selection.

    Parameters
    ----------
    points : array_like, shape (N, d)
    n : int
        Number of landmarks, ``1 <= n <= N``.
    seed : int
        Seeds the uniform choice of the first landmark.
    first : int, optional
        Fix the first landmark instead of drawing it.

    Returns
    -------
    list of int
        Landmark indices in selection order.  Ties go to the lowest index.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    N = len(X)
    if not 1 <= n <= N:
        raise ParameterError(f"need 1 <= n <= {N}, got n={n}")
    if first is None:
        first = int(np.random.default_rng(seed).integers(N))
    chosen = [first]
    mind = np.sqrt(((X - X[first]) ** 2).sum(axis=1))
    mind[first] = -np.inf
    for _ in range(n - 1):
        i = int(np.argmax(mind))
        chosen.append(i)
        d = np.sqrt(((X - X[i]) ** 2).sum(axis=1))
        np.minimum(mind, d, out=mind)
        mind[i] = -np.inf
    return chosen


def knn_scores(points, k: int, chunk: int = 1024) -> np.ndarray:
    """Distance from every point to its ``k``-th nearest other point."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    N = len(X)
    if not 1 <= k < N:
        raise ParameterError(f"need 1 <= k < {N}, got k={k}")
    out = np.empty(N)
    for s in range(0, N, chunk):
        blk = X[s:s + chunk]
        d = np.sqrt(((blk[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
        d[np.arange(len(blk)), np.arange(s, s + len(blk))] = np.inf
        out[s:s + chunk] = np.partition(d, k - 1, axis=1)[:, k - 1]
    return out


def knn_density_filter(points, k: int, keep_fraction: float) -> list[int]:
    """Indices of the ``round(keep_fraction * N)`` densest points, ascending.

    Density score is the k-th nearest neighbor distance (smaller is denser);
    ties are broken by index.
    """
    if not 0 < keep_fraction <= 1:
        raise ParameterError(f"keep_fraction must lie in (0, 1], got {keep_fraction}")
    scores = knn_scores(points, k)
    N = len(scores)
    keep = min(max(int(round(keep_fraction * N)), 1), N)
    order = np.argsort(scores, kind="stable")
    return sorted(int(i) for i in order[:keep])

