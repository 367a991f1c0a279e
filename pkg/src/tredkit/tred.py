"""Hierarchical 2^d-tree of robust square counts.

Bins at scale ``m`` are cubes of half-side ``r1_m = R 2^-m`` tiling the base
square ``S_R(origin)``.  Every bin stores the trace segments inside its outer
cube (half-side ``r2_m = r1_m + delta_r``) and the robust count of those
segments.  Only bins whose count exceeds ``tau`` are refined.

Child ``q`` of a bin gets index ``parent * 2^d + q``; bit ``d - 1 - k`` of ``q``
selects the high half along axis ``k``, so axis 0 is the most significant digit
and the low half comes first.
"""
from __future__ import annotations

import bisect
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _backend
from ._store import TrajectoryStore
from .core import Trajectory, menger_curvatures
from .counts import EPS_REL, SegmentSet
from .errors import ContainmentError, DomainError, FormatError, ParameterError
from .oracle import Raster, disk_stamp

__all__ = [
    "CurvatureWarning",
    "TredParams",
    "Bin",
    "TredTree",
    "build_offline",
    "update",
    "rebuild",
    "superlevel_samples",
    "level_set_raster",
    "dump",
    "load",
]

FORMAT_VERSION = "TRED v1"


class CurvatureWarning(UserWarning):
    """The finest outer radius is not below the minimum radius of curvature."""


def default_delta_r(R: float, M: int) -> float:
    """``(sqrt(2) - 1) R 2^-M``: smallest offset giving ``r2_M >= sqrt(2) r1_M``."""
    return (math.sqrt(2.0) - 1.0) * R * 2.0 ** -M


@dataclass(frozen=True)
class TredParams:
    """Tree parameters.

    Parameters
    ----------
    R : float
        Half-side of the base square.
    M : int
        Maximum depth.
    tau : int
        A bin is refined when its count is strictly greater than ``tau``.
    delta_r : float, optional
        ``r2_m - r1_m`` at every scale; defaults to :func:`default_delta_r`.
    d : int
        Dimension, 2 or 3.
    origin : array_like, optional
        Center of the base square; defaults to the origin.
    """

    R: float
    M: int
    tau: int = 0
    delta_r: float | None = None
    d: int = 2
    origin: tuple | None = None

    def __post_init__(self):
        if not (np.isfinite(self.R) and self.R > 0):
            raise ParameterError(f"R must be positive, got {self.R}")
        if int(self.M) != self.M or self.M < 1:
            raise ParameterError(f"M must be a positive integer, got {self.M}")
        if int(self.tau) != self.tau or self.tau < 0:
            raise ParameterError(f"tau must be a nonnegative integer, got {self.tau}")
        if self.d not in (2, 3):
            raise ParameterError(f"d must be 2 or 3, got {self.d}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "R", float(self.R))
        if self.delta_r is None:
            object.__setattr__(self, "delta_r", default_delta_r(self.R, self.M))
        if not (np.isfinite(self.delta_r) and self.delta_r > 0):
            raise ParameterError(f"delta_r must be positive, got {self.delta_r}")
        object.__setattr__(self, "delta_r", float(self.delta_r))
        origin = (0.0,) * self.d if self.origin is None else tuple(float(v) for v in self.origin)
        if len(origin) != self.d:
            raise ParameterError(f"origin has {len(origin)} coordinates, expected {self.d}")
        object.__setattr__(self, "origin", origin)

    @classmethod
    def fit(cls, trajs: Sequence[Trajectory], M: int, tau: int = 0,
            delta_r: float | None = None, margin: float = 0.525) -> "TredParams":
        """Base square centered on the data bounding box with ``R = margin * extent``."""
        trajs = list(trajs)
        if not trajs:
            raise ParameterError("cannot fit a base square to zero trajectories")
        pts = np.concatenate([t.points for t in trajs])
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        extent = float((hi - lo).max())
        R = margin * extent if extent > 0 else 1.0
        return cls(R, M, tau, delta_r, pts.shape[1], tuple(0.5 * (lo + hi)))

    def r1(self, m: int) -> float:
        return self.R * 2.0 ** -m

    def r2(self, m: int) -> float:
        return self.r1(m) + self.delta_r

    @property
    def branching(self) -> int:
        return 1 << self.d

    def child_offsets(self) -> np.ndarray:
        """Signs ``(2^d, d)`` of child center offsets in index order."""
        q = np.arange(self.branching)[:, None]
        bits = (q >> (self.d - 1 - np.arange(self.d))[None, :]) & 1
        return 2.0 * bits - 1.0

    def center(self, m: int, index: int) -> np.ndarray:
        """Center of bin ``(m, index)`` decoded from its path digits."""
        if not 0 <= index < self.branching ** m:
            raise ParameterError(f"index {index} out of range at scale {m}")
        signs = self.child_offsets()
        c = np.array(self.origin, dtype=np.float64)
        for j in range(1, m + 1):
            digit = (index >> (self.d * (m - j))) & (self.branching - 1)
            c = c + signs[digit] * self.r1(j)
        return c

    def check_curvature(self, kappa_max: float) -> bool:
        """Return False (and warn) when ``r2_M >= 1 / kappa_max``."""
        if kappa_max > 0 and self.r2(self.M) >= 1.0 / kappa_max:
            warnings.warn(
                f"r2_M={self.r2(self.M):.4g} >= 1/kappa_max={1.0 / kappa_max:.4g}; "
                "the disk-count sandwich bound is not guaranteed",
                CurvatureWarning, stacklevel=3,
            )
            return False
        return True


@dataclass
class Bin:
    scale: int
    index: int
    center: np.ndarray
    count: int
    segments: SegmentSet
    active: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return self.scale, self.index


@dataclass
class TredTree:
    """Per-scale sparse bin maps plus sorted active index lists.

    ``bins[m]`` maps index to :class:`Bin`; ``active[m]`` is the sorted list
    of active indices at scale ``m``.
    """

    params: TredParams
    store: TrajectoryStore = None
    bins: list = field(default_factory=list)
    active: list = field(default_factory=list)

    def __post_init__(self):
        p = self.params
        if self.store is None:
            self.store = TrajectoryStore(p.d)
        if not self.bins:
            self.bins = [dict() for _ in range(p.M + 1)]
            self.active = [[] for _ in range(p.M + 1)]
            root = Bin(0, 0, np.array(p.origin), 0, SegmentSet.empty(), True)
            self.bins[0][0] = root
            self.active[0].append(0)

    @property
    def trajectories(self) -> list[Trajectory]:
        return self.store.trajectories

    @property
    def root(self) -> Bin:
        return self.bins[0][0]

    def __iter__(self) -> Iterator[Bin]:
        for level in self.bins:
            for k in sorted(level):
                yield level[k]

    def __len__(self) -> int:
        return sum(len(level) for level in self.bins)

    def bin(self, m: int, index: int) -> Bin:
        return self.bins[m][index]

    def counts(self, m: int) -> dict[int, int]:
        return {k: b.count for k, b in sorted(self.bins[m].items())}

    def signature(self):
        """Hashable summary of counts and active sets, for equality checks."""
        return (
            tuple(tuple(sorted((k, b.count) for k, b in level.items())) for level in self.bins),
            tuple(tuple(a) for a in self.active),
        )

    def _activate(self, b: Bin) -> None:
        b.active = True
        bisect.insort(self.active[b.scale], b.index)


def _check_inside(params: TredParams, traj: Trajectory) -> None:
    if traj.dim != params.d:
        raise DomainError(f"trajectory {traj.id!r} has dimension {traj.dim}, tree has {params.d}")
    dev = np.abs(traj.points - np.asarray(params.origin)).max()
    if dev > params.R:
        raise ContainmentError(
            f"trajectory {traj.id!r} leaves the base square (max offset {dev:.6g} > R={params.R:.6g})",
            trajectory_id=traj.id,
        )


def _warn_curvature(params: TredParams, trajs: Iterable[Trajectory]) -> None:
    kappa = 0.0
    for t in trajs:
        if len(t) >= 3:
            kappa = max(kappa, float(menger_curvatures(t.points).max()))
    params.check_curvature(kappa)


def _refine(tree: TredTree, m: int, parent: Bin, src: SegmentSet):
    """Child centers and ``refine`` kernel output for one parent at scale ``m``."""
    p = tree.params
    r1, r2 = p.r1(m), p.r2(m)
    centers = np.ascontiguousarray(parent.center + p.child_offsets() * r1)
    V, cum, off, nv = tree.store.arrays()
    out = _backend.kernels.refine(
        V, cum, off, nv, src.tid, src.a, src.b, centers, r1, r2, EPS_REL * r1, EPS_REL * r2
    )
    return centers, out


def build_offline(trajs: Sequence[Trajectory], params: TredParams,
                  check_curvature: bool = True) -> TredTree:
    """Build the tree level by level from all trajectories at once.

    Raises
    ------
    ContainmentError
        A trajectory leaves the base square; the message names it.
    DomainError
        Dimension mismatch.
    """
    trajs = list(trajs)
    for t in trajs:
        _check_inside(params, t)
    if check_curvature:
        _warn_curvature(params, trajs)
    tree = TredTree(params)
    tree.store.extend(trajs)
    root = tree.root
    root.count = len(trajs)
    root.segments = SegmentSet(*tree.store.full_intervals())
    B = params.branching
    for m in range(1, params.M + 1):
        level = tree.bins[m]
        for k in tree.active[m - 1]:
            parent = tree.bins[m - 1][k]
            centers, out = _refine(tree, m, parent, parent.segments)
            for q, (tid, a, b, c) in enumerate(out):
                idx = k * B + q
                child = Bin(m, idx, centers[q], int(c), SegmentSet(tid, a, b))
                level[idx] = child
                if child.count > params.tau:
                    child.active = True
        tree.active[m] = sorted(i for i, b in level.items() if b.active)
    return tree


def _concat(s: SegmentSet, tid, a, b) -> SegmentSet:
    if len(tid) == 0:
        return s
    return SegmentSet(np.concatenate([s.tid, tid]), np.concatenate([s.a, a]), np.concatenate([s.b, b]))


def update(tree: TredTree, traj: Trajectory, check_curvature: bool = False) -> TredTree:
    """Insert one trajectory, modifying ``tree`` in place (also returned).

    Only the new trajectory's segments are propagated, except below a bin that
    becomes active during this call: there the bin's full segment set is the
    source, so its new children see every stored trajectory.
    """
    p = tree.params
    _check_inside(p, traj)
    if check_curvature:
        _warn_curvature(p, [traj])
    k_new = tree.store.add(traj)
    tid, a, b = tree.store.full_intervals([k_new])
    root = tree.root
    root.count += 1
    root.segments = _concat(root.segments, tid, a, b)
    sources = {0: SegmentSet(tid, a, b)}
    B = p.branching
    for m in range(1, p.M + 1):
        nxt = {}
        level = tree.bins[m]
        for k in list(tree.active[m - 1]):
            src = sources.get(k)
            if src is None or len(src) == 0:
                continue
            parent = tree.bins[m - 1][k]
            centers, out = _refine(tree, m, parent, src)
            for q, (ctid, ca, cb, c) in enumerate(out):
                idx = k * B + q
                child = level.get(idx)
                if child is None:
                    child = level[idx] = Bin(m, idx, centers[q], 0, SegmentSet.empty())
                child.segments = _concat(child.segments, ctid, ca, cb)
                child.count += int(c)
                if not child.active and child.count > p.tau:
                    tree._activate(child)
                    nxt[idx] = child.segments
                elif len(ctid):
                    nxt[idx] = SegmentSet(ctid, ca, cb)
        sources = nxt
    return tree


def rebuild(tree: TredTree) -> TredTree:
    """Fresh offline build over every stored trajectory."""
    return build_offline(tree.trajectories, tree.params, check_curvature=False)


def superlevel_samples(tree: TredTree, tau_sample: int) -> np.ndarray:
    """Centers of finest-scale bins with count > ``tau_sample``, in index order."""
    level = tree.bins[tree.params.M]
    pts = [level[k].center for k in sorted(level) if level[k].count > tau_sample]
    if not pts:
        return np.empty((0, tree.params.d))
    return np.array(pts)


def level_set_raster(tree: TredTree, tau: int, resolution: int) -> Raster:
    """Binary raster over the base square: disks of radius ``r2_M`` about
    every finest-scale bin center with count > ``tau``."""
    p = tree.params
    if p.d != 2:
        raise DomainError("level-set rasters are 2-D")
    if int(resolution) < 2:
        raise ParameterError(f"resolution must be >= 2, got {resolution}")
    grid = Raster.covering(p.origin, p.R, int(resolution), dtype=np.uint8)
    return disk_stamp(grid, superlevel_samples(tree, tau), p.r2(p.M))


def dump(tree: TredTree, fh, segments: bool = True) -> None:
    """Write ``tree`` in the ``TRED v1`` text format to an open text file.

    Layout: header, ``origin`` line, ``trajectories K`` followed by per
    trajectory ``traj k n id`` and ``n`` lines of ``t x y [z]``, then
    ``bins B`` followed by ``bin m index c... count active nseg`` records each
    followed by ``nseg`` lines of ``tid a b``.  Floats use ``repr`` so a
    load round-trips exactly.
    """
    p = tree.params
    w = fh.write
    w(f"{FORMAT_VERSION} d={p.d} R={p.R!r} M={p.M} tau={p.tau} delta_r={p.delta_r!r}\n")
    w("origin " + " ".join(repr(float(v)) for v in p.origin) + "\n")
    w(f"trajectories {len(tree.trajectories)}\n")
    for k, t in enumerate(tree.trajectories):
        w(f"traj {k} {len(t)} {json.dumps(t.id)}\n")
        rows = np.column_stack([t.times, t.points]).tolist()
        w("".join(" ".join(map(repr, r)) + "\n" for r in rows))
    w(f"bins {len(tree)}\n")
    for b in tree:
        nseg = len(b.segments) if segments else 0
        c = " ".join(repr(float(v)) for v in b.center)
        w(f"bin {b.scale} {b.index} {c} {b.count} {int(b.active)} {nseg}\n")
        if nseg:
            s = b.segments
            w("".join(f"{int(i)} {x!r} {y!r}\n" for i, x, y in zip(s.tid, s.a.tolist(), s.b.tolist())))


def load(fh, name: str = "<tree>") -> TredTree:
    """Read a tree written by :func:`dump`.

    Dumps written without segments load with empty segment sets; such trees
    can be queried but further updates need :func:`rebuild` first.
    """
    lines = iter(enumerate(fh, 1))

    def nxt():
        try:
            return next(lines)
        except StopIteration:
            raise FormatError(f"{name}: unexpected end of file")

    lineno, head = nxt()
    if not head.startswith(FORMAT_VERSION + " "):
        raise FormatError(f"{name}:{lineno}: expected '{FORMAT_VERSION}' header")
    try:
        kv = dict(f.split("=", 1) for f in head.split()[2:])
        d, M, tau = int(kv["d"]), int(kv["M"]), int(kv["tau"])
        R, delta_r = float(kv["R"]), float(kv["delta_r"])
        lineno, line = nxt()
        f = line.split()
        if f[0] != "origin":
            raise ValueError("origin")
        params = TredParams(R, M, tau, delta_r, d, tuple(float(v) for v in f[1:]))
        lineno, line = nxt()
        ntraj = int(line.split()[1])
        tree = TredTree(params)
        for _ in range(ntraj):
            lineno, line = nxt()
            f = line.split(None, 3)
            if f[0] != "traj":
                raise ValueError("traj")
            n = int(f[2])
            tid = json.loads(f[3])
            rows = np.array([nxt()[1].split() for _ in range(n)], dtype=np.float64)
            tree.store.add(Trajectory(rows[:, 0], rows[:, 1:], tid))
        lineno, line = nxt()
        nbins = int(line.split()[1])
        tree.bins = [dict() for _ in range(M + 1)]
        tree.active = [[] for _ in range(M + 1)]
        for _ in range(nbins):
            lineno, line = nxt()
            f = line.split()
            if f[0] != "bin" or len(f) != 6 + d:
                raise ValueError("bin")
            m, idx = int(f[1]), int(f[2])
            center = np.array([float(v) for v in f[3:3 + d]])
            count, active, nseg = int(f[3 + d]), f[4 + d] == "1", int(f[5 + d])
            segs = [nxt()[1].split() for _ in range(nseg)]
            if segs:
                arr = np.array(segs, dtype=np.float64)
                seg = SegmentSet(arr[:, 0].astype(np.int64), arr[:, 1].copy(), arr[:, 2].copy())
            else:
                seg = SegmentSet.empty()
            tree.bins[m][idx] = Bin(m, idx, center, count, seg, active)
            if active:
                tree.active[m].append(idx)
    except FormatError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise FormatError(f"{name}:{lineno}: malformed record ({exc})") from None
    for a in tree.active:
        a.sort()
    if 0 not in tree.bins[0]:
        raise FormatError(f"{name}: missing root bin")
    return tree
