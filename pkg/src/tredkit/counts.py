"""Maximal-interval extraction and local trajectory counts.

Three counts are provided at a center ``x``:

* :func:`disk_count` -- maximal intervals inside the closed Euclidean ball;
* :func:`square_count` -- the same for the closed max-norm cube (unstable);
* :func:`robust_square_count` -- inner-cube intervals identified when a
  single outer-cube interval contains them.

All intervals are computed exactly on the polyline: ball entry/exit by a
quadratic solve per edge, cube entry/exit by per-axis clipping.  Intervals
separated by less than ``eps_len = 1e-9 * radius`` of arc length are merged,
and shorter intervals touching the region only at interior parameters are
dropped as grazing contacts.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from ._store import TrajectoryStore
from .core import ParamInterval, Trajectory, estimate_curvature_max, menger_curvatures
from .errors import DomainError, ParameterError

__all__ = [
    "EPS_REL",
    "Region",
    "SegmentSet",
    "ball",
    "cube",
    "maximal_intervals",
    "disk_count",
    "square_count",
    "robust_square_count",
    "clip_segments",
    "perturb",
    "perturb_fig3",
    "instability_demo",
]

EPS_REL = 1e-9


@dataclass(frozen=True)
class Region:
    """Closed ball (``norm="euclidean"``) or cube (``norm="max"``) about ``center``."""

    center: np.ndarray
    radius: float
    norm: str = "euclidean"

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise DomainError(f"radius must be positive, got {self.radius}")
        if self.norm not in ("euclidean", "max"):
            raise DomainError(f"norm must be 'euclidean' or 'max', got {self.norm!r}")

    @property
    def is_ball(self) -> bool:
        return self.norm == "euclidean"

    @property
    def eps_len(self) -> float:
        return EPS_REL * self.radius

    def contains(self, points) -> np.ndarray:
        diff = np.atleast_2d(points) - self.center
        if self.is_ball:
            return np.einsum("ij,ij->i", diff, diff) <= self.radius**2
        return np.abs(diff).max(axis=1) <= self.radius


def ball(center, radius) -> Region:
    return Region(center, radius, "euclidean")


def cube(center, radius) -> Region:
    return Region(center, radius, "max")


@dataclass
class SegmentSet:
    """Parameter intervals of several trajectories, in vertex-parameter units.

    ``tid[i]`` indexes the trajectory list the set was computed from;
    ``a[i] <= b[i]`` lie in ``[0, n_vertices - 1]``.  Within one trajectory the
    intervals are sorted and pairwise disjoint.
    """

    tid: np.ndarray
    a: np.ndarray
    b: np.ndarray

    @classmethod
    def empty(cls) -> "SegmentSet":
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0))

    @classmethod
    def whole(cls, trajs: Sequence[Trajectory]) -> "SegmentSet":
        nv = np.array([len(t) for t in trajs], dtype=np.int64)
        return cls(np.arange(len(trajs), dtype=np.int64), np.zeros(len(trajs)), (nv - 1.0))

    def __len__(self) -> int:
        return len(self.tid)

    def entries(self, trajs: Sequence[Trajectory]) -> list[tuple[object, ParamInterval]]:
        """``(trajectory id, ParamInterval in time units)`` pairs."""
        out = []
        for k, a, b in zip(self.tid, self.a, self.b):
            t = trajs[int(k)]
            out.append((t.id, ParamInterval(float(t.time_at(a)), float(t.time_at(b)))))
        return out

    def arc_length(self, trajs: Sequence[Trajectory]) -> float:
        """Total trace length covered by the intervals."""
        total = 0.0
        for k, a, b in zip(self.tid, self.a, self.b):
            t = trajs[int(k)]
            u = np.arange(len(t), dtype=np.float64)
            total += np.interp(b, u, t.arclength) - np.interp(a, u, t.arclength)
        return float(total)


def _as_list(trajs) -> list[Trajectory]:
    if isinstance(trajs, Trajectory):
        return [trajs]
    return list(trajs)


def _store(trajs: Sequence[Trajectory], dim: int) -> TrajectoryStore:
    store = TrajectoryStore(dim)
    for t in trajs:
        if t.dim != dim:
            raise DomainError(f"trajectory dimension {t.dim} does not match region dimension {dim}")
        store.add(t)
    return store


def _clip(store: TrajectoryStore, seg: SegmentSet, region: Region):
    V, cum, off, nv = store.arrays()
    return _backend.kernels.clip(
        V, cum, off, nv, seg.tid, seg.a, seg.b, region.center,
        float(region.radius), region.is_ball, region.eps_len,
    )


def _intervals(trajs: Sequence[Trajectory], region: Region) -> tuple[SegmentSet, TrajectoryStore]:
    store = _store(trajs, len(region.center))
    tid, a, b, _ = _clip(store, SegmentSet.whole(trajs), region)
    return SegmentSet(tid, a, b), store


def maximal_intervals(traj: Trajectory, region: Region) -> list[ParamInterval]:
    """Maximal time intervals whose trace lies in the closed ``region``.

    Raises
    ------
    DomainError
        If the region and trajectory dimensions differ.
    """
    if len(region.center) != traj.dim:
        raise DomainError(
            f"region dimension {len(region.center)} != trajectory dimension {traj.dim}"
        )
    seg, _ = _intervals([traj], region)
    return [iv for _, iv in seg.entries([traj])]


def _count(trajs, region: Region) -> int:
    trajs = _as_list(trajs)
    if not trajs:
        return 0
    store = _store(trajs, len(region.center))
    V, cum, off, nv = store.arrays()
    tid, a, b = store.full_intervals()
    return _backend.kernels.count_region(
        V, cum, off, nv, tid, a, b, region.center, float(region.radius),
        region.is_ball, region.eps_len,
    )


def disk_count(trajs, x, r: float) -> int:
    """Number of maximal intervals inside the closed ball ``B_r(x)``."""
    return _count(trajs, ball(x, r))


def square_count(trajs, x, r: float) -> int:
    """Number of maximal intervals inside the closed cube ``S_r(x)``."""
    return _count(trajs, cube(x, r))


def robust_square_count(trajs, x, r1: float, r2: float) -> int:
    """Count of inner-cube intervals up to identification by outer-cube intervals.

    Both interval families are computed from scratch; each inner interval is
    located in the sorted outer intervals of its trajectory by binary search
    of its midpoint, and the number of distinct outer intervals hit is returned.
    """
    if not (0 < r1 < r2):
        raise ParameterError(f"need 0 < r1 < r2, got r1={r1}, r2={r2}")
    trajs = _as_list(trajs)
    if not trajs:
        return 0
    inner, _ = _intervals(trajs, cube(x, r1))
    outer, _ = _intervals(trajs, cube(x, r2))
    if len(inner) == 0:
        return 0
    # Outer intervals are sorted by (tid, a); key them on a global axis.
    span = np.array([len(t) for t in trajs], dtype=np.float64)
    base = np.concatenate([[0.0], np.cumsum(span)])
    outer_start = base[outer.tid] + outer.a
    outer_end = base[outer.tid] + outer.b
    mid = base[inner.tid] + 0.5 * (inner.a + inner.b)
    slot = np.searchsorted(outer_start, mid, side="right") - 1
    hit = (slot >= 0) & (mid <= outer_end[np.maximum(slot, 0)])
    if not np.all(hit):
        raise RuntimeError("inner interval not contained in an outer interval")
    return int(len(np.unique(slot)))


def clip_segments(segments: SegmentSet, trajs: Sequence[Trajectory], region: Region) -> SegmentSet:
    """Maximal sub-intervals of ``segments`` whose trace lies in ``region``."""
    trajs = _as_list(trajs)
    if len(segments) == 0:
        return SegmentSet.empty()
    store = _store(trajs, len(region.center))
    tid, a, b, _ = _clip(store, segments, region)
    return SegmentSet(tid, a, b)


def _normals(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    tangent = np.gradient(points, axis=0)
    norm = np.linalg.norm(tangent, axis=1, keepdims=True)
    tangent = tangent / np.where(norm > 0, norm, 1.0)
    if points.shape[1] == 2:
        return np.column_stack([-tangent[:, 1], tangent[:, 0]])
    ref = rng.normal(size=3)
    n = ref - (tangent @ ref)[:, None] * tangent
    nn = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.where(nn > 0, nn, 1.0)


def perturb(traj: Trajectory, eps: float, kappa_max: float, seed: int,
            max_halvings: int = 60) -> Trajectory:
    """Small eps-perturbation of ``traj`` preserving a curvature bound.

    Each vertex moves along the local normal by a sum of three random-phase
    sinusoids in arc length, scaled so the largest displacement is ``eps``.
    If the Menger curvature of the result exceeds ``kappa_max`` the amplitude
    is halved until it does not.

    Raises
    ------
    ParameterError
        If ``eps >= 1 / kappa_max`` or ``traj`` itself exceeds ``kappa_max``.
    """
    if eps < 0:
        raise ParameterError("eps must be non-negative")
    if kappa_max > 0 and eps >= 1.0 / kappa_max:
        raise ParameterError(f"eps={eps} is not small: need eps < 1/kappa_max={1.0 / kappa_max}")
    if eps == 0:
        return Trajectory(traj.times, traj.points, traj.id)
    if len(traj) >= 3 and estimate_curvature_max(traj).kappa_max > kappa_max:
        raise ParameterError("input trajectory already exceeds kappa_max")
    rng = np.random.default_rng(seed)
    s = traj.arclength
    L = max(traj.length, np.finfo(float).tiny)
    cycles = rng.uniform(0.5, 3.0, size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    g = np.sin(np.outer(s, 2 * np.pi * cycles / L) + phases).sum(axis=1)
    peak = np.abs(g).max()
    if peak == 0:
        return Trajectory(traj.times, traj.points, traj.id)
    offset = _normals(traj.points, rng) * (g / peak)[:, None]
    amp = eps
    for _ in range(max_halvings):
        pts = traj.points + amp * offset
        if len(pts) < 3 or menger_curvatures(pts).max() <= kappa_max:
            return Trajectory(traj.times, pts, traj.id)
        amp *= 0.5
    return Trajectory(traj.times, traj.points, traj.id)


def perturb_fig3(r: float, n_arcs: int, kappa_max: float, pts_per_arc: int = 32,
                 center=(0.0, 0.0)) -> Trajectory:
    """Adversarial path along the bottom side of ``S_r(center)``.

    The side is replaced by ``2 n_arcs + 1`` tangent-continuous circular arcs of
    radius ``1 / kappa_max``: ``n_arcs + 1`` bulge into the square and
    ``n_arcs`` dip outside it, each meeting the side line at its ends.  The
    square count at ``center`` is therefore ``n_arcs + 1`` while the
    displacement from the straight side never exceeds the arc sagitta.

    Raises
    ------
    ParameterError
        If the arcs cannot span their chords (chord > 2 / kappa_max).
    """
    if r <= 0 or n_arcs < 1 or kappa_max <= 0:
        raise ParameterError("need r > 0, n_arcs >= 1 and kappa_max > 0")
    rho = 1.0 / kappa_max
    n_total = 2 * n_arcs + 1
    chord = 2.0 * r / n_total
    if chord > 2.0 * rho:
        raise ParameterError(
            f"chord {chord} exceeds arc diameter {2 * rho}; increase n_arcs or decrease kappa_max"
        )
    alpha = np.arcsin(chord / (2.0 * rho))
    cx, cy = float(center[0]), float(center[1])
    base_y = cy - r
    pts = [(cx - r, base_y)]
    for i in range(n_total):
        x0 = cx - r + i * chord
        xm = x0 + 0.5 * chord
        inward = i % 2 == 0
        if inward:
            yc = base_y - rho * np.cos(alpha)
            phi = np.linspace(np.pi / 2 + alpha, np.pi / 2 - alpha, pts_per_arc + 1)
        else:
            yc = base_y + rho * np.cos(alpha)
            phi = np.linspace(-np.pi / 2 - alpha, -np.pi / 2 + alpha, pts_per_arc + 1)
        arc = np.column_stack([xm + rho * np.cos(phi), yc + rho * np.sin(phi)])
        arc[-1] = (x0 + chord if i < n_total - 1 else cx + r, base_y)
        pts.extend(map(tuple, arc[1:]))
    return Trajectory.from_points(np.array(pts), id=f"adversarial-n{n_arcs}")


def adversarial_sagitta(r: float, n_arcs: int, kappa_max: float) -> float:
    """Largest distance of the :func:`perturb_fig3` path from the straight side."""
    rho = 1.0 / kappa_max
    alpha = np.arcsin((2.0 * r / (2 * n_arcs + 1)) / (2.0 * rho))
    return rho * (1.0 - np.cos(alpha))


def instability_demo(r: float = 1.0, r2: float = 1.5, kappa_max: float = 0.5,
                     n_arcs: Iterable[int] = (1, 2, 4, 8, 16)) -> list[dict]:
    """Square vs robust square count on the adversarial family.

    Returns one row per ``n_arcs`` with the square count on ``S_r`` and the
    robust count with outer half-side ``r2``.  The first grows without
    bound; the second does not move.
    """
    rows = []
    origin = np.zeros(2)
    for n in n_arcs:
        t = perturb_fig3(r, n, kappa_max)
        rows.append({
            "n_arcs": n,
            "sagitta": adversarial_sagitta(r, n, kappa_max),
            "square_count": square_count([t], origin, r),
            "robust_square_count": robust_square_count([t], origin, r, r2),
            "disk_count_r2": disk_count([t], origin, r2),
        })
    return rows
