"""Trajectory representation, interpolation, curvature and delay embedding.

A trajectory is a polyline realization of a continuous curve: samples are
joined by straight edges and every count in the package is computed exactly
on that polyline.

Internally intervals are expressed in *vertex parameter* ``u`` in
``[0, n - 1]`` (edge ``i`` covers ``[i, i + 1]``); :meth:`Trajectory.time_at`
and :meth:`Trajectory.param_at` convert to and from timestamps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError

__all__ = [
    "Trajectory",
    "ParamInterval",
    "CurvatureBound",
    "interpolate",
    "estimate_curvature_max",
    "menger_curvatures",
    "time_delay_embed",
]


class ParamInterval(NamedTuple):
    """Closed parameter interval ``[a, b]`` of a trajectory (time units)."""

    a: float
    b: float


@dataclass(frozen=True)
class CurvatureBound:
    kappa_max: float

    def __post_init__(self):
        if not np.isfinite(self.kappa_max) or self.kappa_max < 0:
            raise DomainError(f"kappa_max must be finite and >= 0, got {self.kappa_max}")

    @property
    def radius(self) -> float:
        """Minimum radius of curvature, ``inf`` for straight curves."""
        return np.inf if self.kappa_max == 0 else 1.0 / self.kappa_max


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-parameterized polyline in 2 or 3 dimensions.

    Parameters
    ----------
    times : array_like, shape (n,)
        Strictly increasing timestamps.
    points : array_like, shape (n, d)
        Sample positions.
    id : hashable, optional
        Opaque identifier carried through I/O.
    """

    times: np.ndarray
    points: np.ndarray
    id: Any = field(default=None)

    def __post_init__(self):
        times = np.array(self.times, dtype=np.float64).reshape(-1)
        points = np.array(self.points, dtype=np.float64)
        if points.ndim != 2:
            raise DomainError("points must be a 2-D array of shape (n, d)")
        if len(times) != len(points):
            raise DomainError(
                f"times and points differ in length ({len(times)} != {len(points)})"
            )
        if len(times) < 2:
            raise InsufficientDataError("a trajectory needs at least 2 samples")
        if points.shape[1] not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {points.shape[1]}")
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(times))):
            raise DomainError("trajectory contains non-finite values")
        if np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        times.flags.writeable = False
        points = np.ascontiguousarray(points)
        points.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_points(cls, points, id=None, dt: float = 1.0) -> "Trajectory":
        """Build a trajectory with uniform timestamps ``0, dt, 2 dt, ...``."""
        points = np.asarray(points, dtype=np.float64)
        return cls(np.arange(len(points)) * dt, points, id)

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.points, other.points)
        )

    __hash__ = object.__hash__

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def duration(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.points, axis=0), axis=1)

    @cached_property
    def arclength(self) -> np.ndarray:
        """Cumulative arc length at each vertex, starting at 0."""
        cum = np.empty(len(self), dtype=np.float64)
        cum[0] = 0.0
        np.cumsum(self.edge_lengths, out=cum[1:])
        return cum

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def time_at(self, u):
        """Map vertex parameter ``u`` to time (linear within each edge)."""
        return np.interp(u, np.arange(len(self), dtype=np.float64), self.times)

    def param_at(self, t):
        """Inverse of :meth:`time_at`."""
        return np.interp(t, self.times, np.arange(len(self), dtype=np.float64))

    def point_at_param(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        i = np.clip(np.floor(u).astype(np.int64), 0, len(self) - 2)
        s = (u - i)[..., None]
        return self.points[i] * (1.0 - s) + self.points[i + 1] * s

    def with_points(self, points) -> "Trajectory":
        return Trajectory(self.times, points, self.id)


def interpolate(traj: Trajectory, t: float) -> np.ndarray:
    """Position of ``traj`` at time ``t`` by linear interpolation.

    Raises
    ------
    DomainError
        If ``t`` lies outside ``[times[0], times[-1]]``.
    """
    t0, t1 = traj.duration
    if not (t0 <= t <= t1):
        raise DomainError(f"t={t} outside trajectory domain [{t0}, {t1}]")
    i = int(np.searchsorted(traj.times, t, side="right")) - 1
    if i >= len(traj) - 1:
        return traj.points[-1].copy()
    ta, tb = traj.times[i], traj.times[i + 1]
    if t == ta:
        return traj.points[i].copy()
    s = (t - ta) / (tb - ta)
    return traj.points[i] + s * (traj.points[i + 1] - traj.points[i])


def menger_curvatures(points) -> np.ndarray:
    """Menger curvature ``4 * area / (a b c)`` of every consecutive triple.

    Collinear triples and triples with a repeated point give 0.
    """
    p = np.asarray(points, dtype=np.float64)
    if len(p) < 3:
        raise InsufficientDataError("curvature needs at least 3 points")
    u = p[1:-1] - p[:-2]
    v = p[2:] - p[1:-1]
    w = p[2:] - p[:-2]
    lu, lv, lw = (np.linalg.norm(x, axis=1) for x in (u, v, w))
    # Cross the two shorter sides, taken from the vertex opposite the longest;
    # crossing a long side with a short one cancels badly on thin triangles.
    a = np.where((lw >= lu) & (lw >= lv), 0, np.where(lv >= lu, 1, 2))[:, None]
    e1 = np.where(a == 0, u, np.where(a == 1, u, w))
    e2 = np.where(a == 0, v, np.where(a == 1, w, v))
    if p.shape[1] == 2:
        twice_area = np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    else:
        twice_area = np.linalg.norm(np.cross(e1, e2), axis=1)
    denom = lu * lv * lw
    out = np.zeros(len(u))
    ok = denom > 0
    out[ok] = 2.0 * twice_area[ok] / denom[ok]
    return out


def estimate_curvature_max(traj: Trajectory) -> CurvatureBound:
    """Largest Menger curvature over consecutive vertex triples.

    The estimate is exact for samples taken on a circular arc, which is the
    case the curvature-bounded constructions in this package rely on.
    """
    points = traj.points if isinstance(traj, Trajectory) else np.asarray(traj)
    if len(points) < 3:
        raise InsufficientDataError("curvature needs at least 3 points")
    return CurvatureBound(float(menger_curvatures(points).max()))


def time_delay_embed(series: Sequence[float], delay: int, dim: int) -> Trajectory:
    """Delay-coordinate embedding of a scalar series.

    Row ``i`` of the result is ``(s[i], s[i + delay], ..., s[i + (dim - 1) * delay])``
    and timestamps are the row indices.
    """
    s = np.asarray(series, dtype=np.float64).reshape(-1)
    if delay < 1 or dim < 1:
        raise DomainError("delay and dim must be positive integers")
    rows = len(s) - (dim - 1) * delay
    if rows < 1:
        raise InsufficientDataError(
            f"series of length {len(s)} too short for dim={dim}, delay={delay}"
        )
    idx = np.arange(rows)[:, None] + np.arange(dim)[None, :] * delay
    emb = s[idx]
    if rows < 2:
        raise InsufficientDataError("embedding has fewer than 2 points")
    if dim not in (2, 3):
        # Trajectory only models 2-D and 3-D curves.
        raise DomainError(f"embedding dimension must be 2 or 3, got {dim}")
    return Trajectory(np.arange(rows, dtype=np.float64), emb)
