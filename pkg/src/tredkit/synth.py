"""Seeded synthetic data: closed shapes with normal-direction noise, and
noisy vehicle traces on a street grid.

All randomness goes through ``numpy.random.default_rng`` (PCG64) seeded from
``numpy.random.SeedSequence``; independent streams are obtained by spawning.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Trajectory
from .errors import ParameterError, FormatError

__all__ = [
    "SHAPES",
    "ShapeSpec",
    "NoiseSpec",
    "shape_points",
    "reference_trajectory",
    "noisy_sample",
    "grid_map_traces",
    "grid_route_nodes",
    "write_csv",
    "read_csv",
]

SHAPES = ("circle", "ellipse", "lemniscate", "cassini")

_DEFAULTS = {
    "circle": {"radius": 1.0},
    "ellipse": {"a": 1.0, "b": 0.5},
    "lemniscate": {"width": 1.0},
    "cassini": {"focus": 0.92, "b": 1.0, "x_range": 1.0},
}


@dataclass(frozen=True)
class ShapeSpec:
    """Closed planar curve.

    Parameters per kind: ``circle`` radius; ``ellipse`` semi-axes ``a``, ``b``;
    ``lemniscate`` half-width ``width``; ``cassini`` focal offset ``focus``
    (foci at ``(+-focus, 0)``), distance product ``b**2`` and ``x_range`` to
    which the curve is uniformly rescaled along x.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ParameterError(f"unknown shape {self.kind!r}; choose from {SHAPES}")
        merged = dict(_DEFAULTS[self.kind])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ParameterError(f"unknown {self.kind} parameters {sorted(unknown)}")
        merged.update(self.params)
        for k, v in merged.items():
            if not (np.isfinite(v) and v > 0):
                raise ParameterError(f"{self.kind} parameter {k} must be positive, got {v}")
        if self.kind == "cassini":
            c, b = merged["focus"], merged["b"]
            if b <= c:
                raise ParameterError("cassini needs b > focus for a single connected oval")
        object.__setattr__(self, "params", merged)


@dataclass(frozen=True)
class NoiseSpec:
    """Harmonic plus impulse noise applied along the curve normal."""

    harmonic_amp_range: tuple = (0.02, 0.07)
    pulse_count_range: tuple = (10, 80)
    pulse_mag_range: tuple = (0.1, 0.5)
    seed: int = 0
    freq_range: tuple = (2.0, 9.0)
    pulse_width: float = 1.0 / 200.0

    def __post_init__(self):
        for name in ("harmonic_amp_range", "pulse_count_range", "pulse_mag_range", "freq_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ParameterError(f"{name} must satisfy 0 <= low <= high, got {(lo, hi)}")
        if not self.pulse_width > 0:
            raise ParameterError("pulse_width must be positive")

    @classmethod
    def for_shape(cls, kind: str, seed: int = 0) -> "NoiseSpec":
        amp = (0.05, 0.1) if kind == "cassini" else (0.02, 0.07)
        return cls(harmonic_amp_range=amp, seed=seed)

    @classmethod
    def zero(cls, seed: int = 0) -> "NoiseSpec":
        return cls((0.0, 0.0), (0, 0), (0.0, 0.0), seed)


def shape_points(shape: ShapeSpec, theta) -> np.ndarray:
    """Points of the curve at angle parameter ``theta`` (radians)."""
    th = np.asarray(theta, dtype=np.float64)
    p = shape.params
    if shape.kind == "circle":
        x, y = p["radius"] * np.cos(th), p["radius"] * np.sin(th)
    elif shape.kind == "ellipse":
        x, y = p["a"] * np.cos(th), p["b"] * np.sin(th)
    elif shape.kind == "lemniscate":
        s = 1.0 + np.sin(th) ** 2
        x = p["width"] * np.cos(th) / s
        y = p["width"] * np.sin(th) * np.cos(th) / s
    else:
        c, b = p["focus"], p["b"]
        c2 = np.cos(2.0 * th)
        r = np.sqrt(c * c * c2 + np.sqrt(c**4 * c2 * c2 + b**4 - c**4))
        xmax = np.sqrt(c * c + b * b)
        scale = p["x_range"] / xmax
        x, y = scale * r * np.cos(th), scale * r * np.sin(th)
    return np.column_stack([x, y])


def _check_sampling(cycles, pts_per_cycle):
    if int(cycles) != cycles or cycles < 1:
        raise ParameterError(f"cycles must be a positive integer, got {cycles}")
    if int(pts_per_cycle) != pts_per_cycle or pts_per_cycle < 16:
        raise ParameterError(f"pts_per_cycle must be an integer >= 16, got {pts_per_cycle}")


def reference_trajectory(shape: ShapeSpec, cycles: int = 100, pts_per_cycle: int = 500) -> Trajectory:
    """Noise-free curve traversed ``cycles`` times, uniform in angle.

    Timestamps count cycles: sample ``k`` is at ``t = k / pts_per_cycle``.
    """
    _check_sampling(cycles, pts_per_cycle)
    one = shape_points(shape, 2.0 * np.pi * np.arange(pts_per_cycle) / pts_per_cycle)
    pts = np.tile(one, (int(cycles), 1))
    n = len(pts)
    return Trajectory(np.arange(n) / pts_per_cycle, pts, id=f"{shape.kind}-reference")


def _unit_normals(one_cycle: np.ndarray) -> np.ndarray:
    # Periodic central differences, rotated by +90 degrees.
    tang = np.roll(one_cycle, -1, axis=0) - np.roll(one_cycle, 1, axis=0)
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    return np.column_stack([-tang[:, 1], tang[:, 0]])


def _pulse_field(s, rng, noise: NoiseSpec, cycles):
    lo, hi = noise.pulse_count_range
    count = int(rng.integers(lo, hi + 1))
    centers = rng.uniform(0.0, cycles, count)
    mags = rng.uniform(*noise.pulse_mag_range, count) * rng.choice([-1.0, 1.0], count)
    out = np.zeros_like(s)
    half = 0.5 * noise.pulse_width
    for c, mag in zip(centers, mags):
        i0, i1 = np.searchsorted(s, [c - half, c + half])
        if i0 == i1:
            continue
        bump = mag * 0.5 * (1.0 + np.cos(np.pi * (s[i0:i1] - c) / half))
        seg = out[i0:i1]
        out[i0:i1] = np.where(np.abs(bump) > np.abs(seg), bump, seg)
    return out


def noisy_sample(shape: ShapeSpec, noise: NoiseSpec, cycles: int = 100,
                 pts_per_cycle: int = 500) -> Trajectory:
    """Reference curve displaced along its unit normal by harmonic and impulse noise.

    The harmonic term is ``A sin(2 pi f s + phi)`` with ``s`` in cycles and
    ``A``, ``f``, ``phi`` drawn uniformly.  Pulses are raised-cosine bumps of
    width ``noise.pulse_width`` cycles and signed peak magnitude; where pulses
    overlap the one of larger magnitude wins, so the total displacement never
    exceeds ``harmonic_high + pulse_mag_high``.
    """
    ref = reference_trajectory(shape, cycles, pts_per_cycle)
    rng = np.random.default_rng(np.random.SeedSequence(noise.seed))
    s = ref.times
    A = rng.uniform(*noise.harmonic_amp_range)
    f = rng.uniform(*noise.freq_range)
    phi = rng.uniform(0.0, 2.0 * np.pi)
    disp = A * np.sin(2.0 * np.pi * f * s + phi) + _pulse_field(s, rng, noise, cycles)
    normals = np.tile(_unit_normals(ref.points[:pts_per_cycle]), (int(cycles), 1))
    pts = ref.points + disp[:, None] * normals
    return Trajectory(ref.times, pts, id=f"{shape.kind}-{noise.seed}")


def grid_route_nodes(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random shortest (monotone staircase) route between two distinct grid nodes.

    Returns ``(k, 2)`` integer ``(col, row)`` node coordinates.
    """
    while True:
        a = np.array([rng.integers(cols), rng.integers(rows)])
        b = np.array([rng.integers(cols), rng.integers(rows)])
        if np.any(a != b):
            break
    delta = b - a
    steps = np.concatenate([
        np.tile([np.sign(delta[0]), 0], (abs(delta[0]), 1)),
        np.tile([0, np.sign(delta[1])], (abs(delta[1]), 1)),
    ]).astype(np.int64)
    steps = steps[rng.permutation(len(steps))]
    return np.vstack([a, a + np.cumsum(steps, axis=0)])


def grid_map_traces(rows: int = 5, cols: int = 5, spacing: float = 100.0, trips: int = 200,
                    gps_sigma: float = 8.0, sample_period: float = 1.0, seed: int = 0,
                    speed: float = 10.0) -> list[Trajectory]:
    """Simulated GPS trips over a ``rows x cols`` street grid.

    Each trip follows a random shortest route at constant ``speed`` and is
    sampled every ``sample_period`` seconds with isotropic Gaussian noise of
    standard deviation ``gps_sigma``.  Routes and noise use separate streams,
    so changing ``gps_sigma`` leaves the routes unchanged.
    """
    if rows < 2 or cols < 2:
        raise ParameterError("grid needs rows, cols >= 2")
    if trips < 0 or gps_sigma < 0 or not sample_period > 0 or not speed > 0 or not spacing > 0:
        raise ParameterError("invalid grid trace parameters")
    route_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    route_rng = np.random.default_rng(route_ss)
    noise_rng = np.random.default_rng(noise_ss)
    out = []
    for k in range(int(trips)):
        nodes = grid_route_nodes(rows, cols, route_rng) * float(spacing)
        seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        t = np.arange(0.0, cum[-1] / speed + 1e-12, sample_period)
        if t[-1] < cum[-1] / speed:
            t = np.append(t, cum[-1] / speed)
        s = np.minimum(t * speed, cum[-1])
        pts = np.column_stack([np.interp(s, cum, nodes[:, 0]), np.interp(s, cum, nodes[:, 1])])
        pts = pts + gps_sigma * noise_rng.standard_normal(pts.shape)
        out.append(Trajectory(t, pts, id=f"trip{k:04d}"))
    return out


def write_csv(traj: Trajectory, path) -> None:
    """Write ``t,x,y`` (or ``t,x,y,z``) rows, full float precision, no header."""
    rows = np.column_stack([traj.times, traj.points])
    with open(path, "w") as fh:
        fh.write("".join(",".join(map(repr, r)) + "\n" for r in rows.tolist()))


def read_csv(path, id=None) -> Trajectory:
    """Read a file written by :func:`write_csv`."""
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if data.shape[1] not in (3, 4):
        raise FormatError(f"{path}: expected 3 or 4 columns, found {data.shape[1]}")
    return Trajectory(data[:, 0], data[:, 1:], id=id)
