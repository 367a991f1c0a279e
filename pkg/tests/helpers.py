"""Independent oracles used across the test modules."""
import numpy as np

from tredkit.core import Trajectory


def sweep_runs(traj: Trajectory, region, step_frac=1e-4, bisect_iters=50):
    """Maximal runs of region membership found by a dense parameter sweep.

    The parameter range is sampled every ``step_frac`` of its length and
    every membership flip is refined by bisection.  Returns a list of
    ``(u_start, u_end)`` in vertex-parameter units.
    """
    n = len(traj) - 1
    u = np.linspace(0.0, n, int(round(1.0 / step_frac)) + 1)
    inside = region.contains(traj.point_at_param(u))

    def flip(lo, hi, state_lo):
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if bool(region.contains(traj.point_at_param(mid)[None])[0]) == state_lo:
                lo = mid
            else:
                hi = mid
        return lo, hi

    runs = []
    start = 0.0 if inside[0] else None
    for i in range(1, len(u)):
        if inside[i] and not inside[i - 1]:
            _, hi = flip(u[i - 1], u[i], False)
            start = hi
        elif inside[i - 1] and not inside[i]:
            lo, _ = flip(u[i - 1], u[i], True)
            runs.append((start, lo))
            start = None
    if start is not None:
        runs.append((start, float(n)))
    return runs


def point_segment_distance(p, a, b):
    """Distance from point ``p`` to segment ``ab`` by projection (scalar version)."""
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    L2 = float(ab @ ab)
    s = 0.0 if L2 == 0 else min(max(float((p - a) @ ab) / L2, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def three_path_configuration():
    """Three trajectories about the origin with r1 = 1, r2 = 1.5.

    One line through the center, one line cutting only the corner of the
    inner square, and one path hugging y = 1.1 with two dips into the inner
    square (the second also entering the inner disk).
    """
    line = Trajectory.from_points([(-3.0, 0.0), (3.0, 0.0)], id="through")
    c = 1.2 * np.sqrt(2.0)
    corner = Trajectory.from_points([(-3.0, c + 3.0), (c + 3.0, -3.0)], id="corner")
    dips = Trajectory.from_points(
        [(-3.0, 1.1), (-0.9, 1.1), (-0.6, 0.9), (-0.3, 1.1), (0.0, 1.1),
         (0.3, 0.6), (0.6, 1.1), (3.0, 1.1)],
        id="dips",
    )
    return [line, corner, dips]


def zhang_suen_reference(img):
    """Textbook Zhang-Suen thinning, one pixel at a time.

    Rows are axis 0; P2..P9 run clockwise from north.  Each sub-iteration
    marks pixels against a frozen snapshot and deletes them together.
    """
    P = np.pad(np.asarray(img, dtype=np.uint8), 1)
    offs = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    changed = True
    while changed:
        changed = False
        for step in (0, 1):
            marks = []
            for i in range(1, P.shape[0] - 1):
                for j in range(1, P.shape[1] - 1):
                    if not P[i, j]:
                        continue
                    n = [int(P[i + di, j + dj]) for di, dj in offs]
                    B = sum(n)
                    A = sum(1 for k in range(8) if n[k] == 0 and n[(k + 1) % 8] == 1)
                    p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
                    if step == 0:
                        c = p2 * p4 * p6 == 0 and p4 * p6 * p8 == 0
                    else:
                        c = p2 * p4 * p8 == 0 and p2 * p6 * p8 == 0
                    if 2 <= B <= 6 and A == 1 and c:
                        marks.append((i, j))
            for i, j in marks:
                P[i, j] = 0
            changed = changed or bool(marks)
    return P[1:-1, 1:-1]
