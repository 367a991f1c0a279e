"""Flat, append-only trajectory storage shared by the counting kernels."""
import numpy as np

from .core import Trajectory


class TrajectoryStore:
    """Concatenated vertices and arc lengths of a growing set of trajectories.

    Arrays grow by doubling so repeated :meth:`add` calls stay amortized O(n).
    Views returned by :meth:`arrays` are only valid until the next :meth:`add`.
    """

    def __init__(self, dim):
        self.dim = dim
        self.trajectories = []
        self._V = np.empty((64, dim), dtype=np.float64)
        self._cum = np.empty(64, dtype=np.float64)
        self._off = np.empty(8, dtype=np.int64)
        self._nv = np.empty(8, dtype=np.int64)
        self._n = 0

    def __len__(self):
        return len(self.trajectories)

    def add(self, traj: Trajectory) -> int:
        if traj.dim != self.dim:
            raise ValueError(f"trajectory dimension {traj.dim} != store dimension {self.dim}")
        k = len(self.trajectories)
        m = len(traj)
        while self._n + m > len(self._V):
            self._V = np.concatenate([self._V, np.empty_like(self._V)])
            self._cum = np.concatenate([self._cum, np.empty_like(self._cum)])
        if k >= len(self._off):
            self._off = np.concatenate([self._off, np.empty_like(self._off)])
            self._nv = np.concatenate([self._nv, np.empty_like(self._nv)])
        self._V[self._n:self._n + m] = traj.points
        self._cum[self._n:self._n + m] = traj.arclength
        self._off[k] = self._n
        self._nv[k] = m
        self._n += m
        self.trajectories.append(traj)
        return k

    def extend(self, trajs):
        return [self.add(t) for t in trajs]

    def arrays(self):
        """``(V, cum, off, nv)`` as C-contiguous arrays."""
        k = len(self.trajectories)
        return self._V[:self._n], self._cum[:self._n], self._off[:k], self._nv[:k]

    def full_intervals(self, ids=None):
        """Whole-domain intervals ``(tid, a, b)`` for the given (default: all) trajectories."""
        ids = np.arange(len(self), dtype=np.int64) if ids is None else np.asarray(ids, np.int64)
        nv = self._nv[:len(self)]
        return ids, np.zeros(len(ids)), (nv[ids] - 1).astype(np.float64)
