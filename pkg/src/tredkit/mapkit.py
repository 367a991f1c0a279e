"""GPS trace ingestion, skeleton-based road graph extraction and map metrics."""
from __future__ import annotations

import glob
import logging
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from . import _backend
from .core import Trajectory
from .errors import (
    DegeneratePathError,
    EvaluationError,
    FormatError,
    NoPathError,
    ParameterError,
)
from .oracle import Raster

__all__ = [
    "RoadGraph",
    "load_traces",
    "write_traces",
    "fill_small_holes",
    "skeletonize",
    "skeleton_to_graph",
    "douglas_peucker",
    "resample",
    "directed_hausdorff",
    "discrete_frechet",
    "shortest_path",
    "evaluate_map",
    "grid_road_graph",
    "junction_count",
    "extract_map",
    "write_metrics_csv",
]

log = logging.getLogger(__name__)


@dataclass
class RoadGraph:
    """Embedded graph; ``geometry[i]`` is the polyline of edge ``i`` from
    ``vertices[edges[i][0]]`` to ``vertices[edges[i][1]]``."""

    vertices: np.ndarray
    edges: list = field(default_factory=list)
    geometry: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.edges = [(int(u), int(v)) for u, v in self.edges]
        n = len(self.vertices)
        for u, v in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"edge ({u}, {v}) references a missing vertex")
        if not self.geometry:
            self.geometry = [self.vertices[[u, v]] for u, v in self.edges]
        if len(self.geometry) != len(self.edges):
            raise ParameterError("one geometry polyline per edge is required")
        self.geometry = [np.asarray(g, dtype=np.float64).reshape(-1, 2) for g in self.geometry]

    def __len__(self):
        return len(self.vertices)

    def edge_lengths(self) -> np.ndarray:
        return np.array([_length(g) for g in self.geometry])

    def degree(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def translated(self, delta) -> "RoadGraph":
        delta = np.asarray(delta, dtype=np.float64)
        return RoadGraph(self.vertices + delta, self.edges, [g + delta for g in self.geometry])

    def expanded(self) -> "RoadGraph":
        """Equivalent graph whose edges are straight: interior shape points become vertices."""
        verts = [v for v in self.vertices]
        edges = []
        for (u, v), g in zip(self.edges, self.geometry):
            ids = [u]
            for p in g[1:-1]:
                verts.append(p)
                ids.append(len(verts) - 1)
            ids.append(v)
            edges.extend(zip(ids[:-1], ids[1:]))
        return RoadGraph(np.array(verts).reshape(-1, 2), edges)

    def write(self, prefix) -> tuple[str, str]:
        """Write ``<prefix>_vertices.txt`` (``id x y``) and ``<prefix>_edges.txt``
        (``id from to``); edge geometry is kept by expanding shape points."""
        g = self.expanded()
        vpath, epath = f"{prefix}_vertices.txt", f"{prefix}_edges.txt"
        with open(vpath, "w") as fh:
            fh.writelines(f"{i} {x!r} {y!r}\n" for i, (x, y) in enumerate(g.vertices.tolist()))
        with open(epath, "w") as fh:
            fh.writelines(f"{i} {u} {v}\n" for i, (u, v) in enumerate(g.edges))
        return vpath, epath

    @classmethod
    def read(cls, prefix) -> "RoadGraph":
        vpath, epath = f"{prefix}_vertices.txt", f"{prefix}_edges.txt"
        ids, xy = [], []
        for lineno, f in _rows(vpath):
            if len(f) != 3:
                raise FormatError(f"{vpath}:{lineno}: expected 'id x y'")
            try:
                ids.append(int(f[0]))
                xy.append((float(f[1]), float(f[2])))
            except ValueError:
                raise FormatError(f"{vpath}:{lineno}: malformed vertex row") from None
        index = {v: i for i, v in enumerate(ids)}
        edges = []
        for lineno, f in _rows(epath):
            if len(f) != 3:
                raise FormatError(f"{epath}:{lineno}: expected 'id from to'")
            try:
                edges.append((index[int(f[1])], index[int(f[2])]))
            except (ValueError, KeyError):
                raise FormatError(f"{epath}:{lineno}: malformed edge or unknown vertex") from None
        return cls(np.array(xy).reshape(-1, 2), edges)


def _rows(path):
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                f = line.replace(",", " ").split()
                if f and not f[0].startswith("#"):
                    yield lineno, f
    except OSError as exc:
        raise FormatError(f"{path}: {exc.strerror}") from None


def _length(g) -> float:
    return float(np.linalg.norm(np.diff(g, axis=0), axis=1).sum()) if len(g) > 1 else 0.0


# ---------------------------------------------------------------- ingestion

def _parse_format(fmt: str):
    cols = fmt.replace(",", " ").split()
    if sorted(cols) != ["t", "x", "y"] and sorted(cols) != ["t", "x", "y", "z"]:
        raise ParameterError(f"format must name columns x, y, t (optionally z); got {fmt!r}")
    return cols


def _load_file(path, cols) -> Trajectory | None:
    rows = []
    for lineno, f in _rows(path):
        if len(f) != len(cols):
            raise FormatError(f"{path}:{lineno}: expected {len(cols)} columns, found {len(f)}")
        try:
            rows.append([float(v) for v in f])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        return None
    data = np.array(rows)
    t = data[:, cols.index("t")]
    space = [c for c in ("x", "y", "z") if c in cols]
    pts = data[:, [cols.index(c) for c in space]]
    keep = np.ones(len(t), dtype=bool)
    keep[1:] = t[1:] > np.maximum.accumulate(t)[:-1]
    if not keep.all():
        warnings.warn(f"{path}: dropped {np.count_nonzero(~keep)} rows with non-monotone time")
    if keep.sum() < 2:
        warnings.warn(f"{path}: fewer than 2 usable rows, skipped")
        return None
    return Trajectory(t[keep], pts[keep], id=os.path.basename(path))


def load_traces(path, fmt: str = "x y t") -> list[Trajectory]:
    """One trajectory per trip file.

    ``path`` is a directory (every regular file, sorted by name) or a single
    file.  ``fmt`` names the column order; fields may be separated by
    whitespace or commas.
    """
    cols = _parse_format(fmt)
    if os.path.isdir(path):
        files = sorted(p for p in glob.glob(os.path.join(path, "*")) if os.path.isfile(p))
    elif os.path.isfile(path):
        files = [path]
    else:
        raise FileNotFoundError(f"no such trace file or directory: {path}")
    out = []
    for f in files:
        t = _load_file(f, cols)
        if t is not None:
            out.append(t)
    return out


def write_traces(trajs, directory, fmt: str = "x y t") -> list[str]:
    """Write one file per trajectory (``trip_00000.txt`` ...) in column order ``fmt``."""
    cols = _parse_format(fmt)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for k, t in enumerate(trajs):
        data = {"t": t.times, "x": t.points[:, 0], "y": t.points[:, 1]}
        if t.dim == 3:
            data["z"] = t.points[:, 2]
        rows = np.column_stack([data[c] for c in cols]).tolist()
        p = os.path.join(directory, f"trip_{k:05d}.txt")
        with open(p, "w") as fh:
            fh.writelines(" ".join(map(repr, r)) + "\n" for r in rows)
        paths.append(p)
    return paths


# ---------------------------------------------------------------- skeleton

def fill_small_holes(mask: Raster, max_area: float) -> Raster:
    """Fill enclosed background components of area below ``max_area`` (world units)."""
    fg = np.asarray(mask.values) > 0
    bg, n = ndimage.label(~fg)
    if n == 0:
        return mask.like(fg.astype(np.uint8))
    sizes = np.bincount(bg.ravel(), minlength=n + 1) * mask.cell_size**2
    border = np.unique(np.concatenate([bg[0], bg[-1], bg[:, 0], bg[:, -1]]))
    small = sizes < max_area
    small[0] = False
    small[border] = False
    return mask.like((fg | small[bg]).astype(np.uint8))


def _zs_neighbors(P):
    # P2..P9 clockwise from north, on a zero-padded array (rows = axis 0).
    return (P[:-2, 1:-1], P[:-2, 2:], P[1:-1, 2:], P[2:, 2:],
            P[2:, 1:-1], P[2:, :-2], P[1:-1, :-2], P[:-2, :-2])


def _zs_thin(img: np.ndarray) -> np.ndarray:
    P = np.pad(img.astype(np.uint8), 1)
    while True:
        changed = False
        for step in (0, 1):
            n = _zs_neighbors(P)
            B = sum(x.astype(np.int32) for x in n)
            A = sum(((n[i] == 0) & (n[(i + 1) % 8] == 1)).astype(np.int32) for i in range(8))
            p2, p4, p6, p8 = n[0], n[2], n[4], n[6]
            if step == 0:
                c = (p2 * p4 * p6 == 0) & (p4 * p6 * p8 == 0)
            else:
                c = (p2 * p4 * p8 == 0) & (p2 * p6 * p8 == 0)
            core = P[1:-1, 1:-1]
            kill = (core == 1) & (B >= 2) & (B <= 6) & (A == 1) & c
            if kill.any():
                core[kill] = 0
                changed = True
        if not changed:
            return P[1:-1, 1:-1].copy()


def skeletonize(mask: Raster) -> Raster:
    """Zhang-Suen thinning to a one-cell-wide 8-connected skeleton."""
    return mask.like(_zs_thin(np.asarray(mask.values) > 0).astype(np.uint8))


_OFFS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def _adjacency(sk: np.ndarray):
    """Pixel adjacency: 4-neighbors, plus diagonals not bridged by a 4-neighbor."""
    pix = [tuple(p) for p in np.argwhere(sk)]
    on = set(pix)
    adj = {}
    for p in pix:
        nb = []
        for dx, dy in _OFFS:
            q = (p[0] + dx, p[1] + dy)
            if q not in on:
                continue
            if dx and dy and ((p[0] + dx, p[1]) in on or (p[0], p[1] + dy) in on):
                continue
            nb.append(q)
        adj[p] = nb
    return adj


def douglas_peucker(points, tol: float) -> np.ndarray:
    """Douglas-Peucker simplification keeping both endpoints."""
    P = np.asarray(points, dtype=np.float64)
    if len(P) <= 2:
        return P.copy()
    keep = np.zeros(len(P), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(P) - 1)]
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        seg = P[i + 1:j]
        d = _point_segment_dist(seg, P[i], P[j])
        k = int(np.argmax(d))
        if d[k] > tol:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return P[keep]


def skeleton_to_graph(skeleton: Raster, simplify: bool = True, min_spur: float = 0.0) -> RoadGraph:
    """Road graph from a thinned raster.

    Vertices are clusters of adjacent pixels whose degree is not 2; edges follow
    the degree-2 chains between them and are simplified with Douglas-Peucker at
    a tolerance of one cell.  A cycle without such pixels gets one anchor vertex
    (its lowest pixel) and a self-loop.  Edges ending in a degree-1 vertex and
    shorter than ``min_spur`` (world units) are pruned.
    """
    sk = np.asarray(skeleton.values) > 0
    cs = skeleton.cell_size
    adj = _adjacency(sk)

    def world(pixels):
        return skeleton.origin + (np.asarray(pixels, dtype=np.float64) + 0.5) * cs

    nodes = {p for p, nb in adj.items() if len(nb) != 2}
    # Merge adjacent node pixels into one vertex.
    cluster = {}
    verts = []
    for p in sorted(nodes):
        if p in cluster:
            continue
        cid = len(verts)
        stack, members = [p], []
        cluster[p] = cid
        while stack:
            q = stack.pop()
            members.append(q)
            for r in adj[q]:
                if r in nodes and r not in cluster:
                    cluster[r] = cid
                    stack.append(r)
        verts.append(world(members).mean(axis=0))

    edges, geoms = [], []
    seen = set()

    def trace(start, first):
        path = [start, first]
        prev, cur = start, first
        while cur not in nodes:
            seen.add(cur)
            nxt = [r for r in adj[cur] if r != prev]
            if not nxt:
                break
            prev, cur = cur, nxt[0]
            path.append(cur)
            if cur == start:
                break
        return path

    for p in sorted(nodes):
        for q in adj[p]:
            if q in nodes or q in seen:
                continue
            path = trace(p, q)
            end = path[-1]
            if end not in nodes:
                continue
            edges.append((cluster[p], cluster[end]))
            geoms.append(world(path))
    # Cycles made only of degree-2 pixels.
    for p in sorted(adj):
        if p in nodes or p in seen or not adj[p]:
            continue
        seen.add(p)
        cid = len(verts)
        verts.append(world([p])[0])
        path = trace(p, adj[p][0])
        edges.append((cid, cid))
        geoms.append(world(path))
    # Short links between adjacent node pixels of distinct clusters cannot occur
    # (they would share a cluster); drop self-loops of zero length.
    verts = np.array(verts).reshape(-1, 2)
    out_e, out_g = [], []
    for (u, v), g in zip(edges, geoms):
        g = g.copy()
        g[0], g[-1] = verts[u], verts[v]
        if simplify:
            g = douglas_peucker(g, cs)
        if u == v and _length(g) <= 0:
            continue
        if u != v and np.allclose(g[0], g[-1]) and len(g) == 2:
            continue
        out_e.append((u, v))
        out_g.append(g)
    graph = RoadGraph(verts, out_e, out_g)
    if min_spur > 0:
        graph = _prune_spurs(graph, min_spur)
    return graph


def _prune_spurs(g: RoadGraph, min_spur: float) -> RoadGraph:
    deg = g.degree()
    keep = [
        i for i, ((u, v), geom) in enumerate(zip(g.edges, g.geometry))
        if not ((deg[u] == 1 or deg[v] == 1) and u != v and _length(geom) < min_spur
                and max(deg[u], deg[v]) > 1)
    ]
    edges = [g.edges[i] for i in keep]
    geoms = [g.geometry[i] for i in keep]
    used = sorted({w for e in edges for w in e})
    remap = {old: new for new, old in enumerate(used)}
    out = RoadGraph(g.vertices[used], [(remap[u], remap[v]) for u, v in edges], geoms)
    return _merge_degree2(out)


def _merge_degree2(g: RoadGraph) -> RoadGraph:
    """Splice edges through vertices left with degree 2 (no self-loops involved)."""
    edges = list(g.edges)
    geoms = list(g.geometry)
    alive = [True] * len(edges)
    while True:
        deg = np.zeros(len(g.vertices), dtype=np.int64)
        inc = {}
        for i, (u, v) in enumerate(edges):
            if not alive[i]:
                continue
            deg[u] += 1
            deg[v] += 1
            inc.setdefault(u, []).append(i)
            inc.setdefault(v, []).append(i)
        cand = [w for w in range(len(deg)) if deg[w] == 2 and len(set(inc[w])) == 2]
        if not cand:
            break
        w = cand[0]
        i, j = inc[w]
        gi = geoms[i] if edges[i][1] == w else geoms[i][::-1]
        a = edges[i][0] if edges[i][1] == w else edges[i][1]
        gj = geoms[j] if edges[j][0] == w else geoms[j][::-1]
        b = edges[j][1] if edges[j][0] == w else edges[j][0]
        alive[i] = alive[j] = False
        edges.append((a, b))
        geoms.append(np.vstack([gi, gj[1:]]))
        alive.append(True)
    edges = [e for e, ok in zip(edges, alive) if ok]
    geoms = [x for x, ok in zip(geoms, alive) if ok]
    used = sorted({w for e in edges for w in e})
    remap = {old: new for new, old in enumerate(used)}
    return RoadGraph(g.vertices[used], [(remap[u], remap[v]) for u, v in edges], geoms)


def _bend_points(geom: np.ndarray, window: float, cos_lim: float) -> list:
    """Interior points of ``geom`` where the chords to the points ``window``
    arc length behind and ahead turn by more than the threshold."""
    if len(geom) < 3:
        return []
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(geom, axis=0), axis=1))])
    out = []
    for i in range(1, len(geom) - 1):
        if window > 0:
            if s[i] < window or s[-1] - s[i] < window:
                continue
            back = np.array([np.interp(s[i] - window, s, geom[:, k]) for k in range(2)])
            ahead = np.array([np.interp(s[i] + window, s, geom[:, k]) for k in range(2)])
        else:
            back, ahead = geom[i - 1], geom[i + 1]
        a, b = geom[i] - back, ahead - geom[i]
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na > 0 and nb > 0 and np.dot(a, b) / (na * nb) <= cos_lim:
            out.append(geom[i])
    return out


def junction_count(g: RoadGraph, min_turn_deg: float = 45.0, window: float = 0.0,
                   merge_dist: float = 0.0) -> int:
    """Vertices of degree other than 2 plus sharp bends.

    A bend is an interior geometry point where the path turns by at least
    ``min_turn_deg``; with ``window > 0`` the turn is measured between the
    points ``window`` arc length before and after, which ignores pixel-scale
    staircase steps.  Degree-2 vertices are treated as interior points of the
    merged path through them.  Points closer than ``merge_dist`` are counted
    once.
    """
    cos_lim = np.cos(np.radians(min_turn_deg))
    merged = _merge_degree2(g)
    deg = merged.degree()
    pts = [merged.vertices[w] for w in range(len(deg)) if deg[w] != 2]
    for geom in merged.geometry:
        pts.extend(_bend_points(geom, window, cos_lim))
    if not pts or merge_dist <= 0:
        return len(pts)
    P = np.array(pts)
    d = np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1))
    n, _ = connected_components(coo_matrix(d < merge_dist), directed=False)
    return int(n)


# ---------------------------------------------------------------- metrics

def _point_segment_dist(X, a, b):
    X = np.atleast_2d(X)
    ab = b - a
    L2 = float(ab @ ab)
    if L2 == 0.0:
        return np.linalg.norm(X - a, axis=1)
    s = np.clip((X - a) @ ab / L2, 0.0, 1.0)
    return np.linalg.norm(X - (a + s[:, None] * ab), axis=1)


def _as_polyline(p) -> np.ndarray:
    P = np.asarray(p, dtype=np.float64)
    if P.ndim != 2 or len(P) < 1:
        raise ParameterError("a polyline is an (n, d) array with n >= 1")
    return P


def resample(poly, step: float) -> np.ndarray:
    """Insert evenly spaced points so no gap exceeds ``step``; vertices are kept."""
    P = _as_polyline(poly)
    if len(P) < 2 or not step > 0:
        return P.copy()
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    k = np.maximum(np.ceil(seg / step).astype(np.int64), 1)
    parts = []
    for i in range(len(seg)):
        s = np.arange(k[i])[:, None] / k[i]
        parts.append(P[i] + s * (P[i + 1] - P[i]))
    parts.append(P[-1:])
    return np.vstack(parts)


def _step(a, b):
    L = max(_length(a), _length(b))
    return min(1.0, L / 1000.0) if L > 0 else 0.0


def directed_hausdorff(a, b) -> float:
    """Max over densely resampled points of ``a`` of the exact distance to polyline ``b``."""
    A, B = _as_polyline(a), _as_polyline(b)
    X = resample(A, _step(A, B))
    if len(B) == 1:
        return float(np.linalg.norm(X - B[0], axis=1).max())
    best = np.full(len(X), np.inf)
    for i in range(len(B) - 1):
        np.minimum(best, _point_segment_dist(X, B[i], B[i + 1]), out=best)
    return float(best.max())


def discrete_frechet(a, b) -> float:
    """Discrete Frechet distance between the resampled vertex sequences."""
    A, B = _as_polyline(a), _as_polyline(b)
    h = _step(A, B)
    return float(_backend.kernels.frechet(np.ascontiguousarray(resample(A, h)),
                                          np.ascontiguousarray(resample(B, h))))


# ---------------------------------------------------------------- paths

def _weights(g: RoadGraph):
    n = len(g.vertices)
    best = {}
    for i, ((u, v), L) in enumerate(zip(g.edges, g.edge_lengths())):
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key not in best or L < best[key][0]:
            best[key] = (L, i)
    if not best:
        return coo_matrix((n, n)).tocsr(), best
    keys = np.array(list(best))
    w = np.array([best[tuple(k)][0] for k in keys])
    # Zero-length edges would vanish from a sparse matrix.
    w = np.maximum(w, 1e-12)
    mat = coo_matrix((w, (keys[:, 0], keys[:, 1])), shape=(n, n)).tocsr()
    return mat, best


def shortest_path(g: RoadGraph, u: int, v: int, _cache=None) -> np.ndarray:
    """Geometry of a minimum-length path from vertex ``u`` to ``v``.

    Raises
    ------
    DegeneratePathError
        If ``u == v``.
    NoPathError
        If ``v`` is unreachable from ``u``.
    """
    n = len(g.vertices)
    if not (0 <= u < n and 0 <= v < n):
        raise ParameterError(f"vertex index out of range: {u}, {v}")
    if u == v:
        raise DegeneratePathError("path from a vertex to itself is a single point")
    mat, best = _cache if _cache is not None else _weights(g)
    dist, pred = dijkstra(mat, directed=False, indices=u, return_predecessors=True)
    if not np.isfinite(dist[v]):
        raise NoPathError(f"vertex {v} is not reachable from vertex {u}")
    chain = [v]
    while chain[-1] != u:
        chain.append(int(pred[chain[-1]]))
    chain.reverse()
    parts = [g.vertices[u][None]]
    for a, b in zip(chain[:-1], chain[1:]):
        i = best[(min(a, b), max(a, b))][1]
        geom = g.geometry[i] if g.edges[i][0] == a else g.geometry[i][::-1]
        parts.append(geom[1:])
    return np.vstack(parts)


def evaluate_map(truth: RoadGraph, recon: RoadGraph, n_pairs: int = 100, seed: int = 0,
                 snap_radius: float = 100.0, max_tries: int | None = None) -> dict:
    """Path-based comparison of a reconstructed map against ground truth.

    Both graphs are first expanded so shape points count as vertices (the
    view a graph read from files has).  Random connected vertex pairs of
    ``truth`` are snapped to their nearest
    ``recon`` vertices; pairs whose snap distance exceeds ``snap_radius`` or
    that are disconnected in ``recon`` are discarded.  Returns
    ``{"hausdorff": stats, "frechet": stats, "pairs": n}`` where ``stats``
    holds min, max, median and avg.
    """
    if len(truth) == 0 or len(recon) == 0:
        raise EvaluationError("both graphs must have vertices")
    # Same view as the on-disk format: shape points are vertices.
    truth, recon = truth.expanded(), recon.expanded()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    tc, rc = _weights(truth), _weights(recon)
    _, t_lab = connected_components(tc[0], directed=False)
    _, r_lab = connected_components(rc[0], directed=False)
    max_tries = 50 * n_pairs if max_tries is None else max_tries
    # Draw every candidate pair up front so results do not depend on evaluation order.
    cand = rng.integers(len(truth), size=(max_tries, 2))
    haus, fre = [], []
    for a, b in cand:
        if len(haus) >= n_pairs:
            break
        if a == b or t_lab[a] != t_lab[b]:
            continue
        da = np.linalg.norm(recon.vertices - truth.vertices[a], axis=1)
        db = np.linalg.norm(recon.vertices - truth.vertices[b], axis=1)
        ra, rb = int(np.argmin(da)), int(np.argmin(db))
        if da[ra] > snap_radius or db[rb] > snap_radius or ra == rb or r_lab[ra] != r_lab[rb]:
            continue
        tp = shortest_path(truth, int(a), int(b), tc)
        rp = shortest_path(recon, ra, rb, rc)
        haus.append(directed_hausdorff(tp, rp))
        fre.append(discrete_frechet(tp, rp))
    if not haus:
        raise EvaluationError(f"no usable vertex pairs after {max_tries} tries")

    def stats(x):
        x = np.asarray(x)
        return {"min": float(x.min()), "max": float(x.max()),
                "median": float(np.median(x)), "avg": float(x.mean())}

    return {"hausdorff": stats(haus), "frechet": stats(fre), "pairs": len(haus)}


def write_metrics_csv(summary: dict, path) -> None:
    with open(path, "w") as fh:
        fh.write("metric,min,max,median,avg\n")
        for name in ("hausdorff", "frechet"):
            s = summary[name]
            fh.write(f"{name},{s['min']!r},{s['max']!r},{s['median']!r},{s['avg']!r}\n")


def grid_road_graph(rows: int, cols: int, spacing: float) -> RoadGraph:
    """Ground-truth street grid matching :func:`tredkit.synth.grid_map_traces`."""
    ix, iy = np.meshgrid(np.arange(cols), np.arange(rows), indexing="xy")
    verts = np.column_stack([ix.ravel(), iy.ravel()]) * float(spacing)
    vid = lambda c, r: r * cols + c
    edges = [(vid(c, r), vid(c + 1, r)) for r in range(rows) for c in range(cols - 1)]
    edges += [(vid(c, r), vid(c, r + 1)) for r in range(rows - 1) for c in range(cols)]
    return RoadGraph(verts, edges)


# ---------------------------------------------------------------- pipeline

def extract_map(trajs, M: int, tau: int, resolution: int = 256, R: float | None = None,
                origin=None, min_spur: float | None = None, delta_r: float | None = None):
    """Traces to road graph: tree build, level-set raster, thinning, graph.

    Returns ``(graph, info)``; ``info`` holds the tree parameters, the raster
    and skeleton, and wall time per stage.
    """
    from .tred import TredParams, build_offline, level_set_raster

    timings = {}
    t0 = time.perf_counter()
    if R is None:
        params = TredParams.fit(trajs, M, tau, delta_r)
    else:
        params = TredParams(R, M, tau, delta_r, 2, origin)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tree = build_offline(trajs, params)
    timings["build"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    raster = level_set_raster(tree, tau, resolution)
    # Stamps of radius r2_M only just cover the bin lattice; close the pinholes.
    raster = fill_small_holes(raster, (2.0 * params.r2(M)) ** 2)
    timings["raster"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    skel = skeletonize(raster)
    timings["skeleton"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    spur = 2.0 * params.r2(M) if min_spur is None else min_spur
    graph = skeleton_to_graph(skel, min_spur=spur)
    timings["graph"] = time.perf_counter() - t0
    for k, v in timings.items():
        log.info("stage %s: %.3f s", k, v)
    log.info("r1_M = %.3f, r2_M = %.3f", params.r1(M), params.r2(M))
    info = {"params": params, "tree": tree, "raster": raster, "skeleton": skel,
            "timings": timings, "r1": params.r1(M), "r2": params.r2(M)}
    return graph, info
