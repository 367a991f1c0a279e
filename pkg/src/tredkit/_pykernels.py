"""Pure NumPy kernels, used when the compiled extension is unavailable.

Semantics are identical to ``_ckernels.pyx``; loops over edges are
vectorized, so throughput is reasonable but well below the compiled path.
"""
import numpy as np

__all__ = ["clip", "refine", "count_region", "tlde_sweep", "tlde_brute", "frechet"]


def _expand(nv, tid, a, b):
    # One row per (interval, edge) pair covering the interval.
    n_last = nv[tid] - 2
    e0 = np.clip(np.floor(a).astype(np.int64), 0, n_last)
    e1 = np.minimum(np.maximum(np.ceil(b).astype(np.int64) - 1, e0), n_last)
    counts = e1 - e0 + 1
    src = np.repeat(np.arange(len(tid)), counts)
    starts = np.cumsum(counts) - counts
    e = e0[src] + (np.arange(counts.sum()) - starts[src])
    slo = np.maximum(a[src] - e, 0.0)
    shi = np.minimum(b[src] - e, 1.0)
    return src, e, slo, shi


def _box_params(p0, p1, center, radius, slo, shi):
    lo = np.asarray(center, dtype=np.float64) - radius
    hi = np.asarray(center, dtype=np.float64) + radius
    ok = slo <= shi
    slo = slo.copy()
    shi = shi.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(p0.shape[1]):
            x0 = p0[:, k]
            dk = p1[:, k] - x0
            flat = dk == 0.0
            ok &= ~(flat & ((x0 < lo[k]) | (x0 > hi[k])))
            s1 = (lo[k] - x0) / dk
            s2 = (hi[k] - x0) / dk
            smin = np.where(flat, -np.inf, np.minimum(s1, s2))
            smax = np.where(flat, np.inf, np.maximum(s1, s2))
            slo = np.maximum(slo, smin)
            shi = np.minimum(shi, smax)
    ok &= slo <= shi
    return ok, slo, shi


def _ball_params(p0, p1, center, radius, slo, shi):
    # center broadcasts against p0: shape (d,) or (n, d)
    c = np.asarray(center, dtype=np.float64)
    D = p1 - p0
    w0 = p0 - c
    w1 = p1 - c
    A = np.zeros(len(p0))
    B = np.zeros(len(p0))
    C0 = np.zeros(len(p0))
    C1 = np.zeros(len(p0))
    for k in range(p0.shape[1]):
        A += D[:, k] * D[:, k]
        B += 2.0 * D[:, k] * w0[:, k]
        C0 += w0[:, k] * w0[:, k]
        C1 += w1[:, k] * w1[:, k]
    C0 -= radius * radius
    C1 -= radius * radius
    degenerate = A == 0.0
    disc = B * B - 4.0 * A * C0
    inside_end = (C0 <= 0.0) | (C1 <= 0.0)
    ok = (disc >= 0.0) | inside_end
    disc = np.where(disc < 0.0, 0.0, disc)
    sq = np.sqrt(disc)
    q = np.where(B >= 0.0, -0.5 * (B + sq), -0.5 * (B - sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = q / A
        s2 = np.where(q != 0.0, C0 / q, s1)
    lo_r = np.minimum(s1, s2)
    hi_r = np.maximum(s1, s2)
    lo_r = np.where((C0 <= 0.0) & (lo_r > 0.0), 0.0, lo_r)
    hi_r = np.where((C1 <= 0.0) & (hi_r < 1.0), 1.0, hi_r)
    new_lo = np.where(degenerate, slo, np.maximum(slo, lo_r))
    new_hi = np.where(degenerate, shi, np.minimum(shi, hi_r))
    ok = np.where(degenerate, C0 <= 0.0, ok & (new_lo <= new_hi))
    return ok, new_lo, new_hi


def _runs(group, t0, t1, P0, P1, last, eps):
    """Assemble ordered pieces into kept maximal runs.

    ``group`` identifies the unit inside which runs may merge; ``last`` is the
    final vertex parameter of each piece's trajectory.
    """
    if len(t0) == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.ones(0, dtype=bool)
    new = np.ones(len(t0), dtype=bool)
    new[1:] = (group[1:] != group[:-1]) | (P0[1:] - P1[:-1] >= eps)
    starts = np.flatnonzero(new)
    ends = np.append(starts[1:] - 1, len(t0) - 1)
    rs, re = t0[starts], t1[ends]
    keep = (P1[ends] - P0[starts] >= eps) | (rs <= 0.0) | (re >= last[starts])
    return starts, ends, keep


def _pieces(V, cum, off, nv, tid, a, b, center, radius, ball):
    src, e, slo, shi = _expand(nv, tid, a, b)
    g = off[tid[src]] + e
    p0 = V[g]
    p1 = V[g + 1]
    if ball:
        ok, slo, shi = _ball_params(p0, p1, center, radius, slo, shi)
    else:
        ok, slo, shi = _box_params(p0, p1, center, radius, slo, shi)
    src, e, slo, shi, g = src[ok], e[ok], slo[ok], shi[ok], g[ok]
    el = cum[g + 1] - cum[g]
    return src, e + slo, e + shi, cum[g] + slo * el, cum[g] + shi * el


def clip(V, cum, off, nv, tid, a, b, center, radius, ball, eps):
    tid = np.asarray(tid, dtype=np.int64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(tid) == 0:
        return (np.empty(0, np.int64), np.empty(0), np.empty(0), np.empty(0, np.int64))
    src, t0, t1, P0, P1 = _pieces(V, cum, off, nv, tid, a, b, center, radius, ball)
    last = (nv[tid[src]] - 1).astype(np.float64)
    starts, ends, keep = _runs(src, t0, t1, P0, P1, last, eps)
    starts, ends = starts[keep], ends[keep]
    s = src[starts]
    return tid[s], t0[starts], t1[ends], s


def refine(V, cum, off, nv, tid, a, b, centers, r1, r2, eps1, eps2):
    out = []
    for c in np.asarray(centers, dtype=np.float64):
        ct, ca, cb, _ = clip(V, cum, off, nv, tid, a, b, c, r2, False, eps2)
        _, _, _, src1 = clip(V, cum, off, nv, ct, ca, cb, c, r1, False, eps1)
        out.append((ct, ca, cb, int(len(np.unique(src1)))))
    return out


def count_region(V, cum, off, nv, tid, a, b, center, radius, ball, eps):
    return int(len(clip(V, cum, off, nv, tid, a, b, center, radius, ball, eps)[0]))


def _cell_pairs(V, g, ox, oy, cs, nx, ny, r, row_lo, row_hi):
    p0, p1 = V[g], V[g + 1]
    lo = np.minimum(p0, p1)
    hi = np.maximum(p0, p1)
    ix0 = np.maximum(np.ceil((lo[:, 0] - r - ox) / cs - 0.5).astype(np.int64), row_lo)
    ix1 = np.minimum(np.floor((hi[:, 0] + r - ox) / cs - 0.5).astype(np.int64), row_hi - 1)
    iy0 = np.maximum(np.ceil((lo[:, 1] - r - oy) / cs - 0.5).astype(np.int64), 0)
    iy1 = np.minimum(np.floor((hi[:, 1] + r - oy) / cs - 0.5).astype(np.int64), ny - 1)
    wx = np.maximum(ix1 - ix0 + 1, 0)
    wy = np.maximum(iy1 - iy0 + 1, 0)
    n = wx * wy
    k = np.repeat(np.arange(len(g)), n)
    local = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
    ix = ix0[k] + local // np.maximum(wy[k], 1)
    iy = iy0[k] + local % np.maximum(wy[k], 1)
    return g[k], ix, iy


def tlde_sweep(V, cum, off, nv, ox, oy, cs, nx, ny, r, eps, band_rows=16):
    if V.shape[1] != 2:
        raise ValueError("tlde_sweep is 2-D only")
    counts = np.zeros((nx, ny), dtype=np.int64)
    edge_traj = np.concatenate(
        [np.full(n - 1, k, dtype=np.int64) for k, n in enumerate(nv)]
        or [np.empty(0, np.int64)]
    )
    g_all = np.concatenate(
        [np.arange(o, o + n - 1, dtype=np.int64) for o, n in zip(off, nv)]
        or [np.empty(0, np.int64)]
    )
    if len(g_all) == 0:
        return counts
    xlo = np.minimum(V[g_all, 0], V[g_all + 1, 0]) - r
    xhi = np.maximum(V[g_all, 0], V[g_all + 1, 0]) + r
    last_by_traj = (nv - 1).astype(np.float64)
    for row_lo in range(0, nx, band_rows):
        row_hi = min(row_lo + band_rows, nx)
        bx0 = ox + (row_lo + 0.5) * cs
        bx1 = ox + (row_hi - 0.5) * cs
        sel = (xhi >= bx0) & (xlo <= bx1)
        if not sel.any():
            continue
        g, ix, iy = _cell_pairs(V, g_all[sel], ox, oy, cs, nx, ny, r, row_lo, row_hi)
        if len(g) == 0:
            continue
        cx = ox + (ix + 0.5) * cs
        cy = oy + (iy + 0.5) * cs
        n = len(g)
        ok, slo, shi = _ball_params(
            V[g], V[g + 1], np.column_stack([cx, cy]), r, np.zeros(n), np.ones(n)
        )
        g, ix, iy, slo, shi = g[ok], ix[ok], iy[ok], slo[ok], shi[ok]
        cell = ix * ny + iy
        order = np.lexsort((g, cell))
        g, cell, slo, shi = g[order], cell[order], slo[order], shi[order]
        traj = edge_traj[np.searchsorted(g_all, g)]
        e = g - off[traj]
        el = cum[g + 1] - cum[g]
        P0 = cum[g] + slo * el
        P1 = cum[g] + shi * el
        group = cell * len(nv) + traj
        starts, ends, keep = _runs(group, e + slo, e + shi, P0, P1, last_by_traj[traj], eps)
        kept_cells = cell[starts[keep]]
        counts.reshape(-1)[:] += np.bincount(kept_cells, minlength=nx * ny)
    return counts


def tlde_brute(V, cum, off, nv, ox, oy, cs, nx, ny, r, eps):
    if V.shape[1] != 2:
        raise ValueError("tlde_brute is 2-D only")
    counts = np.zeros((nx, ny), dtype=np.int64)
    tid = np.arange(len(nv), dtype=np.int64)
    a = np.zeros(len(nv))
    b = (nv - 1).astype(np.float64)
    if len(tid) == 0:
        return counts
    for ix in range(nx):
        for iy in range(ny):
            c = (ox + (ix + 0.5) * cs, oy + (iy + 0.5) * cs)
            counts[ix, iy] = count_region(V, cum, off, nv, tid, a, b, c, r, True, eps)
    return counts


def frechet(P, Q):
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    p, q = len(P), len(Q)
    if p == 0 or q == 0:
        raise ValueError("empty polyline")
    ca = np.full((p, q), np.inf)
    dist = np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(axis=2))
    # Anti-diagonal sweep: cells with i + j = s depend only on s - 1 and s - 2.
    for s in range(p + q - 1):
        i = np.arange(max(0, s - q + 1), min(p, s + 1))
        j = s - i
        if s == 0:
            ca[0, 0] = dist[0, 0]
            continue
        best = np.full(len(i), np.inf)
        m = i > 0
        best[m] = np.minimum(best[m], ca[i[m] - 1, j[m]])
        m = j > 0
        best[m] = np.minimum(best[m], ca[i[m], j[m] - 1])
        m = (i > 0) & (j > 0)
        best[m] = np.minimum(best[m], ca[i[m] - 1, j[m] - 1])
        ca[i, j] = np.maximum(best, dist[i, j])
    return float(ca[-1, -1])
