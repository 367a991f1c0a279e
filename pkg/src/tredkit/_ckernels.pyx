# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: exact polyline clipping, tree refinement, grid counts.

Trajectories arrive as a flat store: ``V`` (N, d) vertices, ``cum`` (N,)
cumulative arc length, ``off``/``nv`` per-trajectory vertex offset and count.
Intervals are ``(tid, a, b)`` in vertex parameter units of trajectory ``tid``.
Semantics mirror ``tredkit._pykernels`` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, ceil, fabs, INFINITY

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline bint _edge_box(const double[:, ::1] V, Py_ssize_t g, int d,
                           const double* lo, const double* hi,
                           double* slo, double* shi) noexcept nogil:
    # Liang-Barsky against the closed box; narrows [slo, shi] in place.
    cdef int k
    cdef double p0, dk, s1, s2, tmp
    for k in range(d):
        p0 = V[g, k]
        dk = V[g + 1, k] - p0
        if dk == 0.0:
            if p0 < lo[k] or p0 > hi[k]:
                return False
        else:
            s1 = (lo[k] - p0) / dk
            s2 = (hi[k] - p0) / dk
            if s1 > s2:
                tmp = s1
                s1 = s2
                s2 = tmp
            if s1 > slo[0]:
                slo[0] = s1
            if s2 < shi[0]:
                shi[0] = s2
            if slo[0] > shi[0]:
                return False
    return True


cdef inline bint _edge_ball(const double[:, ::1] V, Py_ssize_t g, int d,
                            const double* c, double r,
                            double* slo, double* shi) noexcept nogil:
    # Closed ball; roots of |p0 + s D - c|^2 = r^2 in stable form.
    cdef int k
    cdef double A = 0.0, B = 0.0, C0 = 0.0, C1 = 0.0, D, w0, w1, disc, sq, q, s1, s2, tmp
    for k in range(d):
        D = V[g + 1, k] - V[g, k]
        w0 = V[g, k] - c[k]
        w1 = V[g + 1, k] - c[k]
        A += D * D
        B += 2.0 * D * w0
        C0 += w0 * w0
        C1 += w1 * w1
    C0 -= r * r
    C1 -= r * r
    if A == 0.0:
        return C0 <= 0.0
    disc = B * B - 4.0 * A * C0
    if disc < 0.0:
        if C0 <= 0.0 or C1 <= 0.0:
            disc = 0.0
        else:
            return False
    sq = sqrt(disc)
    if B >= 0.0:
        q = -0.5 * (B + sq)
    else:
        q = -0.5 * (B - sq)
    s1 = q / A
    s2 = C0 / q if q != 0.0 else s1
    if s1 > s2:
        tmp = s1
        s1 = s2
        s2 = tmp
    if C0 <= 0.0 and s1 > 0.0:
        s1 = 0.0
    if C1 <= 0.0 and s2 < 1.0:
        s2 = 1.0
    if s1 > slo[0]:
        slo[0] = s1
    if s2 < shi[0]:
        shi[0] = s2
    return slo[0] <= shi[0]


cdef Py_ssize_t _clip_one(const double[:, ::1] V, const double[::1] cum,
                          i64 off, i64 nv, double a, double b, int d,
                          const double* center, double radius, bint ball, double eps,
                          bint write, i64 tid, Py_ssize_t src,
                          i64[::1] otid, double[::1] oa, double[::1] ob, i64[::1] osrc,
                          Py_ssize_t pos) noexcept nogil:
    # Maximal runs of one interval inside the region; returns number kept.
    cdef double lo[3]
    cdef double hi[3]
    cdef int k
    cdef Py_ssize_t e, e0, e1, g, kept = 0
    cdef double slo, shi, t0, t1, P0, P1, el
    cdef bint is_open = False
    cdef double rs = 0.0, re = 0.0, As = 0.0, Ae = 0.0
    cdef double last = <double>(nv - 1)
    if not ball:
        for k in range(d):
            lo[k] = center[k] - radius
            hi[k] = center[k] + radius
    e0 = <Py_ssize_t>floor(a)
    if e0 > nv - 2:
        e0 = nv - 2
    if e0 < 0:
        e0 = 0
    e1 = <Py_ssize_t>ceil(b) - 1
    if e1 < e0:
        e1 = e0
    if e1 > nv - 2:
        e1 = nv - 2
    for e in range(e0, e1 + 1):
        slo = a - e
        if slo < 0.0:
            slo = 0.0
        shi = b - e
        if shi > 1.0:
            shi = 1.0
        if slo > shi:
            continue
        g = off + e
        if ball:
            if not _edge_ball(V, g, d, center, radius, &slo, &shi):
                continue
        else:
            if not _edge_box(V, g, d, lo, hi, &slo, &shi):
                continue
        t0 = e + slo
        t1 = e + shi
        el = cum[g + 1] - cum[g]
        P0 = cum[g] + slo * el
        P1 = cum[g] + shi * el
        if is_open and P0 - Ae < eps:
            re = t1
            Ae = P1
            continue
        if is_open:
            if Ae - As >= eps or rs <= 0.0 or re >= last:
                if write:
                    otid[pos + kept] = tid
                    oa[pos + kept] = rs
                    ob[pos + kept] = re
                    osrc[pos + kept] = src
                kept += 1
        is_open = True
        rs = t0
        re = t1
        As = P0
        Ae = P1
    if is_open:
        if Ae - As >= eps or rs <= 0.0 or re >= last:
            if write:
                otid[pos + kept] = tid
                oa[pos + kept] = rs
                ob[pos + kept] = re
                osrc[pos + kept] = src
            kept += 1
    return kept


cdef Py_ssize_t _bound(const i64[::1] nv, const i64[::1] tid,
                       const double[::1] a, const double[::1] b):
    cdef Py_ssize_t j, total = 0
    cdef i64 e0, e1
    for j in range(tid.shape[0]):
        e0 = <i64>floor(a[j])
        e1 = <i64>ceil(b[j])
        if e1 - e0 < 1:
            total += 1
        else:
            total += e1 - e0
    return total + 1


def clip(const double[:, ::1] V, const double[::1] cum, const i64[::1] off,
         const i64[::1] nv, const i64[::1] tid, const double[::1] a,
         const double[::1] b, center, double radius, bint ball, double eps):
    """Clip intervals to a closed box (half-side ``radius``) or ball.

    Returns ``(tid, a, b, src)`` where ``src`` indexes the input interval.
    """
    cdef int d = V.shape[1]
    cdef double c[3]
    cdef int k
    for k in range(d):
        c[k] = center[k]
    cdef Py_ssize_t n = tid.shape[0], j, pos = 0
    cdef Py_ssize_t cap = _bound(nv, tid, a, b)
    otid_a = np.empty(cap, dtype=np.int64)
    oa_a = np.empty(cap, dtype=np.float64)
    ob_a = np.empty(cap, dtype=np.float64)
    osrc_a = np.empty(cap, dtype=np.int64)
    cdef i64[::1] otid = otid_a
    cdef double[::1] oa = oa_a
    cdef double[::1] ob = ob_a
    cdef i64[::1] osrc = osrc_a
    cdef i64 t
    with nogil:
        for j in range(n):
            t = tid[j]
            pos += _clip_one(V, cum, off[t], nv[t], a[j], b[j], d, c, radius, ball,
                             eps, True, t, j, otid, oa, ob, osrc, pos)
    return otid_a[:pos].copy(), oa_a[:pos].copy(), ob_a[:pos].copy(), osrc_a[:pos].copy()


def refine(const double[:, ::1] V, const double[::1] cum, const i64[::1] off,
           const i64[::1] nv, const i64[::1] tid, const double[::1] a,
           const double[::1] b, const double[:, ::1] centers, double r1, double r2,
           double eps1, double eps2):
    """Robust-count refinement of a parent segment set into child bins.

    For each child center: clip to the r2-cube and count the clipped
    intervals that contain a kept sub-run inside the r1-cube.
    Returns a list of ``(tid, a, b, count)`` per child.
    """
    cdef int d = V.shape[1]
    cdef Py_ssize_t K = centers.shape[0], n = tid.shape[0], ci, j, pos, q
    cdef Py_ssize_t cap = _bound(nv, tid, a, b)
    cdef double c[3]
    cdef int k
    cdef i64 t, count
    otid_a = np.empty(cap, dtype=np.int64)
    oa_a = np.empty(cap, dtype=np.float64)
    ob_a = np.empty(cap, dtype=np.float64)
    osrc_a = np.empty(cap, dtype=np.int64)
    cdef i64[::1] otid = otid_a
    cdef double[::1] oa = oa_a
    cdef double[::1] ob = ob_a
    cdef i64[::1] osrc = osrc_a
    out = []
    for ci in range(K):
        for k in range(d):
            c[k] = centers[ci, k]
        pos = 0
        count = 0
        with nogil:
            for j in range(n):
                t = tid[j]
                pos += _clip_one(V, cum, off[t], nv[t], a[j], b[j], d, c, r2, False,
                                 eps2, True, t, j, otid, oa, ob, osrc, pos)
            for q in range(pos):
                t = otid[q]
                if _clip_one(V, cum, off[t], nv[t], oa[q], ob[q], d, c, r1, False,
                             eps1, False, t, q, otid, oa, ob, osrc, 0) > 0:
                    count += 1
        out.append((otid_a[:pos].copy(), oa_a[:pos].copy(), ob_a[:pos].copy(), int(count)))
    return out


def count_region(const double[:, ::1] V, const double[::1] cum, const i64[::1] off,
                 const i64[::1] nv, const i64[::1] tid, const double[::1] a,
                 const double[::1] b, center, double radius, bint ball, double eps):
    """Number of kept runs of the intervals inside the region (no output)."""
    cdef int d = V.shape[1]
    cdef double c[3]
    cdef int k
    for k in range(d):
        c[k] = center[k]
    cdef Py_ssize_t j, total = 0
    cdef i64 t
    cdef i64[::1] dummy_i = np.empty(1, dtype=np.int64)
    cdef double[::1] dummy_f = np.empty(1, dtype=np.float64)
    with nogil:
        for j in range(tid.shape[0]):
            t = tid[j]
            total += _clip_one(V, cum, off[t], nv[t], a[j], b[j], d, c, radius, ball,
                               eps, False, t, j, dummy_i, dummy_f, dummy_f, dummy_i, 0)
    return int(total)


def tlde_sweep(const double[:, ::1] V, const double[::1] cum, const i64[::1] off,
               const i64[::1] nv, double ox, double oy, double cs, Py_ssize_t nx,
               Py_ssize_t ny, double r, double eps):
    """Disk counts at every cell center of a 2-D grid.

    Each edge only visits cells within ``r`` of its bounding box; per-cell run
    state reproduces maximal-interval counting with the same merge/discard
    rules as :func:`clip`.
    """
    counts_a = np.zeros((nx, ny), dtype=np.int64)
    last_a = np.full((nx, ny), -1, dtype=np.int64)
    rs_a = np.zeros((nx, ny), dtype=np.float64)
    re_a = np.zeros((nx, ny), dtype=np.float64)
    as_a = np.zeros((nx, ny), dtype=np.float64)
    ae_a = np.zeros((nx, ny), dtype=np.float64)
    cdef i64[:, ::1] counts = counts_a
    cdef i64[:, ::1] lastt = last_a
    cdef double[:, ::1] RS = rs_a
    cdef double[:, ::1] RE = re_a
    cdef double[:, ::1] AS = as_a
    cdef double[:, ::1] AE = ae_a
    cdef Py_ssize_t K = off.shape[0], kk, e, g, ix, iy, ix0, ix1, iy0, iy1, q, ntouched
    cdef double c[2]
    cdef double slo, shi, xmin, xmax, ymin, ymax, el, P0, P1, last
    cdef i64 o, n
    touched_a = np.empty(nx * ny, dtype=np.int64)
    cdef i64[::1] touched = touched_a
    if V.shape[1] != 2:
        raise ValueError("tlde_sweep is 2-D only")
    with nogil:
        for kk in range(K):
            o = off[kk]
            n = nv[kk]
            last = <double>(n - 1)
            ntouched = 0
            for e in range(n - 1):
                g = o + e
                xmin = V[g, 0] if V[g, 0] < V[g + 1, 0] else V[g + 1, 0]
                xmax = V[g + 1, 0] if V[g, 0] < V[g + 1, 0] else V[g, 0]
                ymin = V[g, 1] if V[g, 1] < V[g + 1, 1] else V[g + 1, 1]
                ymax = V[g + 1, 1] if V[g, 1] < V[g + 1, 1] else V[g, 1]
                ix0 = <Py_ssize_t>ceil((xmin - r - ox) / cs - 0.5)
                ix1 = <Py_ssize_t>floor((xmax + r - ox) / cs - 0.5)
                iy0 = <Py_ssize_t>ceil((ymin - r - oy) / cs - 0.5)
                iy1 = <Py_ssize_t>floor((ymax + r - oy) / cs - 0.5)
                if ix0 < 0:
                    ix0 = 0
                if iy0 < 0:
                    iy0 = 0
                if ix1 > nx - 1:
                    ix1 = nx - 1
                if iy1 > ny - 1:
                    iy1 = ny - 1
                el = cum[g + 1] - cum[g]
                for ix in range(ix0, ix1 + 1):
                    c[0] = ox + (ix + 0.5) * cs
                    for iy in range(iy0, iy1 + 1):
                        c[1] = oy + (iy + 0.5) * cs
                        slo = 0.0
                        shi = 1.0
                        if not _edge_ball(V, g, 2, c, r, &slo, &shi):
                            continue
                        P0 = cum[g] + slo * el
                        P1 = cum[g] + shi * el
                        if lastt[ix, iy] == kk:
                            if P0 - AE[ix, iy] < eps:
                                RE[ix, iy] = e + shi
                                AE[ix, iy] = P1
                                continue
                            if (AE[ix, iy] - AS[ix, iy] >= eps or RS[ix, iy] <= 0.0
                                    or RE[ix, iy] >= last):
                                counts[ix, iy] += 1
                        else:
                            lastt[ix, iy] = kk
                            touched[ntouched] = ix * ny + iy
                            ntouched += 1
                        RS[ix, iy] = e + slo
                        RE[ix, iy] = e + shi
                        AS[ix, iy] = P0
                        AE[ix, iy] = P1
            for q in range(ntouched):
                ix = touched[q] // ny
                iy = touched[q] % ny
                if (AE[ix, iy] - AS[ix, iy] >= eps or RS[ix, iy] <= 0.0
                        or RE[ix, iy] >= last):
                    counts[ix, iy] += 1
    return counts_a


def tlde_brute(const double[:, ::1] V, const double[::1] cum, const i64[::1] off,
               const i64[::1] nv, double ox, double oy, double cs, Py_ssize_t nx,
               Py_ssize_t ny, double r, double eps):
    """Disk counts on a 2-D grid by direct per-cell evaluation, O(cells * edges)."""
    counts_a = np.zeros((nx, ny), dtype=np.int64)
    cdef i64[:, ::1] counts = counts_a
    cdef Py_ssize_t K = off.shape[0], kk, ix, iy
    cdef double c[2]
    cdef i64[::1] dummy_i = np.empty(1, dtype=np.int64)
    cdef double[::1] dummy_f = np.empty(1, dtype=np.float64)
    cdef i64 total
    if V.shape[1] != 2:
        raise ValueError("tlde_brute is 2-D only")
    with nogil:
        for ix in range(nx):
            c[0] = ox + (ix + 0.5) * cs
            for iy in range(ny):
                c[1] = oy + (iy + 0.5) * cs
                total = 0
                for kk in range(K):
                    total += _clip_one(V, cum, off[kk], nv[kk], 0.0, <double>(nv[kk] - 1),
                                       2, c, r, True, eps, False, kk, 0,
                                       dummy_i, dummy_f, dummy_f, dummy_i, 0)
                counts[ix, iy] = total
    return counts_a


def frechet(const double[:, ::1] P, const double[:, ::1] Q):
    """Discrete Frechet distance by the Eiter-Mannila recurrence, O(p q) time, O(q) memory."""
    cdef Py_ssize_t p = P.shape[0], q = Q.shape[0], i, j, k, d = P.shape[1]
    if p == 0 or q == 0:
        raise ValueError("empty polyline")
    prev_a = np.empty(q, dtype=np.float64)
    cur_a = np.empty(q, dtype=np.float64)
    cdef double[::1] prev = prev_a
    cdef double[::1] cur = cur_a
    cdef double[::1] tmp
    cdef double dist, s, m
    with nogil:
        for i in range(p):
            for j in range(q):
                s = 0.0
                for k in range(d):
                    s = s + (P[i, k] - Q[j, k]) * (P[i, k] - Q[j, k])
                dist = sqrt(s)
                if i == 0 and j == 0:
                    cur[j] = dist
                elif i == 0:
                    cur[j] = dist if dist > cur[j - 1] else cur[j - 1]
                elif j == 0:
                    cur[j] = dist if dist > prev[j] else prev[j]
                else:
                    m = prev[j]
                    if cur[j - 1] < m:
                        m = cur[j - 1]
                    if prev[j - 1] < m:
                        m = prev[j - 1]
                    cur[j] = dist if dist > m else m
            tmp = prev
            prev = cur
            cur = tmp
    return float(prev[q - 1])
