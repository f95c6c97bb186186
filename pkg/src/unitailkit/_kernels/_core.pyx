# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry/assignment kernels.

Mirrors ``_fallback.py`` operation for operation; the two modules must stay
in sync (same arithmetic, same operation order) so that results agree across
backends to within 1e-12.
"""

from libc.math cimport fabs, sqrt
from libc.stdlib cimport free, malloc

import numpy as np

from unitailkit.errors import ExteriorPointError, GeometryError

cdef double GEOM_EPS = 1e-9


# ------------------------------------------------------------ conversions

cdef object _to_array2(object verts):
    arr = np.ascontiguousarray(verts, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected an (N, 2) vertex array, got shape {arr.shape}")
    return arr


cdef int _load_quad(object q, double* xs, double* ys) except -1:
    cdef int i
    cdef double[::1] view
    try:
        view = np.ascontiguousarray(q, dtype=np.float64)
    except (TypeError, ValueError):
        raise GeometryError("quad must be 8 numbers") from None
    if view.shape[0] != 8:
        raise GeometryError(f"quad needs 8 coordinates, got {view.shape[0]}")
    for i in range(4):
        xs[i] = view[2 * i]
        ys[i] = view[2 * i + 1]
    return 0


# ------------------------------------------------------------ area/centroid

cdef double _signed_area_c(double* xs, double* ys, int n):
    cdef double s = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += xs[i] * ys[j] - xs[j] * ys[i]
    return 0.5 * s


def signed_area(verts):
    cdef double[:, ::1] v = _to_array2(verts)
    cdef int n = v.shape[0]
    cdef double s = 0.0
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        s += v[i, 0] * v[j, 1] - v[j, 0] * v[i, 1]
    return 0.5 * s


def polygon_area(verts):
    return fabs(signed_area(verts))


def polygon_centroid(verts):
    cdef double[:, ::1] v = _to_array2(verts)
    cdef int n = v.shape[0]
    cdef double a = 0.0, cx = 0.0, cy = 0.0, c
    cdef int i, j
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        c = v[i, 0] * v[j, 1] - v[j, 0] * v[i, 1]
        a += c
        cx += (v[i, 0] + v[j, 0]) * c
        cy += (v[i, 1] + v[j, 1]) * c
    a *= 0.5
    if fabs(a) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: area is zero")
    return cx / (6.0 * a), cy / (6.0 * a)


# ------------------------------------------------------------ hull/convexity

cdef double _cross3_c(double ox_, double oy_, double ax_, double ay_,
                      double bx_, double by_):
    return (ax_ - ox_) * (by_ - oy_) - (ay_ - oy_) * (bx_ - ox_)


def convex_hull(points):
    """Monotone-chain hull in positive-shoelace order; collinear inputs yield
    fewer than 3 vertices (caller decides whether that is an error)."""
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    cdef int n = len(pts)
    if n < 3:
        return pts
    cdef double[:, ::1] arr = np.asarray(pts, dtype=np.float64)
    cdef long* idx = <long*> malloc(2 * n * sizeof(long))
    if idx == NULL:
        raise MemoryError()
    cdef int k = 0, lower, i
    try:
        for i in range(n):
            while k >= 2 and _cross3_c(
                arr[idx[k - 2], 0], arr[idx[k - 2], 1],
                arr[idx[k - 1], 0], arr[idx[k - 1], 1],
                arr[i, 0], arr[i, 1],
            ) <= 0.0:
                k -= 1
            idx[k] = i
            k += 1
        lower = k
        for i in range(n - 2, -1, -1):
            while k > lower and _cross3_c(
                arr[idx[k - 2], 0], arr[idx[k - 2], 1],
                arr[idx[k - 1], 0], arr[idx[k - 1], 1],
                arr[i, 0], arr[i, 1],
            ) <= 0.0:
                k -= 1
            idx[k] = i
            k += 1
        return [pts[idx[i]] for i in range(k - 1)]
    finally:
        free(idx)


cdef bint _is_convex_c(double* xs, double* ys, int n):
    cdef int i, j, k
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        k = j + 1
        if k == n:
            k = 0
        if _cross3_c(xs[i], ys[i], xs[j], ys[j], xs[k], ys[k]) < -GEOM_EPS:
            return False
    return True


def is_convex(verts):
    cdef double[:, ::1] v = _to_array2(verts)
    cdef int n = v.shape[0]
    cdef int i, j, k
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        k = j + 1
        if k == n:
            k = 0
        if _cross3_c(v[i, 0], v[i, 1], v[j, 0], v[j, 1], v[k, 0], v[k, 1]) < -GEOM_EPS:
            return False
    return True


# ------------------------------------------------------------------- clip

cdef int _clip_convex_c(double* sx, double* sy, int ns,
                        double* cx, double* cy, int nc,
                        double* wx, double* wy,
                        double* ox, double* oy, int cap):
    """Clip a subject polygon by a positively oriented convex polygon.

    ``wx/wy`` and ``ox/oy`` are caller-provided scratch/output buffers of at
    least ``cap`` doubles. Returns the output vertex count (0 when the
    intersection is empty or degenerate), or -1 on buffer overflow.
    """
    cdef int n_in = ns, n_out = 0
    cdef int i, j, v
    cdef double eax, eay, ex, ey, px, py, qx, qy, sp, sq, t
    for i in range(ns):
        wx[i] = sx[i]
        wy[i] = sy[i]
    for i in range(nc):
        if n_in == 0:
            break
        eax = cx[i]
        eay = cy[i]
        j = i + 1
        if j == nc:
            j = 0
        ex = cx[j] - eax
        ey = cy[j] - eay
        n_out = 0
        px = wx[n_in - 1]
        py = wy[n_in - 1]
        sp = ex * (py - eay) - ey * (px - eax)
        for v in range(n_in):
            qx = wx[v]
            qy = wy[v]
            sq = ex * (qy - eay) - ey * (qx - eax)
            if (sq >= 0.0) != (sp >= 0.0):
                if n_out >= cap:
                    return -1
                t = sp / (sp - sq)
                ox[n_out] = px + t * (qx - px)
                oy[n_out] = py + t * (qy - py)
                n_out += 1
            if sq >= 0.0:
                if n_out >= cap:
                    return -1
                ox[n_out] = qx
                oy[n_out] = qy
                n_out += 1
            px = qx
            py = qy
            sp = sq
        for v in range(n_out):
            wx[v] = ox[v]
            wy[v] = oy[v]
        n_in = n_out
    if n_in < 3:
        return 0
    for v in range(n_in):
        ox[v] = wx[v]
        oy[v] = wy[v]
    return n_in


def clip_convex(subject, clip):
    cdef double[:, ::1] s = _to_array2(subject)
    cdef double[:, ::1] c = _to_array2(clip)
    cdef int ns = s.shape[0], nc = c.shape[0]
    if ns == 0 or nc == 0:
        return []
    cdef int cap = 2 * (ns + nc) + 8
    cdef double* buf = <double*> malloc((2 * ns + 2 * nc + 4 * cap) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* sx = buf
    cdef double* sy = sx + ns
    cdef double* cxp = sy + ns
    cdef double* cyp = cxp + nc
    cdef double* wx = cyp + nc
    cdef double* wy = wx + cap
    cdef double* ox = wy + cap
    cdef double* oy = ox + cap
    cdef int i, n
    cdef double area
    try:
        for i in range(ns):
            sx[i] = s[i, 0]
            sy[i] = s[i, 1]
        for i in range(nc):
            cxp[i] = c[i, 0]
            cyp[i] = c[i, 1]
        area = _signed_area_c(cxp, cyp, nc)
        if area < 0.0:
            for i in range(nc):
                cxp[i] = c[nc - 1 - i, 0]
                cyp[i] = c[nc - 1 - i, 1]
        n = _clip_convex_c(sx, sy, ns, cxp, cyp, nc, wx, wy, ox, oy, cap)
        if n < 0:
            raise GeometryError("clip output exceeded its vertex bound")
        return [(ox[i], oy[i]) for i in range(n)]
    finally:
        free(buf)


# -------------------------------------------------------------------- IoU

cdef double _quad_iou_c(double* axs, double* ays, double* bxs, double* bys) except -1.0:
    """IoU of two positively oriented convex quads (possibly hulled to
    triangles, hence the explicit vertex counts via trailing NaN-free n)."""
    # fixed-size scratch: quad clipped by quad never exceeds 8 vertices
    cdef double wx[24]
    cdef double wy[24]
    cdef double ox[24]
    cdef double oy[24]
    cdef double area_a = fabs(_signed_area_c(axs, ays, 4))
    cdef double area_b = fabs(_signed_area_c(bxs, bys, 4))
    cdef int n = _clip_convex_c(axs, ays, 4, bxs, bys, 4, wx, wy, ox, oy, 24)
    cdef double inter = 0.0, union_, iou
    if n > 0:
        inter = fabs(_signed_area_c(ox, oy, n))
    union_ = area_a + area_b - inter
    if union_ <= 0.0:
        return 0.0
    iou = inter / union_
    if iou < 0.0:
        return 0.0
    if iou > 1.0:
        return 1.0
    return iou


cdef int _prepare_quad(double* xs, double* ys) except -1:
    """Orient a loaded quad positively; returns 1 when it is convex, 0 when
    the caller must fall back to the hull path. Raises on degeneracy."""
    cdef double sa = _signed_area_c(xs, ys, 4)
    cdef double tmp
    cdef int i
    if fabs(sa) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: zero-area quad in IoU")
    if sa < 0.0:
        for i in range(2):
            tmp = xs[i]
            xs[i] = xs[3 - i]
            xs[3 - i] = tmp
            tmp = ys[i]
            ys[i] = ys[3 - i]
            ys[3 - i] = tmp
    return 1 if _is_convex_c(xs, ys, 4) else 0


cdef bint _bbox_disjoint(double* axs, double* ays, double* bxs, double* bys):
    cdef double amin, amax, bmin, bmax
    cdef int i
    amin = amax = axs[0]
    bmin = bmax = bxs[0]
    for i in range(1, 4):
        if axs[i] < amin: amin = axs[i]
        if axs[i] > amax: amax = axs[i]
        if bxs[i] < bmin: bmin = bxs[i]
        if bxs[i] > bmax: bmax = bxs[i]
    if amax < bmin or bmax < amin:
        return True
    amin = amax = ays[0]
    bmin = bmax = bys[0]
    for i in range(1, 4):
        if ays[i] < amin: amin = ays[i]
        if ays[i] > amax: amax = ays[i]
        if bys[i] < bmin: bmin = bys[i]
        if bys[i] > bmax: bmax = bys[i]
    return amax < bmin or bmax < amin


def _quad_iou_hulled(a_pts, b_pts):
    """Slow path for non-convex quads: hull then clip (list based, identical
    to the fallback semantics)."""
    pa = a_pts
    pb = b_pts
    if not is_convex(pa):
        pa = convex_hull(pa)
        if len(pa) < 3:
            raise GeometryError("degenerate polygon: quad hull collapsed")
    if not is_convex(pb):
        pb = convex_hull(pb)
        if len(pb) < 3:
            raise GeometryError("degenerate polygon: quad hull collapsed")
    area_a = polygon_area(pa)
    area_b = polygon_area(pb)
    inter_pts = clip_convex(pa, pb)
    inter = polygon_area(inter_pts) if inter_pts else 0.0
    union = area_a + area_b - inter
    if union <= 0.0:
        return 0.0
    iou = inter / union
    if iou < 0.0:
        return 0.0
    if iou > 1.0:
        return 1.0
    return iou


def quad_iou(a, b):
    cdef double axs[4]
    cdef double ays[4]
    cdef double bxs[4]
    cdef double bys[4]
    _load_quad(a, axs, ays)
    _load_quad(b, bxs, bys)
    cdef int ca = _prepare_quad(axs, ays)
    cdef int cb = _prepare_quad(bxs, bys)
    if _bbox_disjoint(axs, ays, bxs, bys):
        return 0.0
    if ca and cb:
        return _quad_iou_c(axs, ays, bxs, bys)
    return _quad_iou_hulled(
        [(axs[0], ays[0]), (axs[1], ays[1]), (axs[2], ays[2]), (axs[3], ays[3])],
        [(bxs[0], bys[0]), (bxs[1], bys[1]), (bxs[2], bys[2]), (bxs[3], bys[3])],
    )


def batch_quad_iou(qa, qb):
    cdef double[:, ::1] a = np.ascontiguousarray(qa, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(qb, dtype=np.float64)
    if a.shape[1] != 8 or b.shape[1] != 8:
        raise GeometryError("quad batches must be N x 8")
    cdef int n = a.shape[0], m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double axs[4]
    cdef double ays[4]
    cdef double bxs[4]
    cdef double bys[4]
    cdef int i, j, k, ca, cb
    for i in range(n):
        for k in range(4):
            axs[k] = a[i, 2 * k]
            ays[k] = a[i, 2 * k + 1]
        ca = _prepare_quad(axs, ays)
        for j in range(m):
            for k in range(4):
                bxs[k] = b[j, 2 * k]
                bys[k] = b[j, 2 * k + 1]
            cb = _prepare_quad(bxs, bys)
            if _bbox_disjoint(axs, ays, bxs, bys):
                o[i, j] = 0.0
            elif ca and cb:
                o[i, j] = _quad_iou_c(axs, ays, bxs, bys)
            else:
                o[i, j] = _quad_iou_hulled(
                    [(axs[0], ays[0]), (axs[1], ays[1]), (axs[2], ays[2]), (axs[3], ays[3])],
                    [(bxs[0], bys[0]), (bxs[1], bys[1]), (bxs[2], bys[2]), (bxs[3], bys[3])],
                )
    return out


# ------------------------------------------------------------- distances

cdef int _edge_distances_c(double px, double py, double* xs, double* ys,
                           double* out) except -1:
    """Signed distances to the (left, right, top, bottom) edge lines."""
    cdef int[4] ia = [3, 1, 0, 2]
    cdef int[4] ib = [0, 2, 1, 3]
    cdef int e
    cdef double ax, ay, ex, ey, length
    for e in range(4):
        ax = xs[ia[e]]
        ay = ys[ia[e]]
        ex = xs[ib[e]] - ax
        ey = ys[ib[e]] - ay
        length = sqrt(ex * ex + ey * ey)
        if length <= GEOM_EPS:
            raise GeometryError("degenerate polygon: zero-length quad edge")
        out[e] = (ex * (py - ay) - ey * (px - ax)) / length
    return 0


def edge_distances(px, py, q):
    cdef double xs[4]
    cdef double ys[4]
    cdef double d[4]
    _load_quad(q, xs, ys)
    _edge_distances_c(px, py, xs, ys, d)
    return d[0], d[1], d[2], d[3]


cdef double _centroid_quad_c(double* xs, double* ys, double* gx, double* gy) except? -1.0:
    cdef double a = 0.0, cx = 0.0, cy = 0.0, c
    cdef int i, j
    for i in range(4):
        j = i + 1
        if j == 4:
            j = 0
        c = xs[i] * ys[j] - xs[j] * ys[i]
        a += c
        cx += (xs[i] + xs[j]) * c
        cy += (ys[i] + ys[j]) * c
    a *= 0.5
    if fabs(a) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: area is zero")
    gx[0] = cx / (6.0 * a)
    gy[0] = cy / (6.0 * a)
    return a


cdef double _centerness_c(double px, double py, double* xs, double* ys) except -1.0:
    cdef double gx, gy, prod
    cdef double dg[4]
    cdef double dp[4]
    cdef int i
    _centroid_quad_c(xs, ys, &gx, &gy)
    _edge_distances_c(gx, gy, xs, ys, dg)
    if dg[0] <= 0.0 or dg[1] <= 0.0 or dg[2] <= 0.0 or dg[3] <= 0.0:
        raise GeometryError("gravity center is not interior to all edge half-planes")
    _edge_distances_c(px, py, xs, ys, dp)
    if dp[0] <= 0.0 or dp[1] <= 0.0 or dp[2] <= 0.0 or dp[3] <= 0.0:
        raise ExteriorPointError("point is not strictly inside the quad")
    prod = 1.0
    for i in range(4):
        if dp[i] < dg[i]:
            prod *= dp[i] / dg[i]
        else:
            prod *= dg[i] / dp[i]
    return sqrt(prod)


def centerness_quad(px, py, q):
    cdef double xs[4]
    cdef double ys[4]
    _load_quad(q, xs, ys)
    return _centerness_c(px, py, xs, ys)


def batch_centerness(points, q):
    cdef double[:, ::1] pts = _to_array2(points)
    cdef double xs[4]
    cdef double ys[4]
    _load_quad(q, xs, ys)
    cdef int n = pts.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef int i
    for i in range(n):
        try:
            o[i] = _centerness_c(pts[i, 0], pts[i, 1], xs, ys)
        except ExteriorPointError:
            raise ExteriorPointError(
                f"point {i} is not strictly inside the quad"
            ) from None
    return out


def point_in_polygon(px, py, verts):
    cdef double[:, ::1] v = _to_array2(verts)
    cdef int n = v.shape[0]
    cdef bint inside = False
    cdef double x1, y1, x2, y2, xin, fx = px, fy = py
    cdef int i
    x1 = v[n - 1, 0]
    y1 = v[n - 1, 1]
    for i in range(n):
        x2 = v[i, 0]
        y2 = v[i, 1]
        if (y1 > fy) != (y2 > fy):
            xin = x1 + (fy - y1) * (x2 - x1) / (y2 - y1)
            if fx < xin:
                inside = not inside
        x1 = x2
        y1 = y2
    return inside


# --------------------------------------------------------------- hungarian

def hungarian(cost):
    """Minimum-cost assignment (same potentials algorithm as the fallback)."""
    arr = np.ascontiguousarray(cost, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"cost matrix must be 2D, got shape {arr.shape}")
    cdef double[:, ::1] c = arr
    cdef int n = c.shape[0], m = c.shape[1]
    if n == 0 or m == 0:
        return []
    cdef int k = n if n > m else m
    cdef double inf = float("inf")
    cdef double* u = <double*> malloc((k + 1) * sizeof(double))
    cdef double* v = <double*> malloc((k + 1) * sizeof(double))
    cdef double* minv = <double*> malloc((k + 1) * sizeof(double))
    cdef long* match_col = <long*> malloc((k + 1) * sizeof(long))
    cdef long* way = <long*> malloc((k + 1) * sizeof(long))
    cdef char* used = <char*> malloc((k + 1) * sizeof(char))
    if u == NULL or v == NULL or minv == NULL or match_col == NULL or way == NULL or used == NULL:
        if u != NULL:
            free(u)
        if v != NULL:
            free(v)
        if minv != NULL:
            free(minv)
        if match_col != NULL:
            free(match_col)
        if way != NULL:
            free(way)
        if used != NULL:
            free(used)
        raise MemoryError()
    cdef int i, j, j0, j1, i0
    cdef double delta, cur, cij
    try:
        for j in range(k + 1):
            u[j] = 0.0
            v[j] = 0.0
            match_col[j] = 0
            way[j] = 0
        for i in range(1, k + 1):
            match_col[0] = i
            j0 = 0
            for j in range(k + 1):
                minv[j] = inf
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = match_col[j0]
                delta = inf
                j1 = 0
                for j in range(1, k + 1):
                    if not used[j]:
                        if i0 - 1 < n and j - 1 < m:
                            cij = c[i0 - 1, j - 1]
                        else:
                            cij = 0.0
                        cur = cij - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(k + 1):
                    if used[j]:
                        u[match_col[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if match_col[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                match_col[j0] = match_col[j1]
                j0 = j1
                if j0 == 0:
                    break
        pairs = []
        for j in range(1, k + 1):
            i = match_col[j]
            if 1 <= i <= n and j <= m:
                pairs.append((i - 1, j - 1))
        pairs.sort()
        return pairs
    finally:
        free(u)
        free(v)
        free(minv)
        free(match_col)
        free(way)
        free(used)
