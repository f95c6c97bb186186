"""Pure-Python geometry/assignment kernels.

Reference implementation of the hot kernels; selected at import time when the
compiled extension is unavailable or when UNITAIL_KERNEL_BACKEND=python.
The compiled core in ``_core.pyx`` mirrors this module operation for
operation (same arithmetic, same order) so both backends agree to within
1e-12 on all inputs.
"""

from __future__ import annotations

import math

from unitailkit.errors import ExteriorPointError, GeometryError

GEOM_EPS = 1e-9


def _as_points(verts) -> list[tuple[float, float]]:
    return [(float(v[0]), float(v[1])) for v in verts]


def _quad_points(q) -> list[tuple[float, float]]:
    return [
        (float(q[0]), float(q[1])),
        (float(q[2]), float(q[3])),
        (float(q[4]), float(q[5])),
        (float(q[6]), float(q[7])),
    ]


def signed_area(verts) -> float:
    """Shoelace signed area; positive for clockwise-with-y-down vertex order."""
    pts = _as_points(verts)
    n = len(pts)
    s = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def polygon_area(verts) -> float:
    return abs(signed_area(verts))


def polygon_centroid(verts) -> tuple[float, float]:
    """Area-weighted centroid. Raises GeometryError on ~zero-area polygons."""
    pts = _as_points(verts)
    n = len(pts)
    a = 0.0
    cx = 0.0
    cy = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        c = x0 * y1 - x1 * y0
        a += c
        cx += (x0 + x1) * c
        cy += (y0 + y1) * c
    a *= 0.5
    if abs(a) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: area is zero")
    return cx / (6.0 * a), cy / (6.0 * a)


def _cross3(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> list[tuple[float, float]]:
    """Monotone-chain hull in positive-shoelace order; collinear inputs
    yield fewer than 3 vertices (caller decides whether that is an error)."""
    pts = sorted(set(_as_points(points)))
    if len(pts) < 3:
        return pts
    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and _cross3(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross3(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return hull


def is_convex(verts) -> bool:
    """True when no consecutive-edge cross product is materially negative
    (vertices assumed in positive-shoelace order)."""
    pts = _as_points(verts)
    n = len(pts)
    for i in range(n):
        c = _cross3(pts[i], pts[(i + 1) % n], pts[(i + 2) % n])
        if c < -GEOM_EPS:
            return False
    return True


def clip_convex(subject, clip) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of ``subject`` by a convex ``clip`` polygon.

    Returns the intersection vertex list ([] when empty/degenerate).
    """
    clip_pts = _as_points(clip)
    if signed_area(clip_pts) < 0.0:
        clip_pts = clip_pts[::-1]
    output = _as_points(subject)
    n = len(clip_pts)
    for i in range(n):
        if not output:
            break
        ax, ay = clip_pts[i]
        bx, by = clip_pts[(i + 1) % n]
        ex = bx - ax
        ey = by - ay
        inputs = output
        output = []
        px, py = inputs[-1]
        sp = ex * (py - ay) - ey * (px - ax)
        for qx, qy in inputs:
            sq = ex * (qy - ay) - ey * (qx - ax)
            q_in = sq >= 0.0
            p_in = sp >= 0.0
            if q_in != p_in:
                t = sp / (sp - sq)
                output.append((px + t * (qx - px), py + t * (qy - py)))
            if q_in:
                output.append((qx, qy))
            px, py, sp = qx, qy, sq
    if len(output) < 3:
        return []
    return output


def quad_iou(a, b) -> float:
    """Exact IoU of two quads (flat [x0,y0,...,x3,y3] corner arrays).

    A negatively-oriented quad is reversed; a non-convex quad is replaced
    by its convex hull before clipping.
    """
    pa = _quad_points(a)
    pb = _quad_points(b)
    sa = signed_area(pa)
    sb = signed_area(pb)
    if abs(sa) <= GEOM_EPS or abs(sb) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: zero-area quad in IoU")
    if sa < 0.0:
        pa = pa[::-1]
    if sb < 0.0:
        pb = pb[::-1]
    # disjoint bounding boxes: exactly zero by contract
    if (
        max(p[0] for p in pa) < min(p[0] for p in pb)
        or max(p[0] for p in pb) < min(p[0] for p in pa)
        or max(p[1] for p in pa) < min(p[1] for p in pb)
        or max(p[1] for p in pb) < min(p[1] for p in pa)
    ):
        return 0.0
    if not is_convex(pa):
        pa = convex_hull(pa)
        if len(pa) < 3:
            raise GeometryError("degenerate polygon: quad hull collapsed")
    if not is_convex(pb):
        pb = convex_hull(pb)
        if len(pb) < 3:
            raise GeometryError("degenerate polygon: quad hull collapsed")
    area_a = abs(signed_area(pa))
    area_b = abs(signed_area(pb))
    inter = clip_convex(pa, pb)
    inter_area = abs(signed_area(inter)) if inter else 0.0
    union = area_a + area_b - inter_area
    if union <= 0.0:
        return 0.0
    iou = inter_area / union
    if iou < 0.0:
        return 0.0
    if iou > 1.0:
        return 1.0
    return iou


def batch_quad_iou(qa, qb):
    """Pairwise IoU: qa is N rows of 8, qb is M rows of 8; returns N lists of M."""
    return [[quad_iou(a, b) for b in qb] for a in qa]


def edge_distances(px: float, py: float, q) -> tuple[float, float, float, float]:
    """Signed perpendicular distances from (px,py) to the left/right/top/bottom
    edge lines of a quad; positive on the interior side of each edge."""
    pts = _quad_points(q)
    # (left, right, top, bottom) as (start, end) corner indices, tl-first clockwise
    out = []
    for ia, ib in ((3, 0), (1, 2), (0, 1), (2, 3)):
        ax, ay = pts[ia]
        bx, by = pts[ib]
        ex = bx - ax
        ey = by - ay
        length = math.sqrt(ex * ex + ey * ey)
        if length <= GEOM_EPS:
            raise GeometryError("degenerate polygon: zero-length quad edge")
        out.append((ex * (py - ay) - ey * (px - ax)) / length)
    return out[0], out[1], out[2], out[3]


def centerness_quad(px: float, py: float, q) -> float:
    """Quad-centerness of an interior point: sqrt of the product over the four
    edges of min/max ratios between the point's and the gravity center's
    edge-line distances. Exactly 1 at the gravity center."""
    pts = _quad_points(q)
    gx, gy = polygon_centroid(pts)
    dg = edge_distances(gx, gy, q)
    if min(dg) <= 0.0:
        raise GeometryError("gravity center is not interior to all edge half-planes")
    dp = edge_distances(px, py, q)
    if min(dp) <= 0.0:
        raise ExteriorPointError("point is not strictly inside the quad")
    prod = 1.0
    for i in range(4):
        if dp[i] < dg[i]:
            prod *= dp[i] / dg[i]
        else:
            prod *= dg[i] / dp[i]
    return math.sqrt(prod)


def batch_centerness(points, q) -> list[float]:
    out = []
    for idx, p in enumerate(points):
        try:
            out.append(centerness_quad(float(p[0]), float(p[1]), q))
        except ExteriorPointError:
            raise ExteriorPointError(
                f"point {idx} is not strictly inside the quad"
            ) from None
    return out


def point_in_polygon(px: float, py: float, verts) -> bool:
    """Even-odd rule containment test."""
    pts = _as_points(verts)
    inside = False
    x1, y1 = pts[-1]
    for x2, y2 in pts:
        if (y1 > py) != (y2 > py):
            xin = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xin:
                inside = not inside
        x1, y1 = x2, y2
    return inside


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment over an n x m matrix.

    Rectangular matrices are padded to square with zero-cost dummies, so the
    result is exactly min(n, m) disjoint (row, col) pairs whose total cost is
    the global minimum over all such matchings. Handles negative entries.
    """
    rows = [[float(v) for v in row] for row in cost]
    n = len(rows)
    m = len(rows[0]) if n else 0
    if n == 0 or m == 0:
        return []
    k = max(n, m)
    inf = math.inf

    def c(i: int, j: int) -> float:
        if i < n and j < m:
            return rows[i][j]
        return 0.0

    u = [0.0] * (k + 1)
    v = [0.0] * (k + 1)
    match_col = [0] * (k + 1)  # match_col[j] = row (1-based) assigned to col j
    way = [0] * (k + 1)
    for i in range(1, k + 1):
        match_col[0] = i
        j0 = 0
        minv = [inf] * (k + 1)
        used = [False] * (k + 1)
        while True:
            used[j0] = True
            i0 = match_col[j0]
            delta = inf
            j1 = 0
            for j in range(1, k + 1):
                if not used[j]:
                    cur = c(i0 - 1, j - 1) - u[i0] - v[j]
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
