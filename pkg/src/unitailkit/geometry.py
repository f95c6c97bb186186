"""Quadrilateral geometry: areas, hulls, clipping, IoU, centroids, shrinking,
rectification, and shape statistics.

Coordinates are image pixels with y increasing downward. A valid quad lists
its four corners top-left first and then clockwise on screen, which makes the
shoelace signed area strictly positive under this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from unitailkit import _kernels
from unitailkit.errors import (
    DataFormatError,
    ExteriorPointError,
    GeometryError,
    ParameterError,
)

GEOM_EPS = _kernels.GEOM_EPS


class Point2D(NamedTuple):
    x: float
    y: float


def _check_finite(values, what: str) -> None:
    for v in values:
        if not math.isfinite(v):
            raise GeometryError(f"{what} has non-finite coordinate {v!r}")


def _segments_cross(p1, p2, p3, p4) -> bool:
    """Proper intersection test between open segments p1p2 and p3p4."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return d1 * d2 < 0 and d3 * d4 < 0


@dataclass(frozen=True)
class QuadBox:
    """Four ordered corners (tl, tr, br, bl), clockwise with y down."""

    corners: tuple[Point2D, Point2D, Point2D, Point2D]

    def __post_init__(self):
        if len(self.corners) != 4:
            raise GeometryError(f"quad needs exactly 4 corners, got {len(self.corners)}")
        pts = tuple(Point2D(float(p[0]), float(p[1])) for p in self.corners)
        object.__setattr__(self, "corners", pts)
        _check_finite([c for p in pts for c in p], "quad corner")
        if _segments_cross(pts[0], pts[1], pts[2], pts[3]) or _segments_cross(
            pts[1], pts[2], pts[3], pts[0]
        ):
            raise GeometryError("quad is self-intersecting")
        if _kernels.signed_area(pts) <= GEOM_EPS:
            raise GeometryError(
                "quad has non-positive signed area; corners must run "
                "top-left first, clockwise with y down"
            )

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "QuadBox":
        if len(values) != 8:
            raise GeometryError(f"quad needs 8 coordinates, got {len(values)}")
        v = [float(x) for x in values]
        return cls(
            (
                Point2D(v[0], v[1]),
                Point2D(v[2], v[3]),
                Point2D(v[4], v[5]),
                Point2D(v[6], v[7]),
            )
        )

    def to_flat(self) -> tuple[float, ...]:
        return tuple(c for p in self.corners for c in p)

    @property
    def tl(self) -> Point2D:
        return self.corners[0]

    @property
    def tr(self) -> Point2D:
        return self.corners[1]

    @property
    def br(self) -> Point2D:
        return self.corners[2]

    @property
    def bl(self) -> Point2D:
        return self.corners[3]


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with at least 3 vertices (hulls, clip results, masks)."""

    vertices: tuple[Point2D, ...]

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise GeometryError(
                f"polygon needs at least 3 vertices, got {len(self.vertices)}"
            )
        pts = tuple(Point2D(float(p[0]), float(p[1])) for p in self.vertices)
        object.__setattr__(self, "vertices", pts)
        _check_finite([c for p in pts for c in p], "polygon vertex")

    @classmethod
    def from_quad(cls, quad: QuadBox) -> "Polygon":
        return cls(quad.corners)


@dataclass(frozen=True)
class Homography:
    """Invertible 3x3 perspective transform with bottom-right entry 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise GeometryError(f"homography must be 3x3, got shape {m.shape}")
        if not np.isfinite(m).all():
            raise GeometryError("homography has non-finite entries")
        if abs(m[2, 2]) <= GEOM_EPS:
            raise GeometryError("homography bottom-right entry is zero")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= GEOM_EPS:
            raise GeometryError("homography is singular")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, p: Sequence[float]) -> Point2D:
        x, y = float(p[0]), float(p[1])
        m = self.matrix
        w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
        if abs(w) <= GEOM_EPS:
            raise GeometryError("point maps to infinity under homography")
        return Point2D(
            (m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
            (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w,
        )

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


def shoelace_area(poly: Polygon | QuadBox) -> float:
    """Absolute polygon area via the shoelace formula."""
    verts = poly.corners if isinstance(poly, QuadBox) else poly.vertices
    return _kernels.polygon_area(verts)


def convex_hull(points: Sequence[Point2D]) -> Polygon:
    """Minimal convex polygon containing all points, in the positive-shoelace
    (clockwise with y down) vertex order used by quads."""
    if len(points) < 3:
        raise GeometryError(f"convex hull needs at least 3 points, got {len(points)}")
    hull = _kernels.convex_hull(points)
    if len(hull) < 3:
        raise GeometryError("degenerate polygon: all points are collinear")
    return Polygon(tuple(Point2D(x, y) for x, y in hull))


def clip_polygon(subject: Polygon, clip: Polygon) -> Optional[Polygon]:
    """Intersection of ``subject`` with a convex ``clip`` polygon via successive
    half-plane clipping; None when the intersection is empty."""
    out = _kernels.clip_convex(subject.vertices, clip.vertices)
    if not out:
        return None
    return Polygon(tuple(Point2D(x, y) for x, y in out))


def quad_iou(a: QuadBox, b: QuadBox) -> float:
    """Exact intersection-over-union of two quads. Non-convex quads are
    replaced by their convex hulls before clipping."""
    return _kernels.quad_iou(a.to_flat(), b.to_flat())


def gravity_center(q: QuadBox) -> Point2D:
    """Area-weighted centroid (not the vertex mean)."""
    return Point2D(*_kernels.polygon_centroid(q.corners))


def shrink_quad(q: QuadBox, alpha: float) -> QuadBox:
    """Move every corner toward the gravity center by factor (1 - alpha);
    the area scales by (1 - alpha)^2 and the gravity center is preserved."""
    if not (0.0 <= alpha < 1.0):
        raise ParameterError(f"shrink ratio must be in [0, 1), got {alpha}")
    gx, gy = _kernels.polygon_centroid(q.corners)
    k = 1.0 - alpha
    return QuadBox(
        tuple(Point2D(gx + k * (c.x - gx), gy + k * (c.y - gy)) for c in q.corners)
    )


def point_edge_distances(p: Sequence[float], q: QuadBox) -> tuple[float, float, float, float]:
    """Perpendicular distances from an interior point to the infinite lines
    through the left (bl->tl), right (tr->br), top (tl->tr) and bottom
    (br->bl) edges. Raises ExteriorPointError unless all four are positive,
    i.e. unless p lies strictly inside every inner half-plane (the interior,
    for convex quads)."""
    d = _kernels.edge_distances(float(p[0]), float(p[1]), q.to_flat())
    if min(d) <= 0.0:
        raise ExteriorPointError("point is not strictly inside the quad")
    return d


def aspect_ratio(q: QuadBox) -> float:
    """sqrt((t*b)/(l*r)) over the Euclidean top/bottom/left/right edge lengths."""
    tl, tr, br, bl = q.corners
    t = math.dist(tl, tr)
    b = math.dist(br, bl)
    left = math.dist(bl, tl)
    r = math.dist(tr, br)
    if min(t, b, left, r) <= GEOM_EPS:
        raise GeometryError("degenerate polygon: zero-length quad edge")
    return math.sqrt((t * b) / (left * r))


def interior_angles(q: QuadBox) -> tuple[float, float, float, float]:
    """Interior angles in degrees at tl, tr, br, bl. Convex quads only."""
    pts = q.corners
    if not _kernels.is_convex(pts):
        raise GeometryError("interior angles require a convex quad")
    out = []
    for i in range(4):
        cx, cy = pts[i]
        px, py = pts[(i - 1) % 4]
        nx, ny = pts[(i + 1) % 4]
        v1 = (px - cx, py - cy)
        v2 = (nx - cx, ny - cy)
        dot = v1[0] * v2[0] + v1[1] * v2[1]
        cross = v1[0] * v2[1] - v1[1] * v2[0]
        out.append(math.degrees(math.atan2(abs(cross), dot)))
    return out[0], out[1], out[2], out[3]


def interior_angle_std(q: QuadBox) -> float:
    """Population standard deviation of the four interior angles, degrees.
    0 for rectangles; approaches 90 for a sliver collapsing to a segment."""
    angles = interior_angles(q)
    mean = sum(angles) / 4.0
    return math.sqrt(sum((a - mean) ** 2 for a in angles) / 4.0)


def rectify_homography(q: QuadBox, out_w: float, out_h: float) -> Homography:
    """Perspective transform mapping the quad corners onto the upright
    rectangle (0,0)-(out_w,out_h): tl->(0,0), tr->(out_w,0), br->(out_w,out_h),
    bl->(0,out_h)."""
    if out_w <= 0 or out_h <= 0:
        raise ParameterError(f"output size must be positive, got {out_w}x{out_h}")
    src = [(c.x, c.y) for c in q.corners]
    dst = [(0.0, 0.0), (float(out_w), 0.0), (float(out_w), float(out_h)), (0.0, float(out_h))]
    a = np.zeros((8, 8), dtype=np.float64)
    rhs = np.zeros(8, dtype=np.float64)
    for i, ((x, y), (xx, yy)) in enumerate(zip(src, dst)):
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -xx * x, -xx * y]
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -yy * x, -yy * y]
        rhs[2 * i] = xx
        rhs[2 * i + 1] = yy
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise GeometryError(f"singular system: cannot rectify quad ({exc})") from None
    m = np.array(
        [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]], dtype=np.float64
    )
    return Homography(m)


def warp_image(
    src: bytes | bytearray | memoryview,
    width: int,
    height: int,
    h: Homography,
    out_w: int,
    out_h: int,
) -> bytes:
    """Warp a tightly packed row-major 8-bit RGB buffer through ``h``.

    Output pixel centers are inverse-mapped into the source and bilinearly
    sampled between source pixel centers; taps falling outside the source
    are black.
    """
    if out_w <= 0 or out_h <= 0:
        raise ParameterError(f"output size must be positive, got {out_w}x{out_h}")
    buf = np.frombuffer(src, dtype=np.uint8)
    if buf.size != width * height * 3:
        raise DataFormatError(
            f"RGB buffer has {buf.size} bytes, expected {width * height * 3} "
            f"for {width}x{height}"
        )
    img = buf.reshape(height, width, 3).astype(np.float64)
    minv = h.inverse().matrix

    oy, ox = np.mgrid[0:out_h, 0:out_w]
    cx = ox.astype(np.float64) + 0.5
    cy = oy.astype(np.float64) + 0.5
    w = minv[2, 0] * cx + minv[2, 1] * cy + minv[2, 2]
    valid = np.abs(w) > GEOM_EPS
    w_safe = np.where(valid, w, 1.0)
    u = (minv[0, 0] * cx + minv[0, 1] * cy + minv[0, 2]) / w_safe
    v = (minv[1, 0] * cx + minv[1, 1] * cy + minv[1, 2]) / w_safe

    fx = u - 0.5
    fy = v - 0.5
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = fx - x0
    ty = fy - y0

    acc = np.zeros((out_h, out_w, 3), dtype=np.float64)
    for dy_, dx_ in ((0, 0), (0, 1), (1, 0), (1, 1)):
        xs = x0 + dx_
        ys = y0 + dy_
        wgt = (tx if dx_ else (1.0 - tx)) * (ty if dy_ else (1.0 - ty))
        ok = valid & (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
        xs_c = np.clip(xs, 0, width - 1)
        ys_c = np.clip(ys, 0, height - 1)
        sample = img[ys_c, xs_c]
        acc += sample * (wgt * ok)[..., None]
    out = np.clip(np.rint(acc), 0, 255).astype(np.uint8)
    return out.tobytes()
