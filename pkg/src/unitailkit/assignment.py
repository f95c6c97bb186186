"""Training-target assignment for anchor-free quadrilateral detection.

Covers the per-pixel centerness scores, the closed-form two-level pyramid
assignment with loss-reweighting factors, and the full per-pixel target maps
a detection head would be trained against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from unitailkit import _kernels
from unitailkit.errors import ExteriorPointError, GeometryError, ParameterError
from unitailkit.geometry import QuadBox, gravity_center, shoelace_area, shrink_quad


@dataclass(frozen=True)
class PyramidSpec:
    """Feature-pyramid configuration: inclusive level range, the reference
    level for pretraining-sized objects, and the pretraining image size.
    stride(l) = 2**l pixels."""

    min_level: int = 3
    max_level: int = 7
    l_org: int = 5
    pretrain_size: float = 224.0

    def __post_init__(self):
        if self.min_level > self.max_level:
            raise ParameterError(
                f"empty level range {self.min_level}..{self.max_level}"
            )
        if not (self.min_level <= self.l_org <= self.max_level):
            raise ParameterError(
                f"reference level {self.l_org} outside {self.min_level}..{self.max_level}"
            )
        if self.pretrain_size <= 0:
            raise ParameterError(f"pretrain size must be positive, got {self.pretrain_size}")

    def stride(self, level: int) -> int:
        return 2 ** level

    @property
    def levels(self) -> range:
        return range(self.min_level, self.max_level + 1)


class LevelWeight(NamedTuple):
    level: int
    factor: float


@dataclass(frozen=True)
class AssignmentTarget:
    """One positive training location: pyramid level, grid cell, loss weight
    (centerness x level factor), per-corner offsets normalized by the level
    stride, and the index of the ground truth it learns."""

    level: int
    grid_y: int
    grid_x: int
    weight: float
    offsets: tuple[float, ...]
    gt_index: int


def centerness_fcos(p: Sequence[float], box: Sequence[float]) -> float:
    """Axis-aligned centerness: sqrt of the product of the min/max ratios of
    the left/right and top/bottom distances from p to the box sides."""
    px, py = float(p[0]), float(p[1])
    x0, y0, x1, y1 = (float(v) for v in box)
    dl = px - x0
    dr = x1 - px
    dt = py - y0
    db = y1 - py
    if min(dl, dr, dt, db) <= 0.0:
        raise ExteriorPointError("point is not strictly inside the box")
    return math.sqrt(
        (min(dl, dr) / max(dl, dr)) * (min(dt, db) / max(dt, db))
    )


def centerness_quad(p: Sequence[float], q: QuadBox) -> float:
    """Quad-centerness of an interior point; 1 exactly at the gravity center,
    decaying toward the edges. Equals the axis-aligned centerness on
    rectangles."""
    return _kernels.centerness_quad(float(p[0]), float(p[1]), q.to_flat())


def soft_scale(area: float, spec: PyramidSpec | None = None) -> tuple[LevelWeight, ...]:
    """Assign an object area to one or two adjacent pyramid levels with
    complementary loss-reweighting factors.

    The fractional level is l_org + log2(sqrt(area)/pretrain_size); its ceil
    and floor receive factors frac and 1-frac. An integer fractional level
    collapses both onto one level with factor 1. Levels outside the pyramid
    are clamped to the boundary, merging factors when they land on the same
    level. Factors always sum to 1.
    """
    if spec is None:
        spec = PyramidSpec()
    if not (area > 0.0) or not math.isfinite(area):
        raise ParameterError(f"object area must be positive and finite, got {area}")
    s = math.log2(math.sqrt(area) / spec.pretrain_size)
    fractional = spec.l_org + s
    li = math.ceil(fractional)
    lj = math.floor(fractional)
    f_li = s - math.floor(s)
    f_lj = 1.0 - f_li
    li = min(max(li, spec.min_level), spec.max_level)
    lj = min(max(lj, spec.min_level), spec.max_level)
    if li == lj:
        return (LevelWeight(li, 1.0),)
    return (LevelWeight(li, f_li), LevelWeight(lj, f_lj))


def _grid_range(lo: float, hi: float, stride: int, n_cells: int) -> range:
    """Grid indices whose cell centers (i + 0.5) * stride fall in [lo, hi]."""
    first = math.ceil(lo / stride - 0.5)
    last = math.floor(hi / stride - 0.5)
    first = max(first, 0)
    last = min(last, n_cells - 1)
    return range(first, last + 1)


def assign_targets(
    gts: Sequence[QuadBox],
    spec: PyramidSpec | None = None,
    image_w: float = 0.0,
    image_h: float = 0.0,
    alpha: float = 0.3,
) -> list[AssignmentTarget]:
    """Build the per-pixel training targets for one image.

    Every grid cell whose center falls inside a ground truth's alpha-shrunk
    quad (on either of its two assigned levels) yields one target weighted by
    quad-centerness times the level factor, with stride-normalized offsets to
    the four corners. A cell claimed by several shrunk quads on the same
    level goes to the smallest-area ground truth (ties to the lower index).
    A ground truth left with no target gets a single fallback target at the
    grid cell nearest its gravity center on its dominant level, with
    centerness treated as 1.
    """
    if spec is None:
        spec = PyramidSpec()
    if not (0.0 <= alpha < 1.0):
        raise ParameterError(f"shrink ratio must be in [0, 1), got {alpha}")
    if not gts:
        return []
    if image_w <= 0 or image_h <= 0:
        raise ParameterError(f"image size must be positive, got {image_w}x{image_h}")

    areas = [shoelace_area(gt) for gt in gts]
    level_weights = [soft_scale(area, spec) for area in areas]

    # candidates[(level, gy, gx)] -> (gt_area, gt_index, weight, offsets)
    candidates: dict[tuple[int, int, int], tuple[float, int, float, tuple[float, ...]]] = {}
    assigned_counts = [0] * len(gts)

    def offsets_for(gt: QuadBox, cx: float, cy: float, stride: int) -> tuple[float, ...]:
        out = []
        for corner in gt.corners:
            out.append((corner.x - cx) / stride)
            out.append((corner.y - cy) / stride)
        return tuple(out)

    for idx, gt in enumerate(gts):
        shrunk = shrink_quad(gt, alpha)
        sverts = shrunk.corners
        sx = [c.x for c in sverts]
        sy = [c.y for c in sverts]
        flat = gt.to_flat()
        for level, factor in level_weights[idx]:
            stride = spec.stride(level)
            n_x = math.ceil(image_w / stride)
            n_y = math.ceil(image_h / stride)
            for gy in _grid_range(min(sy), max(sy), stride, n_y):
                cy = (gy + 0.5) * stride
                for gx in _grid_range(min(sx), max(sx), stride, n_x):
                    cx = (gx + 0.5) * stride
                    if not _kernels.point_in_polygon(cx, cy, sverts):
                        continue
                    try:
                        c = _kernels.centerness_quad(cx, cy, flat)
                    except (ExteriorPointError, GeometryError):
                        # shrunk-quad containment without positive edge
                        # distances only happens for pathological non-convex
                        # quads; such cells are skipped
                        continue
                    key = (level, gy, gx)
                    cand = (areas[idx], idx, c * factor, offsets_for(gt, cx, cy, stride))
                    prev = candidates.get(key)
                    if prev is None or (cand[0], cand[1]) < (prev[0], prev[1]):
                        candidates[key] = cand

    targets = [
        AssignmentTarget(level, gy, gx, weight, offs, gt_index)
        for (level, gy, gx), (_, gt_index, weight, offs) in candidates.items()
    ]
    for t in targets:
        assigned_counts[t.gt_index] += 1

    # learnability fallback: nearest grid cell on the dominant level
    for idx, gt in enumerate(gts):
        if assigned_counts[idx] > 0:
            continue
        dominant = max(level_weights[idx], key=lambda lw: (lw.factor, -lw.level))
        stride = spec.stride(dominant.level)
        n_x = math.ceil(image_w / stride)
        n_y = math.ceil(image_h / stride)
        g = gravity_center(gt)
        gx = min(max(int(round(g.x / stride - 0.5)), 0), n_x - 1)
        gy = min(max(int(round(g.y / stride - 0.5)), 0), n_y - 1)
        cx = (gx + 0.5) * stride
        cy = (gy + 0.5) * stride
        targets.append(
            AssignmentTarget(
                dominant.level,
                gy,
                gx,
                dominant.factor,
                offsets_for(gt, cx, cy, stride),
                idx,
            )
        )

    targets.sort(key=lambda t: (t.level, t.grid_y, t.grid_x, t.gt_index))
    return targets
