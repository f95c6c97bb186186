"""COCO-style average-precision evaluation over quadrilateral detections,
ignore-region handling, quad NMS, and the cross-domain geometric-mean metric.

Detections for one category ("product") are pooled globally by score across
images, matched per image at each IoU threshold, and summarized with
101-point interpolated average precision.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from unitailkit import _kernels
from unitailkit.errors import ParameterError
from unitailkit.geometry import Polygon, QuadBox

MAX_DETECTIONS_PER_IMAGE = 400
DEFAULT_IOU_THRESHOLDS = tuple(0.5 + 0.05 * i for i in range(10))


@dataclass(frozen=True)
class GroundTruthRecord:
    image_id: str
    quad: QuadBox
    ignore: bool = False


@dataclass(frozen=True)
class DetectionRecord:
    image_id: str
    quad: QuadBox
    score: float

    def __post_init__(self):
        if not math.isfinite(self.score):
            raise ParameterError(f"detection score must be finite, got {self.score}")


class MatchLabel(Enum):
    TP = "TP"
    FP = "FP"
    IGNORED = "IGNORED"


@dataclass(frozen=True)
class EvalResult:
    map: float
    ap50: Optional[float]
    ap75: Optional[float]
    ar400: float
    per_threshold_ap: tuple[tuple[float, Optional[float]], ...]

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ar400": self.ar400,
            "per_threshold_ap": [[t, ap] for t, ap in self.per_threshold_ap],
        }


def quad_nms(dets: Sequence[DetectionRecord], iou_thresh: float) -> list[DetectionRecord]:
    """Greedy score-descending suppression: a detection is dropped when its
    IoU with an already kept one exceeds the threshold. Ties in score keep
    insertion order."""
    if not (0.0 < iou_thresh < 1.0):
        raise ParameterError(f"NMS threshold must be in (0, 1), got {iou_thresh}")
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    kept: list[int] = []
    kept_flat: list[tuple[float, ...]] = []
    for i in order:
        flat = dets[i].quad.to_flat()
        if all(_kernels.quad_iou(flat, kf) <= iou_thresh for kf in kept_flat):
            kept.append(i)
            kept_flat.append(flat)
    return [dets[i] for i in kept]


def _intersection_over_det(det_quad: QuadBox, region: Sequence) -> float:
    """area(det ∩ region) / area(det); region is any simple polygon."""
    det_pts = det_quad.corners
    det_area = _kernels.polygon_area(det_pts)
    if det_area <= 0.0:
        return 0.0
    region_pts = list(region)
    if not _kernels.is_convex(region_pts):
        region_pts = _kernels.convex_hull(region_pts)
        if len(region_pts) < 3:
            return 0.0
    inter = _kernels.clip_convex(det_pts, region_pts)
    if not inter:
        return 0.0
    return _kernels.polygon_area(inter) / det_area


def match_image(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthRecord],
    iou_thresh: float,
    ignore_regions: Sequence[Polygon] = (),
) -> list[MatchLabel]:
    """Label each detection TP/FP/IGNORED against one image's ground truths.

    Detections are processed in descending score (ties by input order); each
    consumes the unmatched non-ignore ground truth with which it has the
    highest IoU >= threshold. An unmatched detection whose
    intersection-over-detection-area with an ignore-flagged ground truth or
    an ignore region reaches the threshold is IGNORED; otherwise it is FP.
    Labels are returned in the input detection order.
    """
    image_ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(image_ids) > 1:
        raise ParameterError(f"records span multiple images: {sorted(image_ids)}")

    live_gts = [g for g in gts if not g.ignore]
    ignore_polys: list[tuple] = [tuple(g.quad.corners) for g in gts if g.ignore]
    ignore_polys += [tuple(r.vertices) for r in ignore_regions]

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    labels: list[MatchLabel] = [MatchLabel.FP] * len(dets)
    gt_used = [False] * len(live_gts)
    gt_flats = [g.quad.to_flat() for g in live_gts]
    for i in order:
        det_flat = dets[i].quad.to_flat()
        best_iou = 0.0
        best_j = -1
        for j, gflat in enumerate(gt_flats):
            if gt_used[j]:
                continue
            iou = _kernels.quad_iou(det_flat, gflat)
            if iou >= iou_thresh and iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j >= 0:
            gt_used[best_j] = True
            labels[i] = MatchLabel.TP
            continue
        for poly in ignore_polys:
            if _intersection_over_det(dets[i].quad, poly) >= iou_thresh:
                labels[i] = MatchLabel.IGNORED
                break
    return labels


_NO_GT = None  # sentinel: AP undefined (no ground truth, no false positives)


def average_precision(labels: Iterable[bool], num_gt: int) -> Optional[float]:
    """101-point interpolated AP from a score-ordered TP/FP sequence.

    ``labels`` holds True for TP, False for FP, in descending score order.
    Returns 0.0 when there are no ground truths but false positives exist,
    and None (the "no ground truth" sentinel, excluded from threshold means)
    when there is nothing to evaluate at all.
    """
    if num_gt < 0:
        raise ParameterError(f"ground-truth count must be >= 0, got {num_gt}")
    flags = list(labels)
    if num_gt == 0:
        return 0.0 if any(not f for f in flags) else _NO_GT
    tp = 0
    fp = 0
    recalls: list[float] = []
    precisions: list[float] = []
    for is_tp in flags:
        if is_tp:
            tp += 1
        else:
            fp += 1
        recalls.append(tp / num_gt)
        precisions.append(tp / (tp + fp))
    for i in range(len(precisions) - 2, -1, -1):
        if precisions[i + 1] > precisions[i]:
            precisions[i] = precisions[i + 1]
    total = 0.0
    j = 0
    n = len(recalls)
    for k in range(101):
        r = k / 100.0
        while j < n and recalls[j] < r:
            j += 1
        if j < n:
            total += precisions[j]
    return total / 101.0


def g_map(map_origin: float, map_cross: float) -> float:
    """Geometric mean of the origin-domain and cross-domain mAPs."""
    if map_origin < 0 or map_cross < 0:
        raise ParameterError(
            f"mAP values must be non-negative, got {map_origin}, {map_cross}"
        )
    return math.sqrt(map_origin * map_cross)


def evaluate(
    dets: Sequence[DetectionRecord],
    gts: Sequence[GroundTruthRecord],
    thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
    ignore_regions: Sequence[tuple[str, Polygon]] = (),
    max_dets: int = MAX_DETECTIONS_PER_IMAGE,
    threads: int = 1,
) -> EvalResult:
    """COCO-style evaluation over all images jointly.

    Applies the per-image detection cap, matches each image at every IoU
    threshold, pools the surviving detections globally by score, and averages
    the per-threshold APs into mAP. AR400 is the mean over thresholds of the
    final recall under the cap. Detections for images without ground-truth
    entries are evaluated against zero ground truths.
    """
    by_image_dets: dict[str, list[tuple[int, DetectionRecord]]] = {}
    for idx, d in enumerate(dets):
        by_image_dets.setdefault(d.image_id, []).append((idx, d))
    by_image_gts: dict[str, list[GroundTruthRecord]] = {}
    for g in gts:
        by_image_gts.setdefault(g.image_id, []).append(g)
    by_image_ignores: dict[str, list[Polygon]] = {}
    for image_id, poly in ignore_regions:
        by_image_ignores.setdefault(image_id, []).append(poly)

    capped: dict[str, list[tuple[int, DetectionRecord]]] = {}
    for image_id, recs in by_image_dets.items():
        recs = sorted(recs, key=lambda r: (-r[1].score, r[0]))[:max_dets]
        capped[image_id] = recs

    image_ids = sorted(set(capped) | set(by_image_gts))
    num_gt = sum(1 for g in gts if not g.ignore)

    def eval_threshold(thresh: float) -> tuple[Optional[float], float]:
        pooled: list[tuple[float, int, bool]] = []  # (score, input index, is_tp)
        for image_id in image_ids:
            recs = capped.get(image_id, [])
            labels = match_image(
                [r[1] for r in recs],
                by_image_gts.get(image_id, []),
                thresh,
                by_image_ignores.get(image_id, []),
            )
            for (idx, det), label in zip(recs, labels):
                if label is MatchLabel.IGNORED:
                    continue
                pooled.append((det.score, idx, label is MatchLabel.TP))
        pooled.sort(key=lambda r: (-r[0], r[1]))
        flags = [tp for _, _, tp in pooled]
        ap = average_precision(flags, num_gt)
        recall = sum(flags) / num_gt if num_gt else 0.0
        return ap, recall

    if threads > 1 and len(thresholds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(eval_threshold, thresholds))
    else:
        results = [eval_threshold(t) for t in thresholds]

    per_threshold = tuple((t, ap) for t, (ap, _) in zip(thresholds, results))
    valid = [ap for _, ap in per_threshold if ap is not None]
    mean_ap = sum(valid) / len(valid) if valid else 0.0
    ar = sum(r for _, r in results) / len(results) if results else 0.0

    def ap_at(t: float) -> Optional[float]:
        for thr, ap in per_threshold:
            if abs(thr - t) < 1e-9:
                return ap
        return None

    return EvalResult(
        map=mean_ap,
        ap50=ap_at(0.5),
        ap75=ap_at(0.75),
        ar400=ar,
        per_threshold_ap=per_threshold,
    )
