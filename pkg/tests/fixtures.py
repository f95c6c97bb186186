"""Hand-derived evaluation fixtures shared across test modules.

Micro-fixture (2 images, 3 ground truths, 4 detections):

* img1 gt1 = rect(0,0,10,10); det d1 matches it exactly (IoU 1.0, score 0.9)
* img1 gt2 = rect(20,20,30,30); det d2 = rect(20,20,30,26) has IoU 0.6
  (inter 60, union 100), score 0.8
* img2 gt3 = rect(0,0,10,10); det d3 = rect(0,2,10,10) has IoU 0.8
  (inter 80, union 100), score 0.7
* img2 d4 = rect(40,40,50,50) matches nothing (score 0.6)

Hand-derived 101-point COCO sweep at thresholds 0.50:0.05:0.95:

* t in {0.50, 0.55, 0.60}: labels by score [TP, TP, TP, FP] -> AP = 1
* t in {0.65..0.80}: [TP, FP, TP, FP] -> 34 points at 1, 33 at 2/3 -> 56/101
* t in {0.85..0.95}: [TP, FP, FP, FP] -> 34 points at 1 -> 34/101

mAP = (3 + 4*56/101 + 3*34/101) / 10 = 629/1010
AP50 = 1, AP75 = 56/101, AR400 = (3*1 + 4*(2/3) + 3*(1/3)) / 10 = 2/3
"""

from __future__ import annotations

from unitailkit.detection_eval import DetectionRecord, GroundTruthRecord
from unitailkit.geometry import QuadBox


def _rect(x0, y0, x1, y1) -> QuadBox:
    return QuadBox.from_flat([x0, y0, x1, y0, x1, y1, x0, y1])


MICRO_MAP = 629.0 / 1010.0
MICRO_AP50 = 1.0
MICRO_AP75 = 56.0 / 101.0
MICRO_AR = 2.0 / 3.0


def micro_fixture() -> tuple[list[DetectionRecord], list[GroundTruthRecord]]:
    gts = [
        GroundTruthRecord("img1", _rect(0, 0, 10, 10)),
        GroundTruthRecord("img1", _rect(20, 20, 30, 30)),
        GroundTruthRecord("img2", _rect(0, 0, 10, 10)),
    ]
    dets = [
        DetectionRecord("img1", _rect(0, 0, 10, 10), 0.9),
        DetectionRecord("img1", _rect(20, 20, 30, 26), 0.8),
        DetectionRecord("img2", _rect(0, 2, 10, 10), 0.7),
        DetectionRecord("img2", _rect(40, 40, 50, 50), 0.6),
    ]
    return dets, gts


def micro_fixture_json() -> tuple[dict, list]:
    """The same fixture in the annotation/detection file schemas."""
    gt_doc = {
        "images": [
            {"id": "img1", "width": 100, "height": 100},
            {"id": "img2", "width": 100, "height": 100},
        ],
        "annotations": [
            {"image_id": "img1", "quad": [0, 0, 10, 0, 10, 10, 0, 10]},
            {"image_id": "img1", "quad": [20, 20, 30, 20, 30, 30, 20, 30]},
            {"image_id": "img2", "quad": [0, 0, 10, 0, 10, 10, 0, 10]},
        ],
    }
    det_doc = [
        {"image_id": "img1", "quad": [0, 0, 10, 0, 10, 10, 0, 10], "score": 0.9},
        {"image_id": "img1", "quad": [20, 20, 30, 20, 30, 26, 20, 26], "score": 0.8},
        {"image_id": "img2", "quad": [0, 2, 10, 2, 10, 10, 0, 10], "score": 0.7},
        {"image_id": "img2", "quad": [40, 40, 50, 40, 50, 50, 40, 50], "score": 0.6},
    ]
    return gt_doc, det_doc


# Published benchmark table: (method, g-mAP, origin mAP, cross mAP)
TABLE1_ROWS = [
    ("FCENet", 32.0, 36.8, 27.9),
    ("PANet", 35.0, 40.5, 30.3),
    ("PSENet", 39.4, 45.3, 34.4),
    ("DBNet", 45.3, 51.0, 40.3),
    ("RIDet", 45.7, 51.2, 40.8),
    ("GlidingVertex", 46.0, 52.3, 40.5),
    ("RSDet", 46.1, 51.4, 41.4),
    ("MaskRCNN", 52.4, 57.3, 48.0),
    ("RetailDet-R50", 54.7, 58.7, 50.9),
    ("RetailDet-R101", 57.1, 60.3, 54.1),
]
