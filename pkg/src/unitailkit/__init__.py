"""unitailkit: quadrilateral retail-product geometry, anchor-free training
target assignment, detection/OCR evaluation metrics, and text-enhanced
product matching.

The hot kernels (quad IoU, quad-centerness, Hungarian assignment) run from a
compiled extension when available and fall back to a pure-Python
implementation with identical semantics; see ``unitailkit.kernels.backend()``.
"""

from unitailkit.errors import (
    DataFormatError,
    ExteriorPointError,
    GeometryError,
    ParameterError,
    UnitailError,
)
from unitailkit.geometry import (
    Homography,
    Point2D,
    Polygon,
    QuadBox,
    aspect_ratio,
    clip_polygon,
    convex_hull,
    gravity_center,
    interior_angle_std,
    point_edge_distances,
    quad_iou,
    rectify_homography,
    shoelace_area,
    shrink_quad,
    warp_image,
)
from unitailkit.assignment import (
    AssignmentTarget,
    LevelWeight,
    PyramidSpec,
    assign_targets,
    centerness_fcos,
    centerness_quad,
    soft_scale,
)
from unitailkit.detection_eval import (
    DetectionRecord,
    EvalResult,
    GroundTruthRecord,
    MatchLabel,
    average_precision,
    evaluate,
    g_map,
    match_image,
    quad_nms,
)
from unitailkit.text_eval import (
    TextRegion,
    Vocabulary,
    edit_distance,
    ned,
    normalize_transcription,
    text_det_prf,
    vocab_correct,
    word_accuracy,
)
from unitailkit.matching import (
    FeatureSequence,
    GalleryEntry,
    MatchConfig,
    QueryRecord,
    WordFeature,
    add_pe,
    hungarian,
    match_product,
    positional_encoding_2d,
    text_similarity,
    top1_accuracy,
    tune_params,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentTarget",
    "DataFormatError",
    "DetectionRecord",
    "EvalResult",
    "ExteriorPointError",
    "FeatureSequence",
    "GalleryEntry",
    "GeometryError",
    "GroundTruthRecord",
    "Homography",
    "LevelWeight",
    "MatchConfig",
    "MatchLabel",
    "ParameterError",
    "Point2D",
    "Polygon",
    "PyramidSpec",
    "QuadBox",
    "QueryRecord",
    "TextRegion",
    "UnitailError",
    "Vocabulary",
    "WordFeature",
    "add_pe",
    "aspect_ratio",
    "assign_targets",
    "average_precision",
    "centerness_fcos",
    "centerness_quad",
    "clip_polygon",
    "convex_hull",
    "edit_distance",
    "evaluate",
    "g_map",
    "gravity_center",
    "hungarian",
    "interior_angle_std",
    "match_image",
    "match_product",
    "ned",
    "normalize_transcription",
    "point_edge_distances",
    "positional_encoding_2d",
    "quad_iou",
    "quad_nms",
    "rectify_homography",
    "shoelace_area",
    "shrink_quad",
    "soft_scale",
    "text_det_prf",
    "text_similarity",
    "top1_accuracy",
    "tune_params",
    "vocab_correct",
    "warp_image",
    "word_accuracy",
]
