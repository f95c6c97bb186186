"""File formats and dataset statistics.

Formats owned by this module:

* annotation JSON: ``{"images": [{"id", "width", "height"}],
  "annotations": [{"image_id", "quad": [8 floats, tl-first clockwise],
  "ignore": bool}], "ignore_regions": [{"image_id", "polygon": [x1, y1, ...]}]}``
* detection JSON: a top-level array of ``{"image_id", "quad": [8], "score"}``
* text dataset JSON: ``{"split": "gallery"|"query", "products":
  [{"product_id", "category_id", "regions": [{"quad": [8], "legible",
  "transcription"}]}], "vocabulary": [words]}`` (vocabulary optional)
* feature binary (magic ``UTFT``): little-endian header
  ``(magic 4s, version u32, d u32, count u32)`` followed by ``count`` records
  ``(pid_len u32, pid utf-8, visual d*f32, n u32, n * (u f64, v f64, d*f32))``
* vocabulary text: UTF-8, one word per line

Every loader either returns a valid structure or raises DataFormatError with
record context; nothing is silently dropped (coordinate clamping to image
bounds is counted and reported on the dataset).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from unitailkit.detection_eval import DetectionRecord, GroundTruthRecord
from unitailkit.errors import DataFormatError, GeometryError, ParameterError
from unitailkit.geometry import (
    Point2D,
    Polygon,
    QuadBox,
    interior_angle_std,
    shoelace_area,
)
from unitailkit.matching import FeatureSequence, WordFeature
from unitailkit.text_eval import TextRegion, Vocabulary, normalize_transcription

MIN_POSITIVE_AREA = 64.0  # quads below 8x8 px are auto-flagged ignore

FEATURE_MAGIC = b"UTFT"
FEATURE_VERSION = 1

DENSITY_BIN_EDGES = tuple(float(x) for x in range(0, 825, 25))
SCALE_BIN_EDGES = tuple(float(2 ** e) for e in range(4, 12))
ASPECT_BIN_EDGES = tuple(np.geomspace(0.05, 38.0, 25).tolist())


class ImageInfo(NamedTuple):
    image_id: str
    width: float
    height: float


@dataclass(frozen=True)
class DetDataset:
    images: tuple[ImageInfo, ...]
    gts: tuple[GroundTruthRecord, ...]
    ignore_regions: tuple[tuple[str, Polygon], ...] = ()
    clamp_warnings: int = 0


@dataclass(frozen=True)
class OcrProduct:
    product_id: str
    category_id: str
    regions: tuple[TextRegion, ...]


@dataclass(frozen=True)
class OcrDataset:
    products: tuple[OcrProduct, ...]
    split: str
    vocabulary: Optional[Vocabulary] = None

    def __post_init__(self):
        if self.split not in ("gallery", "query"):
            raise DataFormatError(f"split must be 'gallery' or 'query', got {self.split!r}")
        if self.split == "gallery":
            cats: dict[str, str] = {}
            for p in self.products:
                if p.category_id in cats:
                    raise DataFormatError(
                        f"gallery has two products ({cats[p.category_id]!r}, "
                        f"{p.product_id!r}) for category {p.category_id!r}"
                    )
                cats[p.category_id] = p.product_id


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"edges": list(self.edges), "counts": list(self.counts)}


@dataclass(frozen=True)
class DatasetStats:
    density: Histogram
    scale: Histogram
    aspect: Histogram
    density_mean: float
    density_std: float
    mean_angle_std: float
    n_images: int
    n_quads: int
    n_convex_quads: int

    def to_dict(self) -> dict:
        return {
            "density": self.density.to_dict(),
            "scale": self.scale.to_dict(),
            "aspect": self.aspect.to_dict(),
            "density_mean": self.density_mean,
            "density_std": self.density_std,
            "mean_angle_std": self.mean_angle_std,
            "n_images": self.n_images,
            "n_quads": self.n_quads,
            "n_convex_quads": self.n_convex_quads,
        }


def _read_json(path) -> object:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from None


def _quad_from_record(values, where: str) -> QuadBox:
    if not isinstance(values, list) or len(values) != 8:
        n = len(values) if isinstance(values, list) else type(values).__name__
        raise DataFormatError(f"{where}: quad must be a list of 8 numbers, got {n}")
    try:
        coords = [float(v) for v in values]
    except (TypeError, ValueError):
        raise DataFormatError(f"{where}: quad has non-numeric entries") from None
    try:
        return QuadBox.from_flat(coords)
    except GeometryError as exc:
        raise DataFormatError(f"{where}: {exc}") from None


def load_det_annotations(path) -> DetDataset:
    """Load a detection annotation file.

    Quads are clamped into their image bounds (counted in
    ``clamp_warnings``); quads smaller than 8x8 px are flagged ignore.
    """
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise DataFormatError(f"{path}: annotation document must be a JSON object")
    images: list[ImageInfo] = []
    bounds: dict[str, tuple[float, float]] = {}
    for i, rec in enumerate(doc.get("images", [])):
        where = f"images[{i}]"
        if not isinstance(rec, dict) or not {"id", "width", "height"} <= rec.keys():
            raise DataFormatError(f"{where}: needs id, width and height")
        image_id = str(rec["id"])
        if image_id in bounds:
            raise DataFormatError(f"{where}: duplicate image id {image_id!r}")
        w, h = float(rec["width"]), float(rec["height"])
        if w <= 0 or h <= 0:
            raise DataFormatError(f"{where}: non-positive image size {w}x{h}")
        bounds[image_id] = (w, h)
        images.append(ImageInfo(image_id, w, h))

    gts: list[GroundTruthRecord] = []
    clamped = 0
    for i, rec in enumerate(doc.get("annotations", [])):
        where = f"annotations[{i}]"
        if not isinstance(rec, dict) or "image_id" not in rec or "quad" not in rec:
            raise DataFormatError(f"{where}: needs image_id and quad")
        image_id = str(rec["image_id"])
        if image_id not in bounds:
            raise DataFormatError(f"{where}: unknown image id {image_id!r}")
        quad_values = rec["quad"]
        if not isinstance(quad_values, list) or len(quad_values) != 8:
            n = len(quad_values) if isinstance(quad_values, list) else "non-list"
            raise DataFormatError(f"{where}: quad must be a list of 8 numbers, got {n}")
        w, h = bounds[image_id]
        coords = []
        was_clamped = False
        for k, v in enumerate(quad_values):
            try:
                x = float(v)
            except (TypeError, ValueError):
                raise DataFormatError(f"{where}: quad has non-numeric entries") from None
            hi = w if k % 2 == 0 else h
            cl = min(max(x, 0.0), hi)
            was_clamped = was_clamped or (cl != x)
            coords.append(cl)
        clamped += was_clamped
        try:
            quad = QuadBox.from_flat(coords)
        except GeometryError as exc:
            raise DataFormatError(f"{where}: {exc}") from None
        ignore = bool(rec.get("ignore", False))
        if shoelace_area(quad) < MIN_POSITIVE_AREA:
            ignore = True
        gts.append(GroundTruthRecord(image_id, quad, ignore))

    regions: list[tuple[str, Polygon]] = []
    for i, rec in enumerate(doc.get("ignore_regions", [])):
        where = f"ignore_regions[{i}]"
        if not isinstance(rec, dict) or "image_id" not in rec or "polygon" not in rec:
            raise DataFormatError(f"{where}: needs image_id and polygon")
        image_id = str(rec["image_id"])
        if image_id not in bounds:
            raise DataFormatError(f"{where}: unknown image id {image_id!r}")
        flat = rec["polygon"]
        if not isinstance(flat, list) or len(flat) < 6 or len(flat) % 2:
            raise DataFormatError(
                f"{where}: polygon must be a flat list of >= 3 (x, y) pairs"
            )
        try:
            pts = tuple(
                Point2D(float(flat[j]), float(flat[j + 1])) for j in range(0, len(flat), 2)
            )
            regions.append((image_id, Polygon(pts)))
        except (TypeError, ValueError, GeometryError) as exc:
            raise DataFormatError(f"{where}: {exc}") from None

    return DetDataset(tuple(images), tuple(gts), tuple(regions), clamped)


def load_detections(path) -> list[DetectionRecord]:
    """Load a detection result file (JSON array). Scores outside [0, 1] are
    rejected; no per-image cap is applied here."""
    doc = _read_json(path)
    if not isinstance(doc, list):
        raise DataFormatError(f"{path}: detection document must be a JSON array")
    out: list[DetectionRecord] = []
    for i, rec in enumerate(doc):
        where = f"detections[{i}]"
        if not isinstance(rec, dict) or not {"image_id", "quad", "score"} <= rec.keys():
            raise DataFormatError(f"{where}: needs image_id, quad and score")
        try:
            score = float(rec["score"])
        except (TypeError, ValueError):
            raise DataFormatError(f"{where}: score is not numeric") from None
        if not (0.0 <= score <= 1.0):
            raise DataFormatError(f"{where}: score {score} outside [0, 1]")
        quad = _quad_from_record(rec["quad"], where)
        out.append(DetectionRecord(str(rec["image_id"]), quad, score))
    return out


def save_detections(dets: Sequence[DetectionRecord], path) -> None:
    doc = [
        {"image_id": d.image_id, "quad": list(d.quad.to_flat()), "score": d.score}
        for d in dets
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_ocr_dataset(path) -> OcrDataset:
    doc = _read_json(path)
    if not isinstance(doc, dict) or "products" not in doc:
        raise DataFormatError(f"{path}: text dataset must be an object with 'products'")
    split = str(doc.get("split", "query"))
    products: list[OcrProduct] = []
    for i, rec in enumerate(doc["products"]):
        where = f"products[{i}]"
        if not isinstance(rec, dict) or "product_id" not in rec:
            raise DataFormatError(f"{where}: needs product_id")
        regions: list[TextRegion] = []
        for j, reg in enumerate(rec.get("regions", [])):
            rwhere = f"{where}.regions[{j}]"
            if not isinstance(reg, dict) or "quad" not in reg:
                raise DataFormatError(f"{rwhere}: needs quad")
            quad = _quad_from_record(reg["quad"], rwhere)
            legible = bool(reg.get("legible", True))
            raw = str(reg.get("transcription", ""))
            try:
                regions.append(
                    TextRegion(quad, legible, normalize_transcription(raw) if legible else "")
                )
            except ParameterError as exc:
                raise DataFormatError(f"{rwhere}: {exc}") from None
        products.append(
            OcrProduct(str(rec["product_id"]), str(rec.get("category_id", "")), tuple(regions))
        )
    vocab = None
    words = doc.get("vocabulary")
    if words:
        normalized = {normalize_transcription(str(w)) for w in words}
        normalized.discard("")
        if not normalized:
            raise DataFormatError(f"{path}: vocabulary normalizes to nothing")
        vocab = Vocabulary(frozenset(normalized))
    try:
        return OcrDataset(tuple(products), split, vocab)
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def load_vocabulary(path) -> Vocabulary:
    """One word per line; normalized, de-duplicated, blank lines skipped."""
    with open(path, "r", encoding="utf-8") as fh:
        words = {normalize_transcription(line.strip()) for line in fh}
    words.discard("")
    if not words:
        raise DataFormatError(f"{path}: vocabulary file has no usable words")
    return Vocabulary(frozenset(words))


def save_features(
    features: dict[str, tuple[np.ndarray, FeatureSequence]],
    path,
    d: Optional[int] = None,
) -> None:
    """Write the binary feature file (insertion order preserved)."""
    dims = {int(np.asarray(v).size) for v, _ in features.values()}
    dims |= {w.vector.size for _, seq in features.values() for w in seq.items}
    if len(dims) > 1:
        raise DataFormatError(f"inconsistent feature dimensions: {sorted(dims)}")
    if dims:
        if d is not None and d != next(iter(dims)):
            raise DataFormatError(f"declared d={d} but features have d={next(iter(dims))}")
        d = next(iter(dims))
    elif d is None:
        raise DataFormatError("feature dimension required for an empty feature map")

    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, d, len(features)))
        for pid, (visual, seq) in features.items():
            pid_bytes = pid.encode("utf-8")
            fh.write(struct.pack("<I", len(pid_bytes)))
            fh.write(pid_bytes)
            vis = np.asarray(visual, dtype="<f4")
            if vis.size != d:
                raise DataFormatError(
                    f"product {pid!r}: visual vector has {vis.size} dims, expected {d}"
                )
            fh.write(vis.tobytes())
            fh.write(struct.pack("<I", len(seq.items)))
            for w in seq.items:
                fh.write(struct.pack("<dd", w.center[0], w.center[1]))
                fh.write(np.asarray(w.vector, dtype="<f4").tobytes())


def load_features(path) -> dict[str, tuple[np.ndarray, FeatureSequence]]:
    """Read the binary feature file back into product_id -> (visual, words)."""
    with open(path, "rb") as fh:
        blob = fh.read()

    def need(n: int, offset: int, what: str) -> int:
        if offset + n > len(blob):
            raise DataFormatError(f"{path}: truncated file while reading {what}")
        return offset + n

    off = need(4, 0, "magic")
    if blob[:4] != FEATURE_MAGIC:
        raise DataFormatError(
            f"{path}: bad magic {blob[:4]!r}, expected {FEATURE_MAGIC.decode()!r}"
        )
    end = need(12, off, "header")
    version, d, count = struct.unpack("<III", blob[off:end])
    off = end
    if version != FEATURE_VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    if d == 0:
        raise DataFormatError(f"{path}: feature dimension is zero")

    out: dict[str, tuple[np.ndarray, FeatureSequence]] = {}
    for r in range(count):
        end = need(4, off, f"record {r} id length")
        (pid_len,) = struct.unpack("<I", blob[off:end])
        off = end
        end = need(pid_len, off, f"record {r} id")
        pid = blob[off:end].decode("utf-8")
        off = end
        end = need(4 * d, off, f"record {r} visual vector")
        visual = np.frombuffer(blob[off:end], dtype="<f4").astype(np.float64)
        off = end
        end = need(4, off, f"record {r} word count")
        (n,) = struct.unpack("<I", blob[off:end])
        off = end
        words = []
        for k in range(n):
            end = need(16 + 4 * d, off, f"record {r} word {k}")
            u, v = struct.unpack("<dd", blob[off : off + 16])
            vec = np.frombuffer(blob[off + 16 : end], dtype="<f4").astype(np.float64)
            off = end
            words.append(WordFeature(vec, (u, v)))
        if pid in out:
            raise DataFormatError(f"{path}: duplicate product id {pid!r}")
        out[pid] = (visual, FeatureSequence(tuple(words)))
    if off != len(blob):
        raise DataFormatError(f"{path}: {len(blob) - off} trailing bytes after records")
    return out


def _fixed_histogram(values: Sequence[float], edges: Sequence[float]) -> Histogram:
    """Histogram over fixed edges; values are clipped into the edge range so
    the total mass always equals the number of values."""
    arr = np.asarray(values, dtype=np.float64)
    edges_arr = np.asarray(edges, dtype=np.float64)
    if arr.size:
        span = edges_arr[-1] - edges_arr[0]
        clipped = np.clip(arr, edges_arr[0], edges_arr[-1] - 1e-9 * span)
        counts, _ = np.histogram(clipped, bins=edges_arr)
    else:
        counts = np.zeros(len(edges) - 1, dtype=np.int64)
    return Histogram(tuple(float(e) for e in edges), tuple(int(c) for c in counts))


def compute_stats(ds: DetDataset) -> DatasetStats:
    """Instance-density, scale and aspect-ratio histograms plus the mean
    interior-angle standard deviation (over convex quads)."""
    from unitailkit.geometry import aspect_ratio as _aspect

    per_image: dict[str, int] = {im.image_id: 0 for im in ds.images}
    for g in ds.gts:
        per_image[g.image_id] = per_image.get(g.image_id, 0) + 1
    densities = [float(v) for v in per_image.values()]

    scales = []
    aspects = []
    angle_stds = []
    for g in ds.gts:
        scales.append(float(np.sqrt(shoelace_area(g.quad))))
        aspects.append(_aspect(g.quad))
        try:
            angle_stds.append(interior_angle_std(g.quad))
        except GeometryError:
            pass  # non-convex quads carry no angle statistic

    density_mean = float(np.mean(densities)) if densities else 0.0
    density_std = float(np.std(densities)) if densities else 0.0
    return DatasetStats(
        density=_fixed_histogram(densities, DENSITY_BIN_EDGES),
        scale=_fixed_histogram(scales, SCALE_BIN_EDGES),
        aspect=_fixed_histogram(aspects, ASPECT_BIN_EDGES),
        density_mean=density_mean,
        density_std=density_std,
        mean_angle_std=float(np.mean(angle_stds)) if angle_stds else 0.0,
        n_images=len(ds.images),
        n_quads=len(ds.gts),
        n_convex_quads=len(angle_stds),
    )


def load_text_det_predictions(path) -> dict[str, list[QuadBox]]:
    """Text-detection predictions: ``{"products": [{"product_id", "quads": [[8]...]}]}``."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or "products" not in doc:
        raise DataFormatError(f"{path}: predictions must be an object with 'products'")
    out: dict[str, list[QuadBox]] = {}
    for i, rec in enumerate(doc["products"]):
        where = f"products[{i}]"
        if not isinstance(rec, dict) or "product_id" not in rec or "quads" not in rec:
            raise DataFormatError(f"{where}: needs product_id and quads")
        quads = [
            _quad_from_record(q, f"{where}.quads[{j}]") for j, q in enumerate(rec["quads"])
        ]
        out[str(rec["product_id"])] = quads
    return out


def load_text_rec_predictions(path) -> dict[str, list[str]]:
    """Recognition predictions aligned with each product's legible regions:
    ``{"products": [{"product_id", "transcriptions": [...]}]}``. Raw strings
    are normalized on load."""
    doc = _read_json(path)
    if not isinstance(doc, dict) or "products" not in doc:
        raise DataFormatError(f"{path}: predictions must be an object with 'products'")
    out: dict[str, list[str]] = {}
    for i, rec in enumerate(doc["products"]):
        where = f"products[{i}]"
        if not isinstance(rec, dict) or "product_id" not in rec or "transcriptions" not in rec:
            raise DataFormatError(f"{where}: needs product_id and transcriptions")
        out[str(rec["product_id"])] = [
            normalize_transcription(str(t)) for t in rec["transcriptions"]
        ]
    return out
