"""Command-line entry point.

Subcommands: eval-det, eval-text-det, eval-text-rec, match, tune, stats,
assign, nms, rectify, kernel. Results go to stdout as canonical JSON (sorted
keys, 6-significant-digit floats) so identical inputs always produce
byte-identical output; diagnostics go to stderr. Exit codes: 0 success,
1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from unitailkit import _jsonout, _kernels
from unitailkit.assignment import PyramidSpec, assign_targets, soft_scale
from unitailkit.dataset_io import (
    compute_stats,
    load_det_annotations,
    load_detections,
    load_features,
    load_ocr_dataset,
    load_text_det_predictions,
    load_text_rec_predictions,
    load_vocabulary,
)
from unitailkit.detection_eval import (
    MAX_DETECTIONS_PER_IMAGE,
    evaluate,
    g_map,
    quad_nms,
)
from unitailkit.errors import DataFormatError, ParameterError, UnitailError
from unitailkit.geometry import QuadBox, rectify_homography, warp_image
from unitailkit.matching import (
    GalleryEntry,
    MatchConfig,
    QueryRecord,
    add_pe,
    match_product,
    top1_accuracy,
    tune_params,
)
from unitailkit.text_eval import match_text_counts, ned, prf_from_counts, vocab_correct, word_accuracy


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _default_threads() -> int:
    env = os.environ.get("UNITAIL_THREADS", "").strip()
    if env:
        try:
            n = int(env)
            if n >= 1:
                return n
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parse_thresholds(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        try:
            start, step, stop = (float(v) for v in text.split(":"))
        except ValueError:
            raise UsageError(f"bad threshold range {text!r}, expected start:step:stop")
        if step <= 0 or stop < start:
            raise UsageError(f"bad threshold range {text!r}")
        out = []
        t = start
        while t <= stop + 1e-9:
            out.append(round(t, 10))
            t += step
        return tuple(out)
    try:
        return tuple(round(float(v), 10) for v in text.split(","))
    except ValueError:
        raise UsageError(f"bad threshold list {text!r}")


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"bad grid {text!r}, expected comma-separated numbers")


def _emit(obj, fmt: str) -> None:
    if fmt == "table":
        _print_table(obj)
    else:
        sys.stdout.write(_jsonout.dumps(obj) + "\n")


def _print_table(obj, indent: str = "") -> None:
    if isinstance(obj, dict):
        for key in sorted(obj):
            value = obj[key]
            if isinstance(value, (dict, list, tuple)):
                sys.stdout.write(f"{indent}{key}:\n")
                _print_table(value, indent + "  ")
            else:
                sys.stdout.write(f"{indent}{key}: {_scalar(value)}\n")
    elif isinstance(obj, (list, tuple)):
        for value in obj:
            if isinstance(value, (dict, list, tuple)):
                _print_table(value, indent + "  ")
            else:
                sys.stdout.write(f"{indent}- {_scalar(value)}\n")
    else:
        sys.stdout.write(f"{indent}{_scalar(obj)}\n")


def _scalar(value) -> str:
    if isinstance(value, float):
        return _jsonout.format_float(value)
    if value is None:
        return "null"
    return str(value)


# ---------------------------------------------------------------- eval-det


def _cmd_eval_det(args) -> int:
    ds = load_det_annotations(args.gt)
    dets = load_detections(args.det)
    thresholds = _parse_thresholds(args.thresholds)
    result = evaluate(
        dets,
        list(ds.gts),
        thresholds,
        ignore_regions=list(ds.ignore_regions),
        max_dets=args.max_dets,
        threads=args.threads,
    )
    if ds.clamp_warnings:
        sys.stderr.write(f"warning: clamped {ds.clamp_warnings} quads to image bounds\n")
    if args.cross_gt or args.cross_det:
        if not (args.cross_gt and args.cross_det):
            raise UsageError("--cross-gt and --cross-det must be given together")
        cds = load_det_annotations(args.cross_gt)
        cdets = load_detections(args.cross_det)
        cross = evaluate(
            cdets,
            list(cds.gts),
            thresholds,
            ignore_regions=list(cds.ignore_regions),
            max_dets=args.max_dets,
            threads=args.threads,
        )
        _emit(
            {
                "origin": result.to_dict(),
                "cross": cross.to_dict(),
                "g_map": g_map(result.map, cross.map),
            },
            args.format,
        )
    else:
        _emit(result.to_dict(), args.format)
    return 0


# ----------------------------------------------------------- eval-text-det


def _cmd_eval_text_det(args) -> int:
    ds = load_ocr_dataset(args.gt)
    preds = load_text_det_predictions(args.pred)
    tp = n_pred = n_gt = 0
    for product in ds.products:
        m, p, g = match_text_counts(
            preds.get(product.product_id, []), list(product.regions), args.iou
        )
        tp += m
        n_pred += p
        n_gt += g
    precision, recall, hmean = prf_from_counts(tp, n_pred, n_gt)
    _emit(
        {
            "precision": precision,
            "recall": recall,
            "hmean": hmean,
            "matched": tp,
            "predictions": n_pred,
            "ground_truths": n_gt,
        },
        args.format,
    )
    return 0


# ----------------------------------------------------------- eval-text-rec


def _cmd_eval_text_rec(args) -> int:
    ds = load_ocr_dataset(args.gt)
    preds = load_text_rec_predictions(args.pred)
    vocab = None
    if args.vocab:
        vocab = load_vocabulary(args.vocab)
    elif ds.vocabulary and args.use_dataset_vocab:
        vocab = ds.vocabulary
    pairs = []
    for product in ds.products:
        legible = [r.transcription for r in product.regions if r.legible]
        got = preds.get(product.product_id, [])
        if len(got) != len(legible):
            raise DataFormatError(
                f"product {product.product_id!r}: {len(got)} transcriptions for "
                f"{len(legible)} legible regions"
            )
        for pred, gt in zip(got, legible):
            if vocab is not None:
                pred = vocab_correct(pred, vocab)
            pairs.append((pred, gt))
    _emit(
        {
            "ned": ned(pairs, denominator=args.ned_norm),
            "word_accuracy": word_accuracy(pairs),
            "pairs": len(pairs),
        },
        args.format,
    )
    return 0


# ------------------------------------------------------------ match / tune


def _load_matching_sets(args):
    gallery_ds = load_ocr_dataset(args.gallery_meta)
    query_ds = load_ocr_dataset(args.query_meta)
    gallery_feats = load_features(args.gallery_features)
    query_feats = load_features(args.query_features)

    gallery = []
    for product in gallery_ds.products:
        if product.product_id not in gallery_feats:
            raise DataFormatError(f"gallery product {product.product_id!r} has no features")
        visual, seq = gallery_feats[product.product_id]
        gallery.append(GalleryEntry(product.category_id, visual, add_pe(seq)))

    queries = []
    query_ids = []
    for product in query_ds.products:
        if product.product_id not in query_feats:
            raise DataFormatError(f"query product {product.product_id!r} has no features")
        visual, seq = query_feats[product.product_id]
        queries.append(
            QueryRecord(visual, add_pe(seq), truth=product.category_id or None)
        )
        query_ids.append(product.product_id)
    return gallery, queries, query_ids


def _cmd_match(args) -> int:
    gallery, queries, query_ids = _load_matching_sets(args)
    cfg = MatchConfig(t=args.t, w=args.w)
    matches = []
    hits = 0
    labeled = 0
    for pid, q in zip(query_ids, queries):
        predicted = match_product(q, gallery, cfg, args.normalize_text)
        matches.append({"product_id": pid, "predicted": predicted, "truth": q.truth})
        if q.truth is not None:
            labeled += 1
            hits += predicted == q.truth
    out = {"matches": matches}
    if labeled:
        out["top1_accuracy"] = hits / labeled
    _emit(out, args.format)
    return 0


def _cmd_tune(args) -> int:
    gallery, queries, _ = _load_matching_sets(args)
    if any(q.truth is None for q in queries):
        raise DataFormatError("tuning requires category labels on every query")
    t, w = tune_params(
        queries, gallery, _parse_grid(args.t_grid), _parse_grid(args.w_grid),
        threads=args.threads,
    )
    acc = top1_accuracy(queries, gallery, MatchConfig(t=t, w=w), threads=args.threads)
    _emit({"t": t, "w": w, "top1_accuracy": acc}, args.format)
    return 0


# ------------------------------------------------------------------- stats


def _cmd_stats(args) -> int:
    ds = load_det_annotations(args.gt)
    _emit(compute_stats(ds).to_dict(), args.format)
    return 0


# ------------------------------------------------------------------ assign


def _cmd_assign(args) -> int:
    ds = load_det_annotations(args.gt)
    spec = PyramidSpec(args.min_level, args.max_level, args.l_org, args.pretrain_size)
    sizes = {im.image_id: (im.width, im.height) for im in ds.images}
    by_image: dict[str, list] = {im.image_id: [] for im in ds.images}
    for g in ds.gts:
        if not g.ignore:
            by_image[g.image_id].append(g.quad)
    records = []
    for image_id in sorted(by_image):
        quads = by_image[image_id]
        if not quads:
            continue
        w, h = sizes[image_id]
        for t in assign_targets(quads, spec, w, h, args.alpha):
            records.append(
                {
                    "image_id": image_id,
                    "level": t.level,
                    "grid_y": t.grid_y,
                    "grid_x": t.grid_x,
                    "weight": t.weight,
                    "offsets": list(t.offsets),
                    "gt_index": t.gt_index,
                }
            )
    _emit({"targets": records}, args.format)
    return 0


# --------------------------------------------------------------------- nms


def _cmd_nms(args) -> int:
    dets = load_detections(args.det)
    by_image: dict[str, list] = {}
    for d in dets:
        by_image.setdefault(d.image_id, []).append(d)
    out = []
    for image_id in sorted(by_image):
        for d in quad_nms(by_image[image_id], args.iou):
            out.append(
                {"image_id": d.image_id, "quad": list(d.quad.to_flat()), "score": d.score}
            )
    _emit(out, args.format)
    return 0


# ----------------------------------------------------------------- rectify


def _cmd_rectify(args) -> int:
    with open(args.image, "rb") as fh:
        buf = fh.read()
    doc = json.loads(Path(args.quads).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or "quads" not in doc:
        raise DataFormatError(f"{args.quads}: expected an object with 'quads'")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    crops = []
    for i, flat in enumerate(doc["quads"]):
        quad = QuadBox.from_flat([float(v) for v in flat])
        hom = rectify_homography(quad, args.out_w, args.out_h)
        warped = warp_image(buf, args.width, args.height, hom, args.out_w, args.out_h)
        name = f"crop_{i:03d}.rgb"
        (out_dir / name).write_bytes(warped)
        crops.append(
            {"index": i, "path": name, "width": args.out_w, "height": args.out_h}
        )
    _emit({"crops": crops, "out_dir": str(out_dir)}, args.format)
    return 0


# ------------------------------------------------------------------ kernel


def _kernel_spec(obj) -> PyramidSpec:
    if not obj:
        return PyramidSpec()
    return PyramidSpec(
        int(obj.get("min_level", 3)),
        int(obj.get("max_level", 7)),
        int(obj.get("l_org", 5)),
        float(obj.get("pretrain_size", 224.0)),
    )


def _finite(arr: np.ndarray, what: str) -> np.ndarray:
    if arr.size and not np.isfinite(arr).all():
        raise ParameterError(f"{what} has non-finite entries")
    return arr


def _kernel_dispatch(request: dict):
    op = request.get("op")
    if op == "backend":
        return _kernels.BACKEND
    if op == "quad_iou":
        return _kernels.quad_iou(
            [float(v) for v in request["a"]], [float(v) for v in request["b"]]
        )
    if op == "batch_quad_iou":
        a = _finite(np.asarray(request["a"], dtype=np.float64), "a")
        b = _finite(np.asarray(request["b"], dtype=np.float64), "b")
        if a.ndim != 2 or a.shape[1] != 8 or b.ndim != 2 or b.shape[1] != 8:
            raise ParameterError(
                f"quad arrays must be Nx8, got {a.shape} and {b.shape}"
            )
        return np.asarray(_kernels.batch_quad_iou(a, b), dtype=np.float64).tolist()
    if op == "centerness":
        p = request["point"]
        return _kernels.centerness_quad(
            float(p[0]), float(p[1]), [float(v) for v in request["quad"]]
        )
    if op == "batch_centerness":
        pts = _finite(np.asarray(request["points"], dtype=np.float64), "points")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ParameterError(f"points must be Mx2, got {pts.shape}")
        out = _kernels.batch_centerness(pts, [float(v) for v in request["quad"]])
        return np.asarray(out, dtype=np.float64).tolist()
    if op == "soft_scale":
        spec = _kernel_spec(request.get("spec"))
        if "areas" in request:
            return [
                [[lw.level, lw.factor] for lw in soft_scale(float(a), spec)]
                for a in request["areas"]
            ]
        return [[lw.level, lw.factor] for lw in soft_scale(float(request["area"]), spec)]
    if op == "assign_targets":
        spec = _kernel_spec(request.get("spec"))
        quads = [QuadBox.from_flat([float(v) for v in q]) for q in request["quads"]]
        targets = assign_targets(
            quads,
            spec,
            float(request["image_w"]),
            float(request["image_h"]),
            float(request.get("alpha", 0.3)),
        )
        return [
            {
                "level": t.level,
                "grid_y": t.grid_y,
                "grid_x": t.grid_x,
                "weight": t.weight,
                "offsets": list(t.offsets),
                "gt_index": t.gt_index,
            }
            for t in targets
        ]
    if op == "hungarian":
        cost = _finite(np.asarray(request["cost"], dtype=np.float64), "cost matrix")
        if cost.size == 0:
            return []
        if cost.ndim != 2:
            raise ParameterError(f"cost matrix must be 2D, got shape {cost.shape}")
        return [[int(i), int(j)] for i, j in _kernels.hungarian(cost)]
    raise ParameterError(f"unknown kernel op {op!r}")


def _cmd_kernel(args) -> int:
    """Line protocol: one JSON request per line on stdin, one full-precision
    JSON response per line on stdout. Used by out-of-process bindings."""
    stream = sys.stdin
    for line in stream:
        line = line.strip()
        if not line:
            continue
        rid = None
        try:
            request = json.loads(line)
            rid = request.get("id")
            result = _kernel_dispatch(request)
            response = {"id": rid, "ok": True, "result": result}
        except Exception as exc:  # error details cross the process boundary
            response = {"id": rid, "ok": False, "error": f"{type(exc).__name__}: {exc}"}
        sys.stdout.write(json.dumps(response) + "\n")
        sys.stdout.flush()
        if args.once:
            break
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> _Parser:
    parser = _Parser(prog="unitailkit", description=__doc__)
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (default: UNITAIL_THREADS or machine parallelism)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("json", "table"), default="json")

    p = sub.add_parser("eval-det", help="COCO-style quad detection evaluation")
    p.add_argument("--gt", required=True)
    p.add_argument("--det", required=True)
    p.add_argument("--cross-gt")
    p.add_argument("--cross-det")
    p.add_argument("--thresholds", default="0.5:0.05:0.95")
    p.add_argument("--max-dets", type=int, default=MAX_DETECTIONS_PER_IMAGE)
    common(p)
    p.set_defaults(func=_cmd_eval_det)

    p = sub.add_parser("eval-text-det", help="text detection precision/recall/hmean")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    common(p)
    p.set_defaults(func=_cmd_eval_text_det)

    p = sub.add_parser("eval-text-rec", help="text recognition NED and word accuracy")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--vocab")
    p.add_argument("--use-dataset-vocab", action="store_true")
    p.add_argument("--ned-norm", choices=("max", "gt"), default="max")
    common(p)
    p.set_defaults(func=_cmd_eval_text_rec)

    p = sub.add_parser("match", help="match queries against a one-shot gallery")
    p.add_argument("--gallery-meta", required=True)
    p.add_argument("--gallery-features", required=True)
    p.add_argument("--query-meta", required=True)
    p.add_argument("--query-features", required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--w", type=float, default=0.5)
    p.add_argument("--normalize-text", action="store_true")
    common(p)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("tune", help="grid-search the (t, w) decision parameters")
    p.add_argument("--gallery-meta", required=True)
    p.add_argument("--gallery-features", required=True)
    p.add_argument("--query-meta", required=True)
    p.add_argument("--query-features", required=True)
    p.add_argument("--t-grid", required=True)
    p.add_argument("--w-grid", required=True)
    common(p)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("stats", help="dataset statistics histograms")
    p.add_argument("--gt", required=True)
    common(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("assign", help="dump per-pixel training targets")
    p.add_argument("--gt", required=True)
    p.add_argument("--alpha", type=float, default=0.3)
    p.add_argument("--min-level", type=int, default=3)
    p.add_argument("--max-level", type=int, default=7)
    p.add_argument("--l-org", type=int, default=5)
    p.add_argument("--pretrain-size", type=float, default=224.0)
    common(p)
    p.set_defaults(func=_cmd_assign)

    p = sub.add_parser("nms", help="per-image greedy quad NMS")
    p.add_argument("--det", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    common(p)
    p.set_defaults(func=_cmd_nms)

    p = sub.add_parser("rectify", help="warp quads out of a raw RGB buffer")
    p.add_argument("--image", required=True, help="raw tightly packed RGB file")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--quads", required=True, help='JSON {"quads": [[8 floats]...]}')
    p.add_argument("--out-w", type=int, required=True)
    p.add_argument("--out-h", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    common(p)
    p.set_defaults(func=_cmd_rectify)

    p = sub.add_parser("kernel", help="JSON-lines kernel server for bindings")
    p.add_argument("--once", action="store_true", help="answer one request and exit")
    p.set_defaults(func=_cmd_kernel)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except FileNotFoundError as exc:
        sys.stderr.write(f"data error: no such file: {exc.filename or exc}\n")
        return 2
    except (DataFormatError, UnitailError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
