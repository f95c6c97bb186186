"""Text detection and recognition metrics: precision/recall/hmean over
quadrilateral text regions, edit distance and its normalized average, word
accuracy, transcription normalization, and vocabulary correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from unitailkit import _kernels
from unitailkit.errors import ParameterError
from unitailkit.geometry import QuadBox

_ALPHABET = frozenset("0123456789abcdefghijklmnopqrstuvwxyz")


def normalize_transcription(raw: str) -> str:
    """Lowercase and strip everything outside the 0-9/a-z alphabet."""
    return "".join(ch for ch in raw.lower() if ch in _ALPHABET)


@dataclass(frozen=True)
class TextRegion:
    """A word-level text box; illegible regions carry no transcription."""

    quad: QuadBox
    legible: bool
    transcription: str = ""

    def __post_init__(self):
        if self.legible:
            if not self.transcription:
                raise ParameterError("legible text region needs a transcription")
            if normalize_transcription(self.transcription) != self.transcription:
                raise ParameterError(
                    f"transcription {self.transcription!r} is not normalized"
                )
        elif self.transcription:
            raise ParameterError("illegible text region must have empty transcription")


@dataclass(frozen=True)
class Vocabulary:
    words: frozenset[str]

    def __post_init__(self):
        if not self.words:
            raise ParameterError("vocabulary is empty")
        for w in self.words:
            if not w or normalize_transcription(w) != w:
                raise ParameterError(f"vocabulary word {w!r} is not normalized")

    def __contains__(self, word: str) -> bool:
        return word in self.words


def match_text_counts(
    preds: Sequence[QuadBox],
    gts: Sequence[TextRegion],
    iou_thresh: float = 0.5,
) -> tuple[int, int, int]:
    """(matched, counted predictions, legible ground truths) for one product.

    Predictions whose intersection-over-prediction-area with an illegible
    (don't-care) region reaches the threshold are excluded from the counts.
    The remaining predictions are matched one-to-one to legible ground truths
    greedily by descending IoU among pairs at or above the threshold.
    Predictions are ordered canonically by their coordinates first, so the
    result does not depend on input order.
    """
    ordered = sorted(preds, key=lambda q: q.to_flat())
    legible = [g for g in gts if g.legible]
    dontcare = [tuple(g.quad.corners) for g in gts if not g.legible]

    kept: list[QuadBox] = []
    for p in ordered:
        p_pts = p.corners
        p_area = _kernels.polygon_area(p_pts)
        excluded = False
        for dc in dontcare:
            inter = _kernels.clip_convex(p_pts, dc)
            if inter and p_area > 0.0:
                if _kernels.polygon_area(inter) / p_area >= iou_thresh:
                    excluded = True
                    break
        if not excluded:
            kept.append(p)

    pairs: list[tuple[float, int, int]] = []
    for pi, p in enumerate(kept):
        p_flat = p.to_flat()
        for gi, g in enumerate(legible):
            iou = _kernels.quad_iou(p_flat, g.quad.to_flat())
            if iou >= iou_thresh:
                pairs.append((iou, pi, gi))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    pred_used = [False] * len(kept)
    gt_used = [False] * len(legible)
    matched = 0
    for _, pi, gi in pairs:
        if not pred_used[pi] and not gt_used[gi]:
            pred_used[pi] = True
            gt_used[gi] = True
            matched += 1
    return matched, len(kept), len(legible)


def text_det_prf(
    preds: Sequence[QuadBox],
    gts: Sequence[TextRegion],
    iou_thresh: float = 0.5,
) -> tuple[float, float, float]:
    """(precision, recall, hmean) with illegible regions as don't-care.

    Precision is 0 by convention when no prediction survives don't-care
    filtering; hmean is 0 when precision + recall is 0.
    """
    tp, n_pred, n_gt = match_text_counts(preds, gts, iou_thresh)
    return prf_from_counts(tp, n_pred, n_gt)


def prf_from_counts(tp: int, n_pred: int, n_gt: int) -> tuple[float, float, float]:
    precision = tp / n_pred if n_pred else 0.0
    recall = tp / n_gt if n_gt else 0.0
    hmean = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, hmean


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i] + [0] * len(b)
        for j, cb in enumerate(b, start=1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (ca != cb),
            )
        prev = cur
    return prev[-1]


def ned(pairs: Iterable[tuple[str, str]], denominator: str = "max") -> float:
    """Mean normalized edit distance over (prediction, ground truth) pairs.

    ``denominator`` selects the normalizer: "max" (default) divides by the
    longer of the two strings, "gt" by the ground-truth length; both floor
    the denominator at 1. Empty input yields 0.
    """
    if denominator not in ("max", "gt"):
        raise ParameterError(f"denominator must be 'max' or 'gt', got {denominator!r}")
    total = 0.0
    count = 0
    for pred, gt in pairs:
        if denominator == "max":
            denom = max(len(pred), len(gt), 1)
        else:
            denom = max(len(gt), 1)
        total += edit_distance(pred, gt) / denom
        count += 1
    return total / count if count else 0.0


def word_accuracy(pairs: Iterable[tuple[str, str]]) -> float:
    """Fraction of pairs with exact string equality; 1 on empty input."""
    total = 0
    hits = 0
    for pred, gt in pairs:
        total += 1
        hits += pred == gt
    return hits / total if total else 1.0


def vocab_correct(pred: str, vocab: Vocabulary) -> str:
    """Snap a prediction to the vocabulary word at minimum edit distance.

    A prediction already in the vocabulary is returned unchanged; distance
    ties resolve to the lexicographically smallest word.
    """
    if pred in vocab:
        return pred
    best_word = None
    best_dist = None
    for word in sorted(vocab.words):
        d = edit_distance(pred, word)
        if best_dist is None or d < best_dist:
            best_dist = d
            best_word = word
    assert best_word is not None
    return best_word
