"""Text-enhanced product matching: 2D positional encoding, optimal-assignment
textual similarity between variable-length word-feature sequences, the
combined visual/textual decision rule, top-1 accuracy, and (t, w) tuning.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from unitailkit import _kernels
from unitailkit.errors import ParameterError

_PE_TEMPERATURE = 10000.0
_PE_SCALE = 2.0 * math.pi


def positional_encoding_2d(center: Sequence[float], d: int) -> np.ndarray:
    """Sinusoidal 2D positional encoding of a normalized (u, v) position.

    The first d/2 entries encode u and the last d/2 encode v; within each
    half, consecutive entry pairs hold (sin, cos) of position * 2*pi scaled
    by the temperature-10000 frequency ladder 1 / T^(4i/d).
    """
    if d <= 0 or d % 4 != 0:
        raise ParameterError(f"encoding width must be a positive multiple of 4, got {d}")
    u, v = float(center[0]), float(center[1])
    if not (0.0 <= u <= 1.0 and 0.0 <= v <= 1.0):
        raise ParameterError(f"center must be normalized to [0, 1]^2, got ({u}, {v})")
    quarter = d // 4
    out = np.empty(d, dtype=np.float64)
    for i in range(quarter):
        freq = _PE_TEMPERATURE ** (-4.0 * i / d)
        pu = u * _PE_SCALE * freq
        pv = v * _PE_SCALE * freq
        out[2 * i] = math.sin(pu)
        out[2 * i + 1] = math.cos(pu)
        out[d // 2 + 2 * i] = math.sin(pv)
        out[d // 2 + 2 * i + 1] = math.cos(pv)
    return out


@dataclass(frozen=True)
class WordFeature:
    """One recognized word: its recognizer feature vector and the normalized
    (u, v) center of its box within the product crop."""

    vector: np.ndarray
    center: tuple[float, float]

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ParameterError("word feature vector must be a non-empty 1D array")
        if not np.isfinite(vec).all():
            raise ParameterError("word feature vector has non-finite entries")
        if not np.any(vec != 0.0):
            raise ParameterError("word feature vector must be non-zero")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))


@dataclass(frozen=True)
class FeatureSequence:
    """Variable-length sequence of word features for one product."""

    items: tuple[WordFeature, ...] = ()
    pe_applied: bool = False

    def __post_init__(self):
        items = tuple(self.items)
        dims = {w.vector.size for w in items}
        if len(dims) > 1:
            raise ParameterError(f"mixed feature dimensions in sequence: {sorted(dims)}")
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def dim(self) -> Optional[int]:
        return self.items[0].vector.size if self.items else None


def add_pe(s: FeatureSequence) -> FeatureSequence:
    """Add each word's positional encoding to its feature vector.

    Guarded against double application; centers are preserved.
    """
    if s.pe_applied:
        raise ParameterError("positional encoding was already applied to this sequence")
    if not s.items:
        return FeatureSequence((), pe_applied=True)
    d = s.dim
    assert d is not None
    items = tuple(
        WordFeature(w.vector + positional_encoding_2d(w.center, d), w.center)
        for w in s.items
    )
    return FeatureSequence(items, pe_applied=True)


@dataclass(frozen=True)
class GalleryEntry:
    category_id: str
    visual: np.ndarray
    texts: FeatureSequence = field(default_factory=FeatureSequence)

    def __post_init__(self):
        object.__setattr__(self, "visual", _check_visual(self.visual))


@dataclass(frozen=True)
class QueryRecord:
    visual: np.ndarray
    texts: FeatureSequence = field(default_factory=FeatureSequence)
    truth: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "visual", _check_visual(self.visual))


def _check_visual(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ParameterError("visual feature must be a non-empty 1D array")
    if not np.isfinite(v).all() or not np.any(v != 0.0):
        raise ParameterError("visual feature must be finite and non-zero")
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class MatchConfig:
    """Decision-rule parameters: visual-gap threshold t, text weight w, and
    the positional-encoding width (must equal the word-feature dimension)."""

    t: float = 0.0
    w: float = 0.5
    d_pe: Optional[int] = None

    def __post_init__(self):
        if self.t < 0:
            raise ParameterError(f"threshold t must be >= 0, got {self.t}")
        if not (0.0 <= self.w <= 1.0):
            raise ParameterError(f"weight w must be in [0, 1], got {self.w}")
        if self.d_pe is not None and (self.d_pe <= 0 or self.d_pe % 4):
            raise ParameterError(f"d_pe must be a positive multiple of 4, got {self.d_pe}")


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost assignment of a rectangular matrix; exactly min(n, m)
    disjoint (row, col) pairs at the global minimum total cost."""
    arr = np.asarray(cost, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f"cost matrix must be 2D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ParameterError("cost matrix has non-finite entries")
    return _kernels.hungarian(arr)


def _cosine_matrix(sp: FeatureSequence, sg: FeatureSequence) -> np.ndarray:
    a = np.stack([w.vector for w in sp.items])
    b = np.stack([w.vector for w in sg.items])
    na = np.linalg.norm(a, axis=1, keepdims=True)
    nb = np.linalg.norm(b, axis=1, keepdims=True)
    return (a / na) @ (b / nb).T


def text_similarity(
    sp: FeatureSequence, sg: FeatureSequence, normalize: bool = False
) -> float:
    """Maximum total cosine similarity over one-to-one word assignments.

    Solved as a minimum-cost assignment on the negated cosine matrix, so the
    matching always has size min(n, m). Returns 0 when either sequence is
    empty. With ``normalize`` the sum is divided by min(n, m).
    """
    if not sp.items or not sg.items:
        return 0.0
    if sp.dim != sg.dim:
        raise ParameterError(f"feature dimensions differ: {sp.dim} vs {sg.dim}")
    cos = _cosine_matrix(sp, sg)
    pairs = _kernels.hungarian(-cos)
    total = float(sum(cos[i, j] for i, j in pairs))
    if normalize:
        total /= min(len(sp), len(sg))
    return total


def _visual_ranking(q: QueryRecord, gallery: Sequence[GalleryEntry]) -> list[tuple[float, str, int]]:
    qv = q.visual / np.linalg.norm(q.visual)
    sims = []
    for idx, g in enumerate(gallery):
        gv = g.visual / np.linalg.norm(g.visual)
        sims.append((float(qv @ gv), g.category_id, idx))
    # ties resolve by category id so gallery order never matters
    sims.sort(key=lambda s: (-s[0], s[1]))
    return sims


def match_product(
    q: QueryRecord,
    gallery: Sequence[GalleryEntry],
    cfg: MatchConfig,
    normalize_text: bool = False,
) -> str:
    """Pick a gallery category for one query.

    The visual top-1 wins outright when its cosine similarity exceeds the
    runner-up by more than t. Otherwise the top two are re-ranked by
    w * text_similarity + (1 - w) * visual similarity, ties going to the
    visual top-1.
    """
    if not gallery:
        raise ParameterError("gallery is empty")
    if cfg.d_pe is not None:
        for dim in (q.texts.dim, *(g.texts.dim for g in gallery)):
            if dim is not None and dim != cfg.d_pe:
                raise ParameterError(
                    f"word-feature dimension {dim} differs from configured d_pe {cfg.d_pe}"
                )
    ranking = _visual_ranking(q, gallery)
    if len(ranking) == 1:
        return ranking[0][1]
    (sim1, cat1, idx1), (sim2, cat2, idx2) = ranking[0], ranking[1]
    if sim1 - sim2 > cfg.t:
        return cat1
    score1 = cfg.w * text_similarity(q.texts, gallery[idx1].texts, normalize_text) + (
        1.0 - cfg.w
    ) * sim1
    score2 = cfg.w * text_similarity(q.texts, gallery[idx2].texts, normalize_text) + (
        1.0 - cfg.w
    ) * sim2
    return cat2 if score2 > score1 else cat1


def top1_accuracy(
    queries: Sequence[QueryRecord],
    gallery: Sequence[GalleryEntry],
    cfg: MatchConfig,
    threads: int = 1,
    normalize_text: bool = False,
) -> float:
    """Fraction of queries whose matched category equals their truth label."""
    if not queries:
        return 0.0

    def one(q: QueryRecord) -> bool:
        return match_product(q, gallery, cfg, normalize_text) == q.truth

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(one, queries))
    else:
        hits = sum(one(q) for q in queries)
    return hits / len(queries)


def tune_params(
    val_queries: Sequence[QueryRecord],
    gallery: Sequence[GalleryEntry],
    t_grid: Sequence[float],
    w_grid: Sequence[float],
    threads: int = 1,
) -> tuple[float, float]:
    """Exhaustive grid search maximizing top-1 accuracy on a validation set;
    accuracy ties resolve to the smaller t, then the smaller w."""
    if not t_grid or not w_grid:
        raise ParameterError("tuning grids must be non-empty")
    best: Optional[tuple[float, float, float]] = None  # (-acc, t, w)
    for t in sorted(t_grid):
        for w in sorted(w_grid):
            cfg = MatchConfig(t=t, w=w)
            acc = top1_accuracy(val_queries, gallery, cfg, threads=threads)
            key = (-acc, t, w)
            if best is None or key < best:
                best = key
    assert best is not None
    return best[1], best[2]
