"""Array-in/array-out kernel surface for training loops.

Thin validated wrappers over the selected kernel backend (compiled extension
or pure Python); inputs are never mutated. Quads are N x 8 rows of corner
coordinates (tl, tr, br, bl), points are M x 2.
"""

from __future__ import annotations

import numpy as np

from unitailkit import _kernels
from unitailkit.errors import ParameterError


def backend() -> str:
    """Name of the active kernel backend: "cython" or "python"."""
    return _kernels.BACKEND


def _check_quads(arr: np.ndarray, name: str) -> np.ndarray:
    a = np.ascontiguousarray(arr, dtype=np.float64)
    if a.ndim == 1 and a.size == 8:
        a = a.reshape(1, 8)
    if a.ndim != 2 or a.shape[1] != 8:
        raise ParameterError(f"{name} must have shape (N, 8), got {arr.shape}")
    if a.size and not np.isfinite(a).all():
        raise ParameterError(f"{name} has non-finite coordinates")
    return a


def batch_quad_iou(a, b) -> np.ndarray:
    """Pairwise exact IoU matrix between two batches of quads."""
    qa = _check_quads(np.asarray(a), "a")
    qb = _check_quads(np.asarray(b), "b")
    out = _kernels.batch_quad_iou(qa, qb)
    return np.asarray(out, dtype=np.float64).reshape(qa.shape[0], qb.shape[0])


def batch_centerness(points, quad) -> np.ndarray:
    """Quad-centerness of each point (all must lie strictly inside)."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ParameterError(f"points must have shape (M, 2), got {pts.shape}")
    q = _check_quads(np.asarray(quad), "quad")
    if q.shape[0] != 1:
        raise ParameterError(f"quad must be a single row of 8, got {q.shape}")
    out = _kernels.batch_centerness(pts, q[0])
    return np.asarray(out, dtype=np.float64)


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment pairs for a rectangular cost matrix."""
    arr = np.ascontiguousarray(cost, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f"cost matrix must be 2D, got shape {arr.shape}")
    if arr.size and not np.isfinite(arr).all():
        raise ParameterError("cost matrix has non-finite entries")
    return _kernels.hungarian(arr)
