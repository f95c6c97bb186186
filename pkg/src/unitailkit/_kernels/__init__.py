"""Kernel backend selection.

The compiled extension (``_core``) is preferred; the pure-Python fallback has
identical semantics. Set UNITAIL_KERNEL_BACKEND=python|cython to force one.
"""

import os

_requested = os.environ.get("UNITAIL_KERNEL_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        from unitailkit._kernels import _core as _impl

        BACKEND = "cython"
    except ImportError:
        from unitailkit._kernels import _fallback as _impl

        BACKEND = "python"
elif _requested == "cython":
    from unitailkit._kernels import _core as _impl

    BACKEND = "cython"
elif _requested == "python":
    from unitailkit._kernels import _fallback as _impl

    BACKEND = "python"
else:
    raise ImportError(
        f"UNITAIL_KERNEL_BACKEND must be 'auto', 'cython' or 'python', "
        f"got {_requested!r}"
    )

GEOM_EPS = 1e-9

signed_area = _impl.signed_area
polygon_area = _impl.polygon_area
polygon_centroid = _impl.polygon_centroid
convex_hull = _impl.convex_hull
is_convex = _impl.is_convex
clip_convex = _impl.clip_convex
quad_iou = _impl.quad_iou
batch_quad_iou = _impl.batch_quad_iou
edge_distances = _impl.edge_distances
centerness_quad = _impl.centerness_quad
batch_centerness = _impl.batch_centerness
point_in_polygon = _impl.point_in_polygon
hungarian = _impl.hungarian
