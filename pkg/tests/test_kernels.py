"""Compiled-extension vs pure-Python kernel parity, plus the array API."""

import numpy as np
import pytest

import unitailkit._kernels._fallback as fallback
from unitailkit import kernels
from unitailkit.errors import ExteriorPointError, ParameterError

from geomutil import random_convex_quad

try:
    import unitailkit._kernels._core as core

    HAVE_CORE = True
except ImportError:
    core = None
    HAVE_CORE = False

needs_core = pytest.mark.skipif(not HAVE_CORE, reason="compiled core not built")

PARITY = 1e-12


def random_quads(rng, n):
    return np.stack(
        [np.asarray(random_convex_quad(rng).to_flat()) for _ in range(n)]
    )


@needs_core
class TestBackendParity:
    def test_quad_iou(self):
        rng = np.random.default_rng(331)
        qa = random_quads(rng, 30)
        qb = random_quads(rng, 30)
        for a in qa:
            for b in qb:
                assert abs(core.quad_iou(a, b) - fallback.quad_iou(a, b)) <= PARITY

    def test_quad_iou_non_convex(self):
        dart = np.array([0, 0, 4, 0, 1, 1, 0, 4], dtype=np.float64)
        other = np.array([0, 0, 3, 0, 3, 3, 0, 3], dtype=np.float64)
        assert abs(core.quad_iou(dart, other) - fallback.quad_iou(dart, other)) <= PARITY

    def test_batch_matches_scalar_loop(self):
        rng = np.random.default_rng(337)
        qa = random_quads(rng, 12)
        qb = random_quads(rng, 9)
        batch = np.asarray(core.batch_quad_iou(qa, qb))
        for i in range(12):
            for j in range(9):
                assert abs(batch[i, j] - core.quad_iou(qa[i], qb[j])) <= PARITY

    def test_centerness(self):
        rng = np.random.default_rng(347)
        for _ in range(100):
            q = random_convex_quad(rng)
            flat = np.asarray(q.to_flat())
            gx, gy = fallback.polygon_centroid(q.corners)
            p = (gx + rng.uniform(-0.5, 0.5), gy + rng.uniform(-0.5, 0.5))
            try:
                expected = fallback.centerness_quad(p[0], p[1], flat)
            except Exception:
                continue
            assert abs(core.centerness_quad(p[0], p[1], flat) - expected) <= PARITY

    def test_batch_centerness_error_carries_index(self):
        quad = np.array([0, 0, 10, 0, 10, 10, 0, 10], dtype=np.float64)
        pts = np.array([[5.0, 5.0], [50.0, 50.0]])
        for impl in (core, fallback):
            with pytest.raises(ExteriorPointError, match="point 1"):
                impl.batch_centerness(pts, quad)

    def test_hungarian_totals(self):
        rng = np.random.default_rng(349)
        for _ in range(100):
            n, m = rng.integers(1, 9, 2)
            cost = rng.uniform(-20, 20, (n, m))
            pa = core.hungarian(cost)
            pb = fallback.hungarian(cost)
            assert pa == pb

    def test_convex_hull_and_clip(self):
        rng = np.random.default_rng(353)
        for _ in range(50):
            pts = rng.uniform(0, 100, (15, 2))
            assert core.convex_hull(pts.tolist()) == fallback.convex_hull(pts.tolist())
            a = random_convex_quad(rng)
            b = random_convex_quad(rng)
            ca = core.clip_convex(a.corners, b.corners)
            cb = fallback.clip_convex(a.corners, b.corners)
            assert len(ca) == len(cb)
            for (x0, y0), (x1, y1) in zip(ca, cb):
                assert abs(x0 - x1) <= PARITY and abs(y0 - y1) <= PARITY

    def test_point_in_polygon(self):
        rng = np.random.default_rng(359)
        for _ in range(50):
            q = random_convex_quad(rng)
            p = rng.uniform(-10, 110, 2)
            assert core.point_in_polygon(p[0], p[1], q.corners) == fallback.point_in_polygon(
                p[0], p[1], q.corners
            )

    def test_edge_distances(self):
        rng = np.random.default_rng(367)
        for _ in range(50):
            q = random_convex_quad(rng)
            flat = np.asarray(q.to_flat())
            p = rng.uniform(0, 100, 2)
            da = core.edge_distances(p[0], p[1], flat)
            db = fallback.edge_distances(p[0], p[1], flat)
            assert np.allclose(da, db, atol=PARITY, rtol=0)

    def test_signed_area_and_centroid(self):
        rng = np.random.default_rng(373)
        for _ in range(50):
            verts = rng.uniform(0, 100, (6, 2)).tolist()
            assert abs(core.signed_area(verts) - fallback.signed_area(verts)) <= 1e-9
            q = random_convex_quad(rng)
            ca = core.polygon_centroid(q.corners)
            cb = fallback.polygon_centroid(q.corners)
            assert abs(ca[0] - cb[0]) <= PARITY and abs(ca[1] - cb[1]) <= PARITY


class TestArrayApi:
    def test_backend_name(self):
        assert kernels.backend() in ("cython", "python")

    def test_batch_quad_iou_identity(self):
        q = np.array([[0, 0, 1, 0, 1, 1, 0, 1]], dtype=np.float64)
        out = kernels.batch_quad_iou(q, q)
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_batch_quad_iou_matches_scalar(self):
        rng = np.random.default_rng(379)
        qa = random_quads(rng, 8)
        qb = random_quads(rng, 5)
        out = kernels.batch_quad_iou(qa, qb)
        from unitailkit import _kernels

        for i in range(8):
            for j in range(5):
                assert out[i, j] == pytest.approx(
                    _kernels.quad_iou(qa[i], qb[j]), abs=1e-12
                )

    def test_shape_validation(self):
        with pytest.raises(ParameterError, match="shape"):
            kernels.batch_quad_iou(np.zeros((2, 7)), np.zeros((2, 8)))
        with pytest.raises(ParameterError, match="shape"):
            kernels.batch_centerness(np.zeros((3, 3)), np.zeros(8))

    def test_inputs_not_mutated(self):
        rng = np.random.default_rng(383)
        qa = random_quads(rng, 3)
        qb = random_quads(rng, 3)
        snapshot = qa.copy()
        kernels.batch_quad_iou(qa, qb)
        assert np.array_equal(qa, snapshot)

    def test_batch_centerness_values(self):
        quad = np.array([0, 0, 4, 0, 4, 4, 0, 4], dtype=np.float64)
        pts = np.array([[2.0, 2.0], [1.0, 2.0]])
        out = kernels.batch_centerness(pts, quad)
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(np.sqrt(1.0 / 3.0))

    def test_hungarian_wrapper(self):
        cost = np.ones((3, 3)) - np.eye(3)
        assert kernels.hungarian(cost) == [(0, 0), (1, 1), (2, 2)]
