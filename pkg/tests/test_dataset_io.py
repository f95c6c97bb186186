import json

import numpy as np
import pytest

from unitailkit.dataset_io import (
    ASPECT_BIN_EDGES,
    DENSITY_BIN_EDGES,
    DetDataset,
    ImageInfo,
    compute_stats,
    load_det_annotations,
    load_detections,
    load_features,
    load_ocr_dataset,
    load_text_det_predictions,
    load_text_rec_predictions,
    load_vocabulary,
    save_features,
)
from unitailkit.detection_eval import GroundTruthRecord
from unitailkit.errors import DataFormatError
from unitailkit.matching import FeatureSequence, WordFeature

from geomutil import square


def write_json(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def minimal_doc(**overrides):
    doc = {
        "images": [{"id": "img1", "width": 100, "height": 100}],
        "annotations": [
            {"image_id": "img1", "quad": [10, 10, 30, 10, 30, 30, 10, 30]}
        ],
    }
    doc.update(overrides)
    return doc


class TestLoadDetAnnotations:
    def test_minimal_file(self, tmp_path):
        ds = load_det_annotations(write_json(tmp_path / "a.json", minimal_doc()))
        assert len(ds.images) == 1
        assert len(ds.gts) == 1
        assert not ds.gts[0].ignore
        assert ds.clamp_warnings == 0

    def test_small_quads_flagged_ignore(self, tmp_path):
        doc = minimal_doc(
            annotations=[
                {"image_id": "img1", "quad": [0, 0, 7, 0, 7, 7, 0, 7]},  # 49 px^2
                {"image_id": "img1", "quad": [0, 0, 8, 0, 8, 8, 0, 8]},  # 64 px^2
            ]
        )
        ds = load_det_annotations(write_json(tmp_path / "a.json", doc))
        assert ds.gts[0].ignore is True
        assert ds.gts[1].ignore is False

    def test_three_point_quad_rejected_with_index(self, tmp_path):
        doc = minimal_doc(
            annotations=[
                {"image_id": "img1", "quad": [10, 10, 30, 10, 30, 30, 10, 30]},
                {"image_id": "img1", "quad": [0, 0, 10, 0, 10, 10]},
            ]
        )
        with pytest.raises(DataFormatError, match=r"annotations\[1\]"):
            load_det_annotations(write_json(tmp_path / "a.json", doc))

    def test_self_intersecting_rejected(self, tmp_path):
        doc = minimal_doc(
            annotations=[{"image_id": "img1", "quad": [0, 0, 10, 10, 10, 0, 0, 10]}]
        )
        with pytest.raises(DataFormatError, match=r"annotations\[0\]"):
            load_det_annotations(write_json(tmp_path / "a.json", doc))

    def test_unknown_image_rejected(self, tmp_path):
        doc = minimal_doc(
            annotations=[{"image_id": "ghost", "quad": [0, 0, 10, 0, 10, 10, 0, 10]}]
        )
        with pytest.raises(DataFormatError, match="ghost"):
            load_det_annotations(write_json(tmp_path / "a.json", doc))

    def test_out_of_bounds_clamped_and_counted(self, tmp_path):
        doc = minimal_doc(
            annotations=[
                {"image_id": "img1", "quad": [-5, 10, 30, 10, 30, 30, -5, 30]}
            ]
        )
        ds = load_det_annotations(write_json(tmp_path / "a.json", doc))
        assert ds.clamp_warnings == 1
        assert ds.gts[0].quad.tl == (0.0, 10.0)

    def test_ignore_regions_loaded(self, tmp_path):
        doc = minimal_doc(
            ignore_regions=[{"image_id": "img1", "polygon": [0, 0, 50, 0, 50, 50]}]
        )
        ds = load_det_annotations(write_json(tmp_path / "a.json", doc))
        assert len(ds.ignore_regions) == 1
        assert ds.ignore_regions[0][0] == "img1"

    def test_duplicate_image_id_rejected(self, tmp_path):
        doc = minimal_doc(
            images=[
                {"id": "img1", "width": 10, "height": 10},
                {"id": "img1", "width": 20, "height": 20},
            ],
            annotations=[],
        )
        with pytest.raises(DataFormatError, match="duplicate"):
            load_det_annotations(write_json(tmp_path / "a.json", doc))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_det_annotations(tmp_path / "missing.json")


class TestLoadDetections:
    def test_empty_list(self, tmp_path):
        assert load_detections(write_json(tmp_path / "d.json", [])) == []

    def test_many_detections_uncapped(self, tmp_path):
        doc = [
            {
                "image_id": "img1",
                "quad": [i, 0, i + 10, 0, i + 10, 10, i, 10],
                "score": 0.5,
            }
            for i in range(500)
        ]
        dets = load_detections(write_json(tmp_path / "d.json", doc))
        assert len(dets) == 500

    def test_score_out_of_range_rejected(self, tmp_path):
        doc = [{"image_id": "a", "quad": [0, 0, 1, 0, 1, 1, 0, 1], "score": 1.5}]
        with pytest.raises(DataFormatError, match=r"detections\[0\]"):
            load_detections(write_json(tmp_path / "d.json", doc))

    def test_save_load_round_trip(self, tmp_path):
        from unitailkit.dataset_io import save_detections
        from unitailkit.detection_eval import DetectionRecord

        dets = [
            DetectionRecord("a", square(0, 0, 10), 0.25),
            DetectionRecord("b", square(5, 5, 4), 1.0),
        ]
        path = tmp_path / "d.json"
        save_detections(dets, path)
        assert load_detections(path) == dets


def make_feature_map(rng, d=8, products=3):
    out = {}
    for k in range(products):
        visual = rng.normal(size=d).astype(np.float32).astype(np.float64)
        n_words = k  # first product has no words
        words = tuple(
            WordFeature(
                rng.normal(size=d).astype(np.float32).astype(np.float64),
                (float(rng.uniform()), float(rng.uniform())),
            )
            for _ in range(n_words)
        )
        out[f"p{k}"] = (visual, FeatureSequence(words))
    return out


class TestFeatureFile:
    def test_round_trip_structures(self, tmp_path):
        rng = np.random.default_rng(251)
        original = make_feature_map(rng)
        path = tmp_path / "f.utft"
        save_features(original, path)
        loaded = load_features(path)
        assert list(loaded) == list(original)
        for pid in original:
            v0, s0 = original[pid]
            v1, s1 = loaded[pid]
            assert np.array_equal(v0, v1)
            assert len(s0) == len(s1)
            for w0, w1 in zip(s0.items, s1.items):
                assert np.array_equal(w0.vector, w1.vector)
                assert w0.center == w1.center

    def test_round_trip_bytes(self, tmp_path):
        rng = np.random.default_rng(257)
        path1 = tmp_path / "f1.utft"
        path2 = tmp_path / "f2.utft"
        save_features(make_feature_map(rng), path1)
        save_features(load_features(path1), path2)
        assert path1.read_bytes() == path2.read_bytes()

    def test_zero_word_product(self, tmp_path):
        rng = np.random.default_rng(263)
        path = tmp_path / "f.utft"
        save_features(make_feature_map(rng), path)
        loaded = load_features(path)
        assert len(loaded["p0"][1]) == 0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "f.utft"
        path.write_bytes(b"NOPE" + b"\x00" * 12)
        with pytest.raises(DataFormatError, match="UTFT"):
            load_features(path)

    def test_truncated_file(self, tmp_path):
        rng = np.random.default_rng(269)
        path = tmp_path / "f.utft"
        save_features(make_feature_map(rng), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-3])
        with pytest.raises(DataFormatError, match="truncated"):
            load_features(path)

    def test_trailing_garbage(self, tmp_path):
        rng = np.random.default_rng(271)
        path = tmp_path / "f.utft"
        save_features(make_feature_map(rng), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(DataFormatError, match="trailing"):
            load_features(path)

    def test_empty_map_needs_dimension(self, tmp_path):
        path = tmp_path / "f.utft"
        with pytest.raises(DataFormatError):
            save_features({}, path)
        save_features({}, path, d=16)
        assert load_features(path) == {}


class TestVocabulary:
    def test_dedup_after_normalization(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("CREAM\ncream\n", encoding="utf-8")
        vocab = load_vocabulary(path)
        assert vocab.words == frozenset({"cream"})

    def test_numeric_unit_word(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("120mg\n", encoding="utf-8")
        assert "120mg" in load_vocabulary(path)

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("a\n\n\nbb\n", encoding="utf-8")
        assert load_vocabulary(path).words == frozenset({"a", "bb"})

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("\n!!\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_vocabulary(path)


class TestOcrDataset:
    def test_load_and_normalize(self, tmp_path):
        doc = {
            "split": "gallery",
            "vocabulary": ["CREAM", "120mg"],
            "products": [
                {
                    "product_id": "p1",
                    "category_id": "c1",
                    "regions": [
                        {"quad": [0, 0, 10, 0, 10, 5, 0, 5], "legible": True,
                         "transcription": "CREAM!"},
                        {"quad": [0, 10, 10, 10, 10, 15, 0, 15], "legible": False},
                    ],
                }
            ],
        }
        ds = load_ocr_dataset(write_json(tmp_path / "t.json", doc))
        assert ds.split == "gallery"
        assert ds.products[0].regions[0].transcription == "cream"
        assert ds.vocabulary is not None and "cream" in ds.vocabulary

    def test_gallery_uniqueness_enforced(self, tmp_path):
        doc = {
            "split": "gallery",
            "products": [
                {"product_id": "p1", "category_id": "c1", "regions": []},
                {"product_id": "p2", "category_id": "c1", "regions": []},
            ],
        }
        with pytest.raises(DataFormatError, match="two products"):
            load_ocr_dataset(write_json(tmp_path / "t.json", doc))

    def test_prediction_loaders(self, tmp_path):
        det_doc = {
            "products": [{"product_id": "p1", "quads": [[0, 0, 5, 0, 5, 5, 0, 5]]}]
        }
        preds = load_text_det_predictions(write_json(tmp_path / "d.json", det_doc))
        assert len(preds["p1"]) == 1
        rec_doc = {"products": [{"product_id": "p1", "transcriptions": ["CREAM!"]}]}
        recs = load_text_rec_predictions(write_json(tmp_path / "r.json", rec_doc))
        assert recs["p1"] == ["cream"]


def grid_dataset(counts, image_w=2200.0, image_h=3200.0):
    """One image per count, with that many 10x10 squares on a grid."""
    images = []
    gts = []
    for i, k in enumerate(counts):
        image_id = f"im{i}"
        images.append(ImageInfo(image_id, image_w, image_h))
        for j in range(int(k)):
            x = (j % 40) * 55.0
            y = (j // 40) * 55.0
            gts.append(GroundTruthRecord(image_id, square(x, y, 10)))
    return DetDataset(tuple(images), tuple(gts))


class TestComputeStats:
    def test_identical_unit_squares_point_mass(self):
        ds = grid_dataset([4])
        stats = compute_stats(ds)
        assert sum(stats.aspect.counts) == 4
        # all aspect ratios are exactly 1.0, in a single bin
        assert max(stats.aspect.counts) == 4
        one_bin = np.searchsorted(np.asarray(ASPECT_BIN_EDGES), 1.0, side="right") - 1
        assert stats.aspect.counts[one_bin] == 4
        assert stats.mean_angle_std == pytest.approx(0.0, abs=1e-9)

    def test_density_mass_at_count(self):
        ds = grid_dataset([145])
        stats = compute_stats(ds)
        assert sum(stats.density.counts) == 1
        bin_idx = int(np.searchsorted(np.asarray(DENSITY_BIN_EDGES), 145, side="right")) - 1
        assert stats.density.counts[bin_idx] == 1
        assert stats.density_mean == 145.0

    def test_histogram_mass_matches_record_count(self):
        rng = np.random.default_rng(277)
        counts = rng.integers(1, 60, size=12)
        ds = grid_dataset(counts)
        stats = compute_stats(ds)
        assert sum(stats.density.counts) == stats.n_images == 12
        assert sum(stats.scale.counts) == stats.n_quads == int(counts.sum())
        assert sum(stats.aspect.counts) == stats.n_quads

    def test_sampled_density_moments(self):
        # density fixture drawn from the published distribution shape
        rng = np.random.default_rng(281)
        counts = np.clip(np.rint(rng.normal(145, 46, size=120)), 5, None).astype(int)
        ds = grid_dataset(counts)
        stats = compute_stats(ds)
        assert stats.density_mean == pytest.approx(float(np.mean(counts)), abs=1e-9)
        assert stats.density_std == pytest.approx(float(np.std(counts)), abs=1e-9)
        assert abs(stats.density_mean - 145.0) < 15.0
        assert abs(stats.density_std - 46.0) < 15.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(283)
        counts = rng.integers(1, 40, size=6)
        ds = grid_dataset(counts)
        shuffled = DetDataset(
            ds.images, tuple(ds.gts[i] for i in rng.permutation(len(ds.gts))), (), 0
        )
        a, b = compute_stats(ds), compute_stats(shuffled)
        assert a.scale == b.scale
        assert a.aspect == b.aspect
        assert a.density == b.density
