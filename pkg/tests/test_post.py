import numpy as np
import pytest

from scenec.errors import EmptyImage
from scenec.post import (
    LabStats,
    color_transfer,
    curate,
    lab_stats,
    lab_to_srgb,
    srgb_to_lab,
    write_curation_aggregate,
    write_curation_csv,
)
from scenec.taxonomy import DEFAULT_TAXONOMY

from oracles import srgb_to_lab_reference


def flat_image(rgb, shape=(8, 8)):
    return np.tile(np.array(rgb, dtype=np.uint8), (*shape, 1))


class TestLabStats:
    def test_white(self):
        stats = lab_stats(flat_image([255, 255, 255]))
        assert stats.mean[0] == pytest.approx(100.0, abs=1e-3)
        assert stats.mean[1] == pytest.approx(0.0, abs=0.05)
        assert stats.mean[2] == pytest.approx(0.0, abs=0.05)
        assert np.allclose(stats.std, 0.0)

    def test_mid_gray_119(self):
        # closed-form oracle: sRGB 119 -> linear 0.1845 -> L* 50.03
        stats = lab_stats(flat_image([119, 119, 119]))
        assert stats.mean[0] == pytest.approx(50.03, abs=0.05)
        assert stats.mean[1] == pytest.approx(0.0, abs=0.05)
        assert stats.mean[2] == pytest.approx(0.0, abs=0.05)

    def test_two_tone_std(self):
        img = np.vstack([flat_image([0, 0, 0], (4, 8)), flat_image([255, 255, 255], (4, 8))])
        stats = lab_stats(img)
        assert stats.std[0] > 10.0

    def test_empty(self):
        with pytest.raises(EmptyImage):
            lab_stats(np.empty((0, 0, 3), dtype=np.uint8))

    def test_matches_reference(self):
        rng = np.random.default_rng(0)
        rgb = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        ours = srgb_to_lab(rgb)
        ref = srgb_to_lab_reference(rgb.astype(np.float64) / 255.0)
        assert np.allclose(ours, ref, atol=1e-9)


class TestLabRoundtrip:
    def test_sampled_grid(self):
        # 1e5-color sample of the 8-bit cube: identity within 1 level
        rng = np.random.default_rng(7)
        rgb = rng.integers(0, 256, (100_000, 1, 3)).astype(np.uint8)
        back = lab_to_srgb(srgb_to_lab(rgb))
        diff = np.abs(back.astype(int) - rgb.astype(int))
        assert diff.max() <= 1


class TestColorTransfer:
    def source(self):
        rng = np.random.default_rng(3)
        # in-gamut soft image: mid-range colors with moderate spread
        return np.clip(rng.normal(120, 30, (64, 64, 3)), 0, 255).astype(np.uint8)

    def target(self):
        rng = np.random.default_rng(4)
        return np.clip(rng.normal(150, 20, (64, 64, 3)), 0, 255).astype(np.uint8)

    def test_alpha_zero_identity(self):
        src = self.source()
        out = color_transfer(src, lab_stats(self.target()), alpha=0.0)
        assert np.array_equal(out, src)

    def test_alpha_one_matches_target(self):
        src = self.source()
        tgt_stats = lab_stats(self.target())
        out = color_transfer(src, tgt_stats, alpha=1.0)
        out_stats = lab_stats(out)
        # the Lab-space transfer is exact to ~1e-12; 8-bit quantization of
        # the sRGB output dominates the error budget here
        assert np.allclose(out_stats.mean, tgt_stats.mean, atol=0.2)
        assert np.allclose(out_stats.std, tgt_stats.std, atol=0.2)

    def test_constant_source_snaps_to_target_mean(self):
        src = flat_image([100, 110, 120])
        tgt_stats = LabStats(mean=np.array([60.0, 5.0, -10.0]), std=np.array([3.0, 2.0, 1.0]))
        out = color_transfer(src, tgt_stats, alpha=1.0)
        assert np.all(out == out[0, 0])  # still constant
        out_lab = srgb_to_lab(out[:1, :1]).reshape(3)
        assert np.allclose(out_lab, tgt_stats.mean, atol=0.5)

    def test_alpha_one_idempotent(self):
        src = self.source()
        tgt_stats = lab_stats(self.target())
        once = color_transfer(src, tgt_stats, alpha=1.0)
        twice = color_transfer(once, tgt_stats, alpha=1.0)
        diff = np.abs(once.astype(int) - twice.astype(int))
        assert diff.max() <= 1


def raster_with_classes(class_fractions, total=10_000):
    """Build a 13-class raster hitting the given {class_id: fraction} exactly."""
    pixels = []
    for cid, frac in class_fractions.items():
        pixels.extend([cid] * int(round(frac * total)))
    pixels.extend([0] * (total - len(pixels)))  # pad with void
    return np.array(pixels, dtype=np.uint8).reshape(100, -1)


class TestCurate:
    def test_eight_classes_kept(self):
        raster = raster_with_classes({i: 0.125 for i in range(1, 9)})
        report = curate([("a", raster)], min_classes=6)
        assert report.samples[0].kept
        assert report.samples[0].distinct_class_count == 8

    def test_below_floor_not_counted(self):
        # 7 non-void classes, two below the 0.1% floor -> distinct 5 -> dropped
        fractions = {1: 0.3, 2: 0.3, 3: 0.2, 4: 0.1, 5: 0.0992, 6: 0.0004, 7: 0.0004}
        raster = raster_with_classes(fractions)
        report = curate([("a", raster)], min_classes=6, pixel_floor=0.001)
        assert report.samples[0].distinct_class_count == 5
        assert not report.samples[0].kept

    def test_all_void_dropped(self):
        raster = np.zeros((10, 10), dtype=np.uint8)
        report = curate([("a", raster)], min_classes=6)
        assert report.samples[0].distinct_class_count == 0
        assert not report.samples[0].kept
        # with void counted, it is exactly 1
        report2 = curate([("a", raster)], min_classes=6, count_void=True)
        assert report2.samples[0].distinct_class_count == 1

    def test_fractions_sum_to_one(self):
        raster = raster_with_classes({1: 0.5, 2: 0.25, 3: 0.25})
        report = curate([("a", raster)])
        assert report.samples[0].fractions.sum() == pytest.approx(1.0, abs=1e-9)

    def test_aggregate_is_sum_of_kept(self):
        r1 = raster_with_classes({i: 0.125 for i in range(1, 9)})    # kept
        r2 = raster_with_classes({1: 0.5, 2: 0.5})                   # dropped
        report = curate([("a", r1), ("b", r2)], min_classes=6)
        expected = np.bincount(r1.ravel(), minlength=13)
        assert np.array_equal(report.aggregate, expected)

    def test_permutation_invariance(self):
        raster = raster_with_classes({i: 0.125 for i in range(1, 9)})
        rng = np.random.default_rng(1)
        shuffled = raster.ravel().copy()
        rng.shuffle(shuffled)
        a = curate([("a", raster)])
        b = curate([("a", shuffled.reshape(raster.shape))])
        assert a.samples[0].distinct_class_count == b.samples[0].distinct_class_count
        assert a.samples[0].kept == b.samples[0].kept

    def test_report_files(self, tmp_path):
        raster = raster_with_classes({i: 0.125 for i in range(1, 9)})
        report = curate([("img0", raster)])
        csv_path = tmp_path / "report.csv"
        json_path = tmp_path / "aggregate.json"
        write_curation_csv(report, csv_path)
        write_curation_aggregate(report, json_path)
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 2 and lines[1].startswith("img0,8,1")
        import json
        doc = json.loads(json_path.read_text())
        assert doc["kept"] == 1
        assert doc["pixel_histogram"][DEFAULT_TAXONOMY.names13[1]] == 1250
