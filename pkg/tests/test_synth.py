import numpy as np
import pytest

from cadet.engine.rng import Rng
from cadet.spectra import average_spectrum, peak_score
from cadet.synth import (
    FINGERPRINTS,
    AugmentConfig,
    DatasetManifest,
    blur_jpeg_augment,
    gen_conart,
    gen_deepart,
    load_dataset,
    make_splits,
    save_dataset,
)


def _conart_corpus(n, trial=0):
    return [gen_conart(Rng(trial).derive(9, i)).pixels for i in range(n)]


def _deepart_corpus(g, n, trial=0, amplitude=0.08):
    return [gen_deepart(Rng(trial).derive(7, g, i), g, amplitude=amplitude).pixels
            for i in range(n)]


class TestGenerators:
    def test_conart_deterministic(self):
        a = gen_conart(Rng(5)).pixels
        b = gen_conart(Rng(5)).pixels
        assert np.array_equal(a, b)

    def test_pixel_range(self):
        for i in range(20):
            img = gen_conart(Rng(0).derive(i)).pixels
            assert img.min() >= 0.0 and img.max() <= 1.0
            img = gen_deepart(Rng(0).derive(i), 3).pixels
            assert img.min() >= 0.0 and img.max() <= 1.0

    def test_non_power_of_two_rejected(self):
        with pytest.raises(ValueError, match="power"):
            gen_conart(Rng(0), 24, 32)

    def test_unknown_generator_rejected(self):
        with pytest.raises(ValueError, match="unknown generator"):
            gen_deepart(Rng(0), 6)

    def test_zero_amplitude_equals_conart(self):
        base = gen_conart(Rng(12)).pixels
        deep = gen_deepart(Rng(12), 2, amplitude=0.0).pixels
        assert np.array_equal(base, deep)

    def test_distinct_generators_differ_only_by_fingerprint(self):
        a = gen_deepart(Rng(3), 2, amplitude=0.08).pixels.astype(np.float64)
        b = gen_deepart(Rng(3), 4, amplitude=0.08).pixels.astype(np.float64)
        base = gen_deepart(Rng(3), 2, amplitude=0.0).pixels.astype(np.float64)
        # away from clipping, (a - base) and (b - base) are pure cosine grids
        interior = (base > 0.2) & (base < 0.8)
        ys, xs = np.mgrid[0:32, 0:32]
        ga = a - base
        gb = b - base
        assert np.abs(ga[interior]).max() <= 0.08 * len(FINGERPRINTS[2]) + 1e-6
        assert not np.allclose(ga, gb)

    def test_conart_average_spectrum_is_flat_off_dc(self):
        spec = average_spectrum(_conart_corpus(256), "conart")
        mask = np.ones(spec.shape, dtype=bool)
        mask[16, 16] = False
        off = spec.magnitudes[mask]
        assert off.max() < 3.0 * np.median(off)

    def test_conart_scores_below_three_at_every_registered_frequency(self):
        spec = average_spectrum(_conart_corpus(256), "conart")
        for g, freqs in FINGERPRINTS.items():
            assert peak_score(spec, freqs) < 3.0

    @pytest.mark.parametrize("g", sorted(FINGERPRINTS))
    def test_deepart_fingerprint_peaks(self, g):
        spec = average_spectrum(_deepart_corpus(g, 256), f"g{g}")
        assert peak_score(spec, FINGERPRINTS[g]) >= 10.0


class TestAugment:
    def test_zero_probability_is_identity(self):
        s = gen_deepart(Rng(1), 1)
        out = blur_jpeg_augment(s, AugmentConfig(probability=0.0), Rng(2))
        assert out.pixels.tobytes() == s.pixels.tobytes()

    def test_blur_strictly_reduces_high_frequency_energy(self):
        cfg = AugmentConfig(probability=1.0, blur_sigma=(1.0, 3.0), jpeg_quality=(100, 100))
        ys = np.minimum(np.arange(32), 32 - np.arange(32))[:, None]
        xs = np.minimum(np.arange(32), 32 - np.arange(32))[None, :]
        radii = np.sqrt(ys ** 2 + xs ** 2)
        top_quartile = radii >= np.quantile(radii, 0.75)
        from cadet.spectra import fft2

        for i in range(10):
            s = gen_deepart(Rng(0).derive(i), 3)
            out = blur_jpeg_augment(s, cfg, Rng(100).derive(i))
            before = np.abs(fft2(s.pixels.astype(np.float64))) ** 2
            after = np.abs(fft2(out.pixels.astype(np.float64))) ** 2
            assert after[top_quartile].sum() < before[top_quartile].sum()

    def test_max_quality_round_trip_within_pixel_grid(self):
        cfg = AugmentConfig(probability=1.0, blur_sigma=(0.0, 0.0), jpeg_quality=(100, 100))
        for i in range(10):
            s = gen_conart(Rng(0).derive(50 + i))
            out = blur_jpeg_augment(s, cfg, Rng(7).derive(i))
            assert np.max(np.abs(out.pixels - s.pixels)) <= 1.0 / 255.0 + 1e-7

    def test_low_quality_changes_pixels(self):
        cfg = AugmentConfig(probability=1.0, blur_sigma=(0.0, 0.0), jpeg_quality=(30, 30))
        s = gen_conart(Rng(4))
        out = blur_jpeg_augment(s, cfg, Rng(5))
        assert np.max(np.abs(out.pixels - s.pixels)) > 1.0 / 255.0

    def test_augment_deterministic(self):
        cfg = AugmentConfig(probability=0.5)
        s = gen_conart(Rng(8))
        a = blur_jpeg_augment(s, cfg, Rng(9))
        b = blur_jpeg_augment(s, cfg, Rng(9))
        assert np.array_equal(a.pixels, b.pixels)

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            AugmentConfig(probability=1.5)


class TestSplits:
    @pytest.fixture(scope="class")
    def tiny_manifest(self):
        return DatasetManifest(seed=0, base_train_conarts=40, base_train_deeparts=42,
                               incr_train_deeparts=10, test_conarts=8, test_deeparts=8)

    @pytest.fixture(scope="class")
    def splits(self, tiny_manifest):
        return make_splits(tiny_manifest)

    def test_base_session_has_both_classes(self, splits):
        labels = splits["train"][0].label_array()
        assert (labels == 0).sum() == 40
        assert (labels == 1).sum() == 42

    def test_non_base_train_sets_have_no_conarts(self, splits):
        for s in range(1, 5):
            labels = splits["train"][s].label_array()
            assert (labels == 0).sum() == 0
            assert (labels == s + 1).sum() == 10

    def test_every_test_set_has_conarts(self, splits):
        for s in range(5):
            labels = splits["test"][s].label_array()
            assert (labels == 0).sum() == 8
            assert (labels == s + 1).sum() == 8

    def test_default_balance_factor_matches_base_corpus(self):
        m = DatasetManifest()
        assert m.base_train_conarts == 2000
        assert m.incr_train_deeparts == 500
        assert m.test_conarts == m.test_deeparts == 200
        ratio = m.base_train_deeparts / m.base_train_conarts
        assert abs(ratio - 65556 / 62154) < 0.02

    def test_train_test_ids_disjoint(self, splits):
        train_ids = {s.sample_id for d in splits["train"].values() for s in d.samples}
        test_ids = {s.sample_id for d in splits["test"].values() for s in d.samples}
        assert train_ids and test_ids
        assert not (train_ids & test_ids)

    def test_zero_counts_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            DatasetManifest(test_conarts=0)

    def test_determinism(self, tiny_manifest):
        a = make_splits(tiny_manifest)
        b = make_splits(tiny_manifest)
        for split in ("train", "test"):
            for s in a[split]:
                pa = a[split][s].pixel_array()
                pb = b[split][s].pixel_array()
                assert pa.tobytes() == pb.tobytes()


class TestSeparability:
    def test_nearest_centroid_identifies_generators(self):
        # ground-truth learnability: average-spectrum centroids from a train
        # half must classify held-out deeparts by generator at >= 95%
        n_train, n_test = 96, 64
        centroids = {}
        for g in FINGERPRINTS:
            spec = average_spectrum(_deepart_corpus(g, n_train, trial=1), f"g{g}")
            centroids[g] = spec.magnitudes
        correct = 0
        total = 0
        for g in FINGERPRINTS:
            held = _deepart_corpus(g, n_test, trial=2)
            for im in held:
                single = average_spectrum([im], "x").magnitudes
                dists = {k: float(np.linalg.norm(single - c)) for k, c in centroids.items()}
                pred = min(sorted(dists), key=lambda k: dists[k])
                correct += int(pred == g)
                total += 1
        assert correct / total >= 0.95


class TestStorage:
    def test_save_load_round_trip(self, tmp_path):
        m = DatasetManifest(seed=3, base_train_conarts=6, base_train_deeparts=6,
                            incr_train_deeparts=4, test_conarts=3, test_deeparts=3)
        counts = save_dataset(tmp_path / "ds", m)
        assert counts[0]["train"] == {"conarts": 6, "deeparts": 6}
        assert counts[2]["train"] == {"conarts": 0, "deeparts": 4}
        loaded_manifest, splits = load_dataset(tmp_path / "ds")
        assert loaded_manifest == m
        fresh = make_splits(m)
        for split in ("train", "test"):
            for s in fresh[split]:
                a = {x.sample_id: x.pixels.tobytes() for x in fresh[split][s].samples}
                b = {x.sample_id: x.pixels.tobytes() for x in splits[split][s].samples}
                assert a == b

    def test_existing_dir_requires_force(self, tmp_path):
        m = DatasetManifest(seed=1, base_train_conarts=2, base_train_deeparts=2,
                            incr_train_deeparts=2, test_conarts=2, test_deeparts=2)
        save_dataset(tmp_path / "ds", m)
        with pytest.raises(FileExistsError):
            save_dataset(tmp_path / "ds", m)
        save_dataset(tmp_path / "ds", m, force=True)
