"""Quantizer construction and mask-aware application."""

import numpy as np
import pytest

from iraug.errors import ConfigError, ContractError
from iraug.rng import derive_stream
from iraug.squeezer import (
    GaussianSamplerConfig,
    QuantSpec,
    apply_quantization,
    build_quant_spec,
    pixel_copy_paste,
    sample_bin_count,
)
from iraug.types import GrayImage, TargetMask

from conftest import make_scene


def _ctx(seed, label="squeeze", idx=0):
    return derive_stream(seed, label, idx)


class TestSamplerConfig:
    def test_defaults(self):
        cfg = GaussianSamplerConfig()
        assert (cfg.mu, cfg.sigma, cfg.min_bins, cfg.max_bins) == (17.0, 4.0, 2, 256)

    def test_invalid(self):
        with pytest.raises(ConfigError):
            GaussianSamplerConfig(sigma=-1)
        with pytest.raises(ConfigError):
            GaussianSamplerConfig(min_bins=0)
        with pytest.raises(ConfigError):
            GaussianSamplerConfig(min_bins=10, max_bins=5)


class TestSampleBinCount:
    def test_degenerate_gaussian(self):
        cfg = GaussianSamplerConfig(mu=5, sigma=0)
        assert all(sample_bin_count(cfg, _ctx(s)) == 5 for s in range(20))

    def test_clamp_floor(self):
        cfg = GaussianSamplerConfig(mu=1, sigma=0, min_bins=2)
        assert sample_bin_count(cfg, _ctx(0)) == 2

    def test_clamp_ceiling(self):
        cfg = GaussianSamplerConfig(mu=500, sigma=0)
        assert sample_bin_count(cfg, _ctx(0)) == 256

    def test_deterministic(self):
        cfg = GaussianSamplerConfig()
        assert sample_bin_count(cfg, _ctx(9)) == sample_bin_count(cfg, _ctx(9))


class TestQuantSpecValidation:
    def test_rejects_non_monotone_edges(self):
        with pytest.raises(ContractError):
            QuantSpec(np.array([0.0, 0.5, 0.5]), np.array([0.2, 0.6]))

    def test_rejects_replacement_outside_interval(self):
        with pytest.raises(ContractError):
            QuantSpec(np.array([0.0, 0.5, 1.0]), np.array([0.6, 0.7]))

    def test_digest_round_trips_through_json(self):
        img, _ = make_scene(5)
        spec = build_quant_spec(img, 7, _ctx(5))
        again = QuantSpec.from_json_dict(spec.to_json_dict())
        assert again.digest() == spec.digest()
        assert np.array_equal(again.edges, spec.edges)


class TestBuildQuantSpec:
    def test_single_interval(self):
        img, _ = make_scene(1)
        spec = build_quant_spec(img, 1, _ctx(1))
        lo, hi = img.pixels.min(), img.pixels.max()
        assert spec.num_intervals == 1
        assert spec.edges[0] == lo
        assert spec.edges[-1] == np.nextafter(hi, np.inf)
        assert lo <= spec.replacements[0] <= hi

    def test_constant_image_degenerates(self):
        img = GrayImage(np.full((4, 4), 0.5))
        spec = build_quant_spec(img, 9, _ctx(2))
        assert spec.num_intervals == 1
        assert spec.replacements[0] == 0.5
        out = apply_quantization(img, TargetMask(np.zeros((4, 4), bool)), spec)
        assert np.array_equal(out.pixels, img.pixels)

    def test_postconditions_over_seeded_builds(self):
        # num=3: four strictly increasing edges, replacements inside intervals.
        img, _ = make_scene(6)
        lo, hi = img.pixels.min(), img.pixels.max()
        for s in range(1000):
            spec = build_quant_spec(img, 3, _ctx(s))
            assert spec.edges.size == 4
            assert np.all(np.diff(spec.edges) > 0)
            assert spec.edges[0] == lo and spec.edges[-1] > hi
            assert np.all(spec.replacements >= spec.edges[:-1])
            assert np.all(spec.replacements < spec.edges[1:])

    def test_num_must_be_positive(self):
        img, _ = make_scene(7)
        with pytest.raises(ContractError):
            build_quant_spec(img, 0, _ctx(0))

    def test_deterministic(self):
        img, _ = make_scene(8)
        a = build_quant_spec(img, 5, _ctx(3))
        b = build_quant_spec(img, 5, _ctx(3))
        assert np.array_equal(a.edges, b.edges)
        assert np.array_equal(a.replacements, b.replacements)


class TestApplyQuantization:
    def test_hand_evaluated_case(self):
        img = GrayImage(np.array([[0.1, 0.4], [0.6, 0.9]]))
        mask = TargetMask(np.array([[0, 0], [0, 1]], dtype=bool))
        spec = QuantSpec(
            edges=np.array([0.1, 0.5, np.nextafter(0.9, np.inf)]),
            replacements=np.array([0.3, 0.7]),
        )
        out = apply_quantization(img, mask, spec)
        assert np.array_equal(out.pixels, np.array([[0.3, 0.3], [0.7, 0.9]]))

    def test_all_target_mask_is_identity(self):
        img, _ = make_scene(9)
        mask = TargetMask(np.ones(img.shape, dtype=bool))
        spec = build_quant_spec(img, 4, _ctx(4))
        assert apply_quantization(img, mask, spec) == img

    def test_all_background_single_interval(self):
        img, _ = make_scene(10)
        mask = TargetMask(np.zeros(img.shape, dtype=bool))
        spec = build_quant_spec(img, 1, _ctx(5))
        out = apply_quantization(img, mask, spec)
        assert np.all(out.pixels == spec.replacements[0])

    def test_stale_spec_rejected(self):
        img = GrayImage(np.array([[0.1, 0.9]]))
        spec = QuantSpec(np.array([0.2, 0.95]), np.array([0.5]))
        with pytest.raises(ContractError):
            apply_quantization(img, TargetMask(np.zeros((1, 2), bool)), spec)

    def test_dimension_mismatch_rejected(self):
        img, _ = make_scene(11)
        spec = build_quant_spec(img, 3, _ctx(6))
        with pytest.raises(ContractError):
            apply_quantization(
                img, TargetMask(np.zeros((2, 2), dtype=bool)), spec
            )

    def test_target_preservation_and_cardinality(self):
        for s in range(50):
            img, mask = make_scene(100 + s, h=16, w=16)
            num = sample_bin_count(GaussianSamplerConfig(), _ctx(s, "num"))
            spec = build_quant_spec(img, num, _ctx(s, "spec"))
            out = apply_quantization(img, mask, spec)
            assert np.array_equal(
                out.pixels[mask.bits], img.pixels[mask.bits]
            )
            bg = out.pixels[~mask.bits]
            assert np.unique(bg).size <= num
            # Membership: every background output is its interval's replacement.
            src = img.pixels[~mask.bits]
            idx = np.searchsorted(spec.edges, src, side="right") - 1
            assert np.array_equal(bg, spec.replacements[idx])


class TestPixelCopyPaste:
    def test_all_false_returns_generated(self):
        gen, _ = make_scene(12)
        orig, _ = make_scene(13)
        mask = TargetMask(np.zeros(gen.shape, dtype=bool))
        assert pixel_copy_paste(gen, orig, mask) == gen

    def test_all_true_returns_original(self):
        gen, _ = make_scene(14)
        orig, _ = make_scene(15)
        mask = TargetMask(np.ones(gen.shape, dtype=bool))
        assert pixel_copy_paste(gen, orig, mask) == orig

    def test_checkerboard_interleaving(self):
        gen = GrayImage(np.full((6, 6), 0.2))
        orig = GrayImage(np.full((6, 6), 0.8))
        board = np.indices((6, 6)).sum(axis=0) % 2 == 0
        out = pixel_copy_paste(gen, orig, TargetMask(board))
        # Per-pixel select oracle.
        expected = np.where(board, 0.8, 0.2)
        assert np.array_equal(out.pixels, expected)

    def test_dimension_mismatch(self):
        gen, _ = make_scene(16)
        orig, _ = make_scene(17, h=8, w=8)
        with pytest.raises(ContractError):
            pixel_copy_paste(gen, orig, TargetMask(np.zeros(gen.shape, bool)))


class TestCrossPeakSampling:
    def test_train_and_infer_specs_differ(self):
        # Distinct stage labels must yield distinct draws essentially always.
        differ = 0
        for s in range(1000):
            img, _ = make_scene(200 + s, h=8, w=8, n_targets=1)
            spec_a = build_quant_spec(img, 5, derive_stream(42, "train", s))
            spec_b = build_quant_spec(img, 5, derive_stream(42, "infer", s))
            if not np.array_equal(spec_a.edges, spec_b.edges):
                differ += 1
        assert differ == 1000
