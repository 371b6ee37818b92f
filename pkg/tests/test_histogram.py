import logging

import numpy as np
import pytest

from graymatch import (
    DimensionMismatch,
    EmptyForeground,
    ForegroundMask,
    Histogram,
    fg_histogram,
    foreground_mask,
    merge,
    normalize_cdf,
    rebin,
    rebin_cdf,
)
from conftest import make_image, random_histogram


class TestFgHistogram:
    def test_worked_counts(self, worked_source_hist):
        assert worked_source_hist.counts.tolist() == [0, 2, 1, 1, 0, 0, 0, 0]
        assert worked_source_hist.total == 4

    def test_empty_foreground_raises(self):
        img = make_image(np.zeros((2, 2), dtype=int), 3)
        with pytest.raises(EmptyForeground):
            fg_histogram(img, ForegroundMask(np.ones((2, 2), dtype=bool)))

    def test_mask_respected(self):
        img = make_image([[5, 5]], 8)
        mask = ForegroundMask(np.array([[True, False]]))
        assert fg_histogram(img, mask).counts[5] == 1

    def test_dimension_mismatch(self):
        img = make_image([[1, 2]], 8)
        with pytest.raises(DimensionMismatch):
            fg_histogram(img, ForegroundMask(np.ones((2, 2), dtype=bool)))

    def test_masked_zeros_dropped_with_warning(self, caplog):
        img = make_image([[0, 3]], 8)
        mask = ForegroundMask(np.ones((1, 2), dtype=bool))
        with caplog.at_level(logging.WARNING, logger="graymatch.histogram"):
            hist = fg_histogram(img, mask)
        assert hist.counts[0] == 0 and hist.total == 1
        assert "dropped 1" in caplog.text

    def test_counts0_invariant_enforced(self):
        with pytest.raises(ValueError):
            Histogram(np.array([1, 0, 0, 0, 0, 0, 0, 0]), 3)


class TestNormalizeCdf:
    def test_worked_values(self, worked_source_hist):
        cdf = normalize_cdf(worked_source_hist)
        assert cdf.values.tolist() == [0, 0.5, 0.75, 1, 1, 1, 1, 1]

    def test_single_occupied_bin_is_step(self):
        counts = np.zeros(16, dtype=int)
        counts[5] = 9
        cdf = normalize_cdf(Histogram(counts, 4))
        assert np.all(cdf.values[:5] == 0) and np.all(cdf.values[5:] == 1)

    def test_uniform_counts(self):
        b = 4
        counts = np.ones(1 << b, dtype=int)
        counts[0] = 0
        cdf = normalize_cdf(Histogram(counts, b))
        expect = np.arange(1 << b) / ((1 << b) - 1)
        assert np.allclose(cdf.values, expect, atol=0, rtol=0)

    def test_terminal_is_exactly_one(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            cdf = normalize_cdf(random_histogram(rng, 6))
            assert cdf.values[-1] == 1.0
            assert np.all(np.diff(cdf.values) >= 0)
            assert abs(cdf.values[-1] - 1.0) <= 1e-12

    def test_empty_raises(self):
        with pytest.raises(EmptyForeground):
            normalize_cdf(Histogram(np.zeros(8, dtype=int), 3))


class TestRebin:
    def test_identity_at_same_depth(self, worked_source_hist):
        assert rebin(worked_source_hist, 3) is worked_source_hist

    def test_bin_merge_example(self):
        counts = np.zeros(16, dtype=int)
        counts[4], counts[5] = 3, 5
        out = rebin(Histogram(counts, 4), 3)
        assert out.counts[2] == 8 and out.total == 8

    def test_remainder_is_dropped_dim_mass(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            hist = random_histogram(rng, 8)
            t = int(rng.integers(1, 9))
            shift = 8 - t
            remainder = int(hist.counts[1 : 1 << shift].sum()) if shift else 0
            out = rebin(hist, t)
            assert out.total == hist.total - remainder

    def test_rejects_upscale(self):
        with pytest.raises(ValueError):
            rebin(Histogram(np.zeros(8, dtype=int), 3), 4)


class TestMerge:
    def test_identity_element(self, worked_source_hist):
        empty = Histogram(np.zeros(8, dtype=int), 3)
        assert merge(worked_source_hist, empty) == worked_source_hist

    def test_commutative_and_associative(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            a, b, c = (random_histogram(rng, 5) for _ in range(3))
            assert merge(a, b) == merge(b, a)
            assert merge(merge(a, b), c) == merge(a, merge(b, c))

    def test_depth_mismatch(self):
        with pytest.raises(DimensionMismatch):
            merge(Histogram(np.zeros(8, dtype=int), 3), Histogram(np.zeros(16, dtype=int), 4))

    def test_tiled_accumulation_matches_whole_image(self):
        rng = np.random.default_rng(8)
        px = rng.integers(0, 256, (24, 17))
        img = make_image(px, 8)
        mask = foreground_mask(img)
        whole = fg_histogram(img, mask)
        parts = []
        for y0 in range(0, 24, 7):
            tile = make_image(px[y0 : y0 + 7], 8)
            tile_mask = foreground_mask(tile)
            parts.append(fg_histogram(tile, tile_mask))
        acc = parts[0]
        for p in parts[1:]:
            acc = merge(acc, p)
        assert acc == whole


class TestRebinCdf:
    def test_matches_rebin_then_normalize(self):
        rng = np.random.default_rng(9)
        for _ in range(60):
            hist = random_histogram(rng, 8)
            t = int(rng.integers(1, 8))
            direct = normalize_cdf(rebin(hist, t)) if rebin(hist, t).total else None
            if direct is None:
                continue
            via_cdf = rebin_cdf(normalize_cdf(hist), t)
            assert np.allclose(via_cdf.values, direct.values, atol=1e-12, rtol=0)
            assert via_cdf.values[-1] == 1.0

    def test_all_mass_below_grid_raises(self):
        counts = np.zeros(256, dtype=int)
        counts[1] = 10  # everything in the dim bins
        cdf = normalize_cdf(Histogram(counts, 8))
        with pytest.raises(EmptyForeground):
            rebin_cdf(cdf, 3)
