import numpy as np
import pytest

from graymatch import (
    EmptyForeground,
    ForegroundMask,
    GrayImage,
    PhotometricNotNormalized,
    foreground_mask,
    largest_component,
    to_mono2,
)
from conftest import make_image
from oracles import largest_component_oracle


class TestGrayImage:
    def test_rejects_out_of_range_pixels(self):
        with pytest.raises(ValueError):
            make_image([[8]], 3)

    def test_rejects_bad_depth(self):
        with pytest.raises(ValueError):
            make_image([[0]], 17)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            GrayImage(np.zeros((0, 4), dtype=np.uint16), 8)

    def test_pixels_are_immutable(self):
        img = make_image([[1, 2]], 8)
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 5

    def test_depth_is_declared_not_inferred(self):
        img = make_image([[3]], 12)
        assert img.bit_depth == 12 and img.max_value == 4095


class TestToMono2:
    def test_mono2_is_identity(self):
        img = make_image([[0, 100, 255]], 8)
        assert to_mono2(img) == img

    def test_mono1_complements_extremes(self):
        img = make_image([[0, 4095]], 12, "MONO1")
        out = to_mono2(img)
        assert out.pixels.tolist() == [[4095, 0]]
        assert out.photometric == "MONO2"

    def test_double_application_recovers_values(self):
        rng = np.random.default_rng(1)
        px = rng.integers(0, 1 << 12, (9, 7))
        img = make_image(px, 12, "MONO1")
        once = to_mono2(img)
        twice = to_mono2(once)
        assert twice == once  # idempotent
        # complementing again by hand recovers the original buffer
        assert np.array_equal(img.max_value - once.pixels, img.pixels)

    def test_complement_sum_invariant(self):
        rng = np.random.default_rng(2)
        for b in (8, 10, 14, 16):
            px = rng.integers(0, 1 << b, (5, 5))
            out = to_mono2(make_image(px, b, "MONO1"))
            assert np.all(px + out.pixels.astype(np.int64) == (1 << b) - 1)


class TestForegroundMask:
    def test_all_zero_image_gives_all_false(self):
        mask = foreground_mask(make_image(np.zeros((3, 3), dtype=int), 8))
        assert mask.count == 0

    def test_default_threshold(self):
        mask = foreground_mask(make_image([[0, 1, 5]], 8))
        assert mask.flags.tolist() == [[False, True, True]]

    def test_higher_threshold(self):
        mask = foreground_mask(make_image([[0, 1, 5]], 8), min_intensity=3)
        assert mask.flags.tolist() == [[False, False, True]]

    def test_requires_mono2(self):
        with pytest.raises(PhotometricNotNormalized):
            foreground_mask(make_image([[1]], 8, "MONO1"))

    def test_matches_positive_pixels_exactly(self):
        rng = np.random.default_rng(3)
        px = rng.integers(0, 40, (16, 16))
        mask = foreground_mask(make_image(px, 8))
        assert np.array_equal(mask.flags, px > 0)

    def test_rejects_zero_threshold(self):
        with pytest.raises(ValueError):
            foreground_mask(make_image([[1]], 8), min_intensity=0)


class TestLargestComponent:
    def test_single_component_unchanged(self):
        flags = np.zeros((4, 4), dtype=bool)
        flags[1:3, 1:3] = True
        mask = ForegroundMask(flags)
        assert largest_component(mask) == mask

    def test_keeps_bigger_blob(self):
        flags = np.array([
            [1, 1, 0, 0],
            [1, 1, 0, 0],
            [1, 1, 0, 1],
            [0, 0, 0, 1],
        ], dtype=bool)
        out = largest_component(ForegroundMask(flags), connectivity=4)
        assert np.array_equal(out.flags, largest_component_oracle(flags, 4))
        assert out.count == 6

    def test_tie_goes_to_lower_row_major_start(self):
        flags = np.array([
            [0, 1, 0, 1],
            [0, 1, 0, 1],
            [0, 0, 0, 0],
        ], dtype=bool)
        out = largest_component(ForegroundMask(flags), connectivity=4)
        expected = np.zeros_like(flags)
        expected[0:2, 1] = True
        assert np.array_equal(out.flags, expected)

    def test_empty_mask_raises(self):
        with pytest.raises(EmptyForeground):
            largest_component(ForegroundMask(np.zeros((3, 3), dtype=bool)))

    def test_connectivity_matters_on_diagonal(self):
        flags = np.array([
            [1, 0, 0],
            [0, 1, 1],
            [0, 1, 1],
        ], dtype=bool)
        out8 = largest_component(ForegroundMask(flags), connectivity=8)
        assert out8.count == 5  # all one component diagonally
        out4 = largest_component(ForegroundMask(flags), connectivity=4)
        assert out4.count == 4

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill_oracle(self, connectivity):
        rng = np.random.default_rng(11)
        for _ in range(40):
            flags = rng.random((9, 9)) < 0.35
            if not flags.any():
                continue
            got = largest_component(ForegroundMask(flags), connectivity=connectivity)
            want = largest_component_oracle(flags, connectivity)
            assert np.array_equal(got.flags, want)
            # always a subset of the input
            assert not np.any(got.flags & ~flags)
