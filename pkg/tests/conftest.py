import numpy as np
import pytest

from graymatch import (
    ForegroundMask,
    GrayImage,
    Histogram,
    build_reference,
    fg_histogram,
    foreground_mask,
    normalize_cdf,
)


def make_image(rows, bit_depth, photometric="MONO2"):
    return GrayImage(np.asarray(rows, dtype=np.uint16), bit_depth, photometric)


@pytest.fixture
def worked_source_hist():
    """b=3 source with foreground pixels {1, 1, 2, 3}."""
    img = make_image([[1, 1, 2, 3]], 3)
    return fg_histogram(img, foreground_mask(img))


@pytest.fixture
def worked_reference_hist():
    """b=3 reference with foreground pixels {2, 4, 4, 6}."""
    img = make_image([[2, 4, 4, 6]], 3)
    return fg_histogram(img, foreground_mask(img))


@pytest.fixture
def worked_source_cdf(worked_source_hist):
    return normalize_cdf(worked_source_hist)


@pytest.fixture
def worked_reference_cdf(worked_reference_hist):
    return normalize_cdf(worked_reference_hist)


@pytest.fixture
def worked_image():
    """The 1x4 image [0, 1, 2, 3] the worked map is applied to."""
    return make_image([[0, 1, 2, 3]], 3)


@pytest.fixture
def worked_mask():
    return ForegroundMask(np.array([[False, True, True, True]]))


@pytest.fixture
def worked_profile():
    """Profile built from the 1x4 reference image [2, 4, 4, 6]."""
    ref = make_image([[2, 4, 4, 6]], 3)
    return build_reference([(ref, foreground_mask(ref))], created="test")


def random_histogram(rng, bit_depth, high=6):
    """Random histogram with zero-inflated counts (flat CDF runs are common)."""
    n = 1 << bit_depth
    counts = rng.integers(0, high, n)
    counts[0] = 0
    if counts[1:].sum() == 0:
        counts[rng.integers(1, n)] = 1
    return Histogram(counts, bit_depth)
