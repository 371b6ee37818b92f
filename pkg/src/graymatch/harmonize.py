"""Monotone intensity maps from CDF matching, and the end-to-end pipeline."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyForeground,
    PhotometricNotNormalized,
    ProfileDepthMismatch,
)
from .histogram import (
    Histogram,
    NormalizedCdf,
    fg_histogram,
    normalize_cdf,
    rebin,
    rebin_cdf,
)
from .image import MONO2, ForegroundMask, GrayImage, foreground_mask, largest_component, to_mono2
from .metrics import HarmonizeReport, cdf_l1
from .reference import ReferenceProfile

log = logging.getLogger(__name__)

REBIN_NATIVE = "native"
REBIN_COMMON12 = "common12"

# cross-depth matching happens on a grid no finer than this
COMMON_GRID_BITS = 12


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """Monotone lookup table from source to reference intensities.

    Index 0 is pinned to 0; every other entry lies in [1, 2**b - 1] and the
    table never decreases. Construction re-checks all of that and raises
    rather than repairing, so a violation anywhere is loud.
    """

    table: np.ndarray  # uint16, length 2**bit_depth
    bit_depth: int

    def __post_init__(self):
        t = np.asarray(self.table)
        if not 1 <= self.bit_depth <= 16:
            raise ValueError(f"bit_depth must be in [1, 16], got {self.bit_depth}")
        if t.shape != (1 << self.bit_depth,):
            raise ValueError(f"table must have length {1 << self.bit_depth}, got {t.shape}")
        if t[0] != 0:
            raise ValueError("table[0] must be 0")
        body = t[1:].astype(np.int64)
        if body.size and (body.min() < 1 or body.max() > (1 << self.bit_depth) - 1):
            raise ValueError("table entries above index 0 must lie in [1, 2**b - 1]")
        if (np.diff(body) < 0).any():
            raise ValueError("table must be nondecreasing on indices >= 1")
        t = t.astype(np.uint16)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IntensityMap):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(self.table, other.table)


@dataclass(frozen=True)
class HarmonizeOptions:
    """Pipeline knobs; defaults mirror the plain foreground-matching recipe."""

    min_intensity: int = 1
    keep_largest_component: bool = False
    rebin_policy: str = REBIN_COMMON12

    def __post_init__(self):
        if self.min_intensity < 1:
            raise ValueError(f"min_intensity must be >= 1, got {self.min_intensity}")
        if self.rebin_policy not in (REBIN_NATIVE, REBIN_COMMON12):
            raise ValueError(f"rebin_policy must be native or common12, got {self.rebin_policy!r}")


def build_map(source: NormalizedCdf, reference: NormalizedCdf) -> IntensityMap:
    """Match two CDFs into a lookup table.

    For every source intensity p >= 1 the table holds the smallest
    reference intensity q >= 1 whose cumulative value is closest to the
    source's cumulative value at p. Ties go to the smallest q, which
    together with nondecreasing CDFs makes the result monotone.

    Implemented as a binary-search sweep over the reference CDF; agrees
    exactly with literal argmin evaluation because distinct CDF values are
    spaced far wider than one double ULP.
    """
    if source.bit_depth != reference.bit_depth:
        raise DimensionMismatch(
            f"bit depths differ: {source.bit_depth} vs {reference.bit_depth}"
        )
    m = (1 << source.bit_depth) - 1  # candidate intensities 1..m
    xs = source.values[1:]
    rs = reference.values[1:]
    j = np.searchsorted(rs, xs, side="left")  # first q-index with rs >= x, may be m
    below = np.clip(j - 1, 0, m - 1)
    above = np.clip(j, 0, m - 1)
    d_below = np.abs(xs - rs[below])
    d_above = np.abs(xs - rs[above])
    take_above = (j < m) & ((j == 0) | (d_above < d_below))
    # on a tie, or when below wins, the whole flat run of equal values ties;
    # its first index is the smallest q
    run_start = np.searchsorted(rs, rs[below], side="left")
    picked = np.where(take_above, above, run_start)
    table = np.zeros(m + 1, dtype=np.uint16)
    table[1:] = picked + 1
    return IntensityMap(table, source.bit_depth)


def expand_map(coarse: IntensityMap, bit_depth: int) -> IntensityMap:
    """Widen a coarse-grid map back to native depth.

    Each native intensity routes through its coarse bin and lands on the
    native-scale center of the matched coarse bin, clamped to [1, 2**b - 1].
    """
    if bit_depth < coarse.bit_depth:
        raise ValueError(
            f"cannot expand a {coarse.bit_depth}-bit map down to {bit_depth} bits"
        )
    if bit_depth == coarse.bit_depth:
        return coarse
    shift = bit_depth - coarse.bit_depth
    native_bins = np.arange(1 << bit_depth, dtype=np.int64)
    q = coarse.table[native_bins >> shift].astype(np.int64)
    values = (2 * q + 1) << (shift - 1)
    np.clip(values, 1, (1 << bit_depth) - 1, out=values)
    values[0] = 0
    return IntensityMap(values, bit_depth)


def apply_map(img: GrayImage, mask: ForegroundMask, imap: IntensityMap) -> GrayImage:
    """Look every masked pixel up in the table; everything else becomes 0."""
    if img.photometric != MONO2:
        raise PhotometricNotNormalized("apply_map requires a MONO2 image")
    if img.pixels.shape != mask.flags.shape:
        raise DimensionMismatch(f"image {img.pixels.shape} vs mask {mask.flags.shape}")
    if img.bit_depth != imap.bit_depth:
        raise DimensionMismatch(
            f"image depth {img.bit_depth} vs map depth {imap.bit_depth}"
        )
    out = np.where(mask.flags, imap.table[img.pixels], np.uint16(0))
    return GrayImage(out, img.bit_depth, MONO2)


def _resolve_grid(
    hist: Histogram, ref: ReferenceProfile, policy: str
) -> tuple[int, Histogram, NormalizedCdf, bool]:
    """Pick the matching grid and bring both sides onto it."""
    b_img, b_prof = hist.bit_depth, ref.bit_depth
    if b_img == b_prof:
        grid = b_img
    elif policy == REBIN_NATIVE:
        raise ProfileDepthMismatch(
            f"image is {b_img}-bit but profile is {b_prof}-bit and rebinning is disabled"
        )
    else:
        grid = min(b_img, b_prof, COMMON_GRID_BITS)
    src = rebin(hist, grid) if grid < b_img else hist
    if src.total == 0:
        raise EmptyForeground(f"no foreground left after rebinning to {grid} bits")
    ref_cdf = rebin_cdf(ref.cdf, grid) if grid < b_prof else ref.cdf
    return grid, src, ref_cdf, grid != b_img or grid != b_prof


def harmonize(
    img: GrayImage,
    ref: ReferenceProfile,
    opts: HarmonizeOptions | None = None,
) -> tuple[GrayImage, HarmonizeReport]:
    """Run the full pipeline against a reference profile.

    Steps: photometric normalization, foreground masking, optional
    largest-component cleanup, foreground histogram, grid reconciliation,
    CDF matching, masked application. The report carries the foreground
    size, dropped/zeroed pixel counts and the pre/post CDF distance to the
    reference on the matching grid.
    """
    opts = opts or HarmonizeOptions()
    work = to_mono2(img)
    mask = foreground_mask(work, opts.min_intensity)
    if opts.keep_largest_component:
        mask = largest_component(mask)
    if mask.count == 0:
        raise EmptyForeground(
            f"no pixels at or above min_intensity={opts.min_intensity}"
        )
    hist = fg_histogram(work, mask)
    dropped = mask.count - hist.total

    grid, src_hist, ref_cdf, rebinned = _resolve_grid(hist, ref, opts.rebin_policy)
    occupied_ref = int(np.count_nonzero(np.diff(ref_cdf.values) > 0))
    if occupied_ref == 1:
        log.warning("reference profile has a single occupied bin; foreground will collapse to it")
    src_cdf = normalize_cdf(src_hist)
    coarse_map = build_map(src_cdf, ref_cdf)
    native_map = expand_map(coarse_map, work.bit_depth)
    out = apply_map(work, mask, native_map)

    out_hist = fg_histogram(out, mask)
    out_hist = rebin(out_hist, grid) if grid < work.bit_depth else out_hist
    report = HarmonizeReport(
        foreground_count=mask.count,
        dropped_zero_valued=dropped,
        zeroed_outside_mask=int(np.count_nonzero((work.pixels > 0) & ~mask.flags)),
        pre_distance=cdf_l1(src_cdf, ref_cdf),
        post_distance=cdf_l1(normalize_cdf(out_hist), ref_cdf),
        rebin_applied=rebinned,
    )
    return out, report
