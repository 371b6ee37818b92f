"""Foreground-only histograms and normalized CDFs.

Bin 0 is the background bin and is forced empty everywhere in this module;
the cumulative form is always computed once from exact integer counts so
results do not depend on accumulation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyForeground, PhotometricNotNormalized
from .image import MONO2, ForegroundMask, GrayImage

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Per-bin foreground counts over the full intensity range of a depth."""

    counts: np.ndarray  # int64, length 2**bit_depth, counts[0] == 0
    bit_depth: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if not 1 <= self.bit_depth <= 16:
            raise ValueError(f"bit_depth must be in [1, 16], got {self.bit_depth}")
        if c.shape != (1 << self.bit_depth,):
            raise ValueError(f"counts must have length {1 << self.bit_depth}, got {c.shape}")
        if c[0] != 0:
            raise ValueError("counts[0] must be 0 (background bin is always empty)")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "_total", int(c.sum()))

    @property
    def total(self) -> int:
        """Total foreground pixel count (sum over bins >= 1)."""
        return self._total

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(self.counts, other.counts)


@dataclass(frozen=True, eq=False)
class NormalizedCdf:
    """Normalized cumulative distribution over the same bins as a Histogram."""

    values: np.ndarray  # float64, length 2**bit_depth
    bit_depth: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if not 1 <= self.bit_depth <= 16:
            raise ValueError(f"bit_depth must be in [1, 16], got {self.bit_depth}")
        if v.shape != (1 << self.bit_depth,):
            raise ValueError(f"values must have length {1 << self.bit_depth}, got {v.shape}")
        if v[0] != 0.0:
            raise ValueError("values[0] must be 0")
        if (np.diff(v) < 0).any():
            raise ValueError("values must be nondecreasing")
        if v[-1] > 1.0 or (v < 0.0).any():
            raise ValueError("values must lie in [0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NormalizedCdf):
            return NotImplemented
        return self.bit_depth == other.bit_depth and np.array_equal(self.values, other.values)


def fg_histogram(img: GrayImage, mask: ForegroundMask) -> Histogram:
    """Count masked pixels per intensity; bin 0 stays empty.

    Masked pixels of value 0 (possible with hand-built masks) are dropped
    and logged rather than counted, so the background bin never carries
    weight into the CDF.
    """
    if img.photometric != MONO2:
        raise PhotometricNotNormalized("fg_histogram requires a MONO2 image")
    if img.pixels.shape != mask.flags.shape:
        raise DimensionMismatch(
            f"image {img.pixels.shape} vs mask {mask.flags.shape}"
        )
    # pixels outside the mask collapse into bin 0, which is discarded anyway
    masked = img.pixels * mask.flags
    counts = np.bincount(masked.ravel(), minlength=1 << img.bit_depth).astype(np.int64)
    counts[0] = 0
    hist = Histogram(counts, img.bit_depth)
    if hist.total == 0:
        raise EmptyForeground("mask selects no pixels of intensity >= 1")
    dropped = mask.count - hist.total
    if dropped:
        log.warning("dropped %d masked zero-valued pixels from the histogram", dropped)
    return hist


def normalize_cdf(hist: Histogram) -> NormalizedCdf:
    """Cumulative counts divided once by the total; exact at the terminal bin."""
    if hist.total == 0:
        raise EmptyForeground("cannot normalize an empty histogram")
    values = np.cumsum(hist.counts, dtype=np.int64) / hist.total
    return NormalizedCdf(values, hist.bit_depth)


def rebin(hist: Histogram, target_bits: int) -> Histogram:
    """Merge histogram bins down to ``target_bits`` of resolution.

    Output bin j accumulates every input bin k with k >> (b - t) == j. Input
    bins that land in output bin 0 are dropped (and logged), keeping the
    background bin empty; the dropped remainder equals
    ``hist.total - result.total``.
    """
    if target_bits < 1:
        raise ValueError(f"target_bits must be >= 1, got {target_bits}")
    if target_bits > hist.bit_depth:
        raise ValueError(
            f"cannot rebin {hist.bit_depth}-bit histogram up to {target_bits} bits"
        )
    if target_bits == hist.bit_depth:
        return hist
    shift = hist.bit_depth - target_bits
    merged = hist.counts.reshape(1 << target_bits, 1 << shift).sum(axis=1)
    remainder = int(merged[0])
    merged[0] = 0
    if remainder:
        log.warning(
            "rebin %d->%d bits dropped %d pixels whose intensity fell below one coarse bin",
            hist.bit_depth, target_bits, remainder,
        )
    return Histogram(merged, target_bits)


def rebin_cdf(cdf: NormalizedCdf, target_bits: int) -> NormalizedCdf:
    """Exact coarse-grid view of a CDF, matching rebin-then-normalize.

    Takes the cumulative value at the top of each coarse bin, removes the
    mass trapped below coarse bin 0 and renormalizes. Raises EmptyForeground
    when the whole distribution sits below one coarse bin.
    """
    if target_bits < 1:
        raise ValueError(f"target_bits must be >= 1, got {target_bits}")
    if target_bits > cdf.bit_depth:
        raise ValueError(f"cannot rebin {cdf.bit_depth}-bit CDF up to {target_bits} bits")
    if target_bits == cdf.bit_depth:
        return cdf
    shift = cdf.bit_depth - target_bits
    ends = cdf.values[(np.arange(1, (1 << target_bits) + 1) << shift) - 1]
    low_mass = ends[0]
    if low_mass >= 1.0:
        raise EmptyForeground("entire distribution lies below one coarse bin")
    values = (ends - low_mass) / (1.0 - low_mass)
    values[0] = 0.0
    return NormalizedCdf(values, target_bits)


def merge(a: Histogram, b: Histogram) -> Histogram:
    """Bin-wise sum of two histograms of equal depth."""
    if a.bit_depth != b.bit_depth:
        raise DimensionMismatch(f"bit depths differ: {a.bit_depth} vs {b.bit_depth}")
    return Histogram(a.counts + b.counts, a.bit_depth)
