"""Grayscale images and foreground masks.

Pixel buffers are immutable numpy arrays. Bit depth is declared, never
inferred from pixel content, so an image whose pixels never reach the top
of its range still bins over the full range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyForeground, PhotometricNotNormalized

MONO1 = "MONO1"
MONO2 = "MONO2"

_STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCT_8 = np.ones((3, 3), dtype=bool)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Rectangular buffer of unsigned intensities with a declared bit depth."""

    pixels: np.ndarray  # (height, width)
    bit_depth: int
    photometric: str = MONO2

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if not 1 <= self.bit_depth <= 16:
            raise ValueError(f"bit_depth must be in [1, 16], got {self.bit_depth}")
        if self.photometric not in (MONO1, MONO2):
            raise ValueError(f"photometric must be {MONO1} or {MONO2}, got {self.photometric!r}")
        if not np.issubdtype(px.dtype, np.integer):
            raise ValueError(f"pixels must be integers, got dtype {px.dtype}")
        lo, hi = int(px.min()), int(px.max())
        if lo < 0 or hi >= 1 << self.bit_depth:
            raise ValueError(
                f"pixel values [{lo}, {hi}] outside [0, {(1 << self.bit_depth) - 1}] "
                f"for bit_depth {self.bit_depth}"
            )
        object.__setattr__(self, "pixels", _frozen(px.astype(np.uint16)))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def max_value(self) -> int:
        """Top of the intensity range, 2**bit_depth - 1."""
        return (1 << self.bit_depth) - 1

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.photometric == other.photometric
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Per-pixel boolean foreground indicator."""

    flags: np.ndarray  # (height, width) bool

    def __post_init__(self):
        fl = np.asarray(self.flags)
        if fl.ndim != 2 or fl.shape[0] < 1 or fl.shape[1] < 1:
            raise ValueError(f"flags must be a non-empty 2-D array, got shape {fl.shape}")
        object.__setattr__(self, "flags", _frozen(fl.astype(bool)))
        object.__setattr__(self, "_count", int(np.count_nonzero(self.flags)))

    @property
    def count(self) -> int:
        """Number of foreground pixels."""
        return self._count

    @property
    def width(self) -> int:
        return self.flags.shape[1]

    @property
    def height(self) -> int:
        return self.flags.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ForegroundMask):
            return NotImplemented
        return np.array_equal(self.flags, other.flags)


def to_mono2(img: GrayImage) -> GrayImage:
    """Complement MONO1 pixel values so higher always means brighter."""
    if img.photometric == MONO2:
        return img
    return GrayImage(img.max_value - img.pixels, img.bit_depth, MONO2)


def foreground_mask(img: GrayImage, min_intensity: int = 1) -> ForegroundMask:
    """Flag every pixel at or above ``min_intensity``.

    The default threshold of 1 selects exactly the nonzero pixels; raise it
    for detectors whose background carries noise.
    """
    if img.photometric != MONO2:
        raise PhotometricNotNormalized("foreground_mask requires a MONO2 image; call to_mono2 first")
    if min_intensity < 1:
        raise ValueError(f"min_intensity must be >= 1, got {min_intensity}")
    return ForegroundMask(img.pixels >= min_intensity)


def largest_component(mask: ForegroundMask, connectivity: int = 8) -> ForegroundMask:
    """Keep only the largest connected true-region of the mask.

    Ties are broken toward the component whose first pixel has the lowest
    row-major index. Intended as a pragmatic cleanup for burn-in blobs that
    are disconnected from the main foreground.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    if mask.count == 0:
        raise EmptyForeground("mask has no foreground pixels")
    structure = _STRUCT_8 if connectivity == 8 else _STRUCT_4
    labels, n = ndimage.label(mask.flags, structure=structure)
    if n == 1:
        return mask
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    biggest = sizes.max()
    candidates = np.flatnonzero(sizes == biggest)
    if len(candidates) > 1:
        flat = labels.ravel()
        # first True position per tied label decides the winner
        candidates = sorted(candidates, key=lambda lab: int(np.argmax(flat == lab)))
    keep = int(candidates[0])
    return ForegroundMask(labels == keep)
