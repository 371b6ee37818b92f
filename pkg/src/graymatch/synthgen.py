"""Seeded synthetic phantoms and vendor/energy style transforms.

Noise comes from a SplitMix64 hash of (seed, pixel index), so generation is
bit-identical across platforms and trivially parallel: no stateful RNG is
ever consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PhotometricNotNormalized
from .image import MONO2, GrayImage

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64."""
    x = (x + _GOLDEN) & _MASK64
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9) & _MASK64
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB) & _MASK64
    return x ^ (x >> np.uint64(31))


def _hash_unit(seed: int, index: np.ndarray, stream: int) -> np.ndarray:
    """Deterministic uniforms in [0, 1) for (seed, stream) at each index."""
    base = np.uint64((seed * 0x9E3779B97F4A7C15 + stream) & 0xFFFFFFFFFFFFFFFF)
    h = _splitmix64((base + index.astype(np.uint64) * _GOLDEN) & _MASK64)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class VendorStyle:
    """Gamma/gain/offset stand-in for device-specific contrast behaviour."""

    gamma: float
    gain: float = 1.0
    offset: int = 0
    label: str = ""

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be finite and positive, got {self.gamma}")
        if not (np.isfinite(self.gain) and self.gain > 0):
            raise ValueError(f"gain must be finite and positive, got {self.gain}")


def synth_image(seed: int, width: int, height: int, bit_depth: int) -> GrayImage:
    """Half-disc phantom anchored to the left edge, background exactly 0.

    The foreground carries a smooth radial gradient spanning roughly
    [0.1, 0.9] of the intensity range plus a little hashed noise; the disc
    radius and vertical center wobble deterministically with the seed.
    """
    if width < 16 or height < 16:
        raise ValueError(f"dimensions must be at least 16x16, got {width}x{height}")
    if not 1 <= bit_depth <= 16:
        raise ValueError(f"bit_depth must be in [1, 16], got {bit_depth}")
    top = (1 << bit_depth) - 1

    geom = _hash_unit(seed, np.arange(2, dtype=np.uint64), stream=1)
    radius = (0.72 + 0.2 * geom[0]) * min(height / 2.0, width - 1.0)
    cy = (height - 1) / 2.0 + (geom[1] - 0.5) * 0.2 * height

    values = np.empty((height, width), dtype=np.uint16)
    dx2 = np.arange(width, dtype=np.float64) ** 2
    # row blocks keep the float64 temporaries small on large rasters
    block = max(1, (1 << 22) // width)
    for y0 in range(0, height, block):
        y1 = min(height, y0 + block)
        dy2 = (np.arange(y0, y1, dtype=np.float64) - cy) ** 2
        dist = np.sqrt(dy2[:, None] + dx2[None, :])
        t = np.clip(1.0 - dist / radius, 0.0, 1.0)
        levels = (0.1 + 0.8 * (t * t * (3.0 - 2.0 * t))) * top
        idx = np.arange(y0 * width, y1 * width, dtype=np.uint64).reshape(y1 - y0, width)
        noise = (_hash_unit(seed, idx, stream=2) - 0.5) * (0.04 * top)
        chunk = np.clip(np.rint(levels + noise), 1, top).astype(np.uint16)
        chunk[dist > radius] = 0
        values[y0:y1] = chunk
    return GrayImage(values, bit_depth, MONO2)


def vendor_transform(img: GrayImage, style: VendorStyle) -> GrayImage:
    """Re-grade foreground intensities through a gamma/gain/offset curve.

    Zero pixels stay zero; everything else is clamped into [1, 2**b - 1] so
    the transform never grows or shrinks the foreground.
    """
    if img.photometric != MONO2:
        raise PhotometricNotNormalized("vendor_transform requires a MONO2 image")
    top = img.max_value
    levels = np.arange((1 << img.bit_depth), dtype=np.float64) / top
    lut = np.rint(style.gain * top * np.power(levels, style.gamma) + style.offset)
    lut = np.clip(lut, 1, top).astype(np.uint16)
    lut[0] = 0
    return GrayImage(lut[img.pixels], img.bit_depth, MONO2)
