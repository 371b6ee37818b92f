"""Foreground-only CDF matching for high-bit-depth grayscale images.

Aligns the foreground intensity distribution of grayscale images to a
reference style: background pixels are excluded from every statistic, a
monotone lookup table is built by matching normalized CDFs, and the table
is applied only where the foreground mask is true.
"""

from .errors import (
    DepthMismatch,
    DimensionMismatch,
    EmptyForeground,
    HarmonizationError,
    MalformedFile,
    MalformedProfile,
    MissingTag,
    PhotometricNotNormalized,
    ProfileDepthMismatch,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
)
from .formats import ImageRecord, read_dicom, read_image, read_pgm, write_pgm
from .harmonize import (
    REBIN_COMMON12,
    REBIN_NATIVE,
    HarmonizeOptions,
    IntensityMap,
    apply_map,
    build_map,
    expand_map,
    harmonize,
)
from .histogram import (
    Histogram,
    NormalizedCdf,
    fg_histogram,
    merge,
    normalize_cdf,
    rebin,
    rebin_cdf,
)
from .image import (
    MONO1,
    MONO2,
    ForegroundMask,
    GrayImage,
    foreground_mask,
    largest_component,
    to_mono2,
)
from .metrics import GapReport, HarmonizeReport, cdf_l1, gap_report, kl_divergence
from .reference import ReferenceProfile, build_reference, load_profile, save_profile
from .synthgen import VendorStyle, synth_image, vendor_transform

__version__ = "0.1.0"

__all__ = [
    "DepthMismatch",
    "DimensionMismatch",
    "EmptyForeground",
    "ForegroundMask",
    "GapReport",
    "GrayImage",
    "HarmonizationError",
    "HarmonizeOptions",
    "HarmonizeReport",
    "Histogram",
    "ImageRecord",
    "IntensityMap",
    "MalformedFile",
    "MalformedProfile",
    "MissingTag",
    "MONO1",
    "MONO2",
    "NormalizedCdf",
    "PhotometricNotNormalized",
    "ProfileDepthMismatch",
    "REBIN_COMMON12",
    "REBIN_NATIVE",
    "ReferenceProfile",
    "UnsupportedPhotometric",
    "UnsupportedTransferSyntax",
    "VendorStyle",
    "apply_map",
    "build_map",
    "build_reference",
    "cdf_l1",
    "expand_map",
    "fg_histogram",
    "foreground_mask",
    "gap_report",
    "harmonize",
    "kl_divergence",
    "largest_component",
    "load_profile",
    "merge",
    "normalize_cdf",
    "read_dicom",
    "read_image",
    "read_pgm",
    "rebin",
    "rebin_cdf",
    "save_profile",
    "synth_image",
    "to_mono2",
    "vendor_transform",
    "write_pgm",
]
