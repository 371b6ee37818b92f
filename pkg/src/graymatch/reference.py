"""Reference (target-style) profiles: aggregation, validation, JSON round trip."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import DepthMismatch, EmptyForeground, MalformedProfile
from .histogram import Histogram, NormalizedCdf, fg_histogram, merge, normalize_cdf, rebin
from .image import ForegroundMask, GrayImage

METHOD_AVERAGED = "averaged"
METHOD_POOLED = "pooled"

PROFILE_VERSION = 1


def _default_created() -> str:
    """Current UTC time, or SOURCE_DATE_EPOCH when set (reproducible builds)."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        stamp = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
    else:
        stamp = datetime.now(timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True, eq=False)
class ReferenceProfile:
    """Serialized target CDF with provenance metadata."""

    cdf: NormalizedCdf
    method: str
    image_count: int
    label: str = ""
    created: str = ""

    def __post_init__(self):
        if self.method not in (METHOD_AVERAGED, METHOD_POOLED):
            raise ValueError(f"method must be averaged or pooled, got {self.method!r}")
        if self.image_count < 1:
            raise ValueError(f"image_count must be >= 1, got {self.image_count}")
        if not self.created:
            object.__setattr__(self, "created", _default_created())

    @property
    def bit_depth(self) -> int:
        return self.cdf.bit_depth

    def __eq__(self, other) -> bool:
        if not isinstance(other, ReferenceProfile):
            return NotImplemented
        return (
            self.cdf == other.cdf
            and self.method == other.method
            and self.image_count == other.image_count
            and self.label == other.label
            and self.created == other.created
        )


def build_reference(
    images: list[tuple[GrayImage, ForegroundMask]],
    method: str = METHOD_AVERAGED,
    target_bits: int | None = None,
    label: str = "",
    created: str = "",
) -> ReferenceProfile:
    """Aggregate the foreground CDFs of several images into one profile.

    ``averaged`` weights each image equally regardless of its foreground
    size; ``pooled`` merges the raw histograms so large foregrounds dominate.
    Every image is rebinned to ``target_bits`` (default: the smallest input
    depth) before aggregation.
    """
    if not images:
        raise ValueError("need at least one image to build a reference")
    if method not in (METHOD_AVERAGED, METHOD_POOLED):
        raise ValueError(f"method must be averaged or pooled, got {method!r}")
    if target_bits is None:
        target_bits = min(img.bit_depth for img, _ in images)

    hists: list[Histogram] = []
    for i, (img, mask) in enumerate(images):
        if img.bit_depth < target_bits:
            raise DepthMismatch(
                f"image {i} is {img.bit_depth}-bit, below the {target_bits}-bit target grid"
            )
        try:
            hists.append(rebin(fg_histogram(img, mask), target_bits))
        except EmptyForeground as exc:
            raise EmptyForeground(f"image {i} has no usable foreground: {exc}") from exc
    for i, h in enumerate(hists):
        if h.total == 0:
            raise EmptyForeground(f"image {i} lost all foreground when rebinned to {target_bits} bits")

    if method == METHOD_POOLED:
        pooled = hists[0]
        for h in hists[1:]:
            pooled = merge(pooled, h)
        cdf = normalize_cdf(pooled)
    else:
        stacked = np.stack([normalize_cdf(h).values for h in hists])
        cdf = NormalizedCdf(stacked.mean(axis=0), target_bits)

    return ReferenceProfile(
        cdf=cdf,
        method=method,
        image_count=len(images),
        label=label,
        created=created or _default_created(),
    )


def save_profile(profile: ReferenceProfile, path: str) -> None:
    """Write the profile as a versioned JSON document (atomically)."""
    doc = {
        "version": PROFILE_VERSION,
        "bit_depth": profile.bit_depth,
        "method": profile.method,
        "image_count": profile.image_count,
        "label": profile.label,
        "created": profile.created,
        "cdf": [float(v) for v in profile.cdf.values],
    }
    payload = json.dumps(doc, indent=1) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_profile(path: str) -> ReferenceProfile:
    """Read and fully re-validate a profile written by save_profile."""
    try:
        with open(path, "r") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedProfile(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedProfile(f"{path}: profile must be a JSON object")
    for key in ("version", "bit_depth", "method", "image_count", "label", "created", "cdf"):
        if key not in doc:
            raise MalformedProfile(f"{path}: missing key {key!r}")
    if doc["version"] != PROFILE_VERSION:
        raise MalformedProfile(f"{path}: unsupported version {doc['version']!r}")
    bit_depth = doc["bit_depth"]
    if not isinstance(bit_depth, int) or not 1 <= bit_depth <= 16:
        raise MalformedProfile(f"{path}: bit_depth must be an integer in [1, 16]")
    cdf_values = doc["cdf"]
    if not isinstance(cdf_values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in cdf_values
    ):
        raise MalformedProfile(f"{path}: cdf must be a list of numbers")
    values = np.asarray(cdf_values, dtype=np.float64)
    if values.shape != (1 << bit_depth,):
        raise MalformedProfile(
            f"{path}: cdf length {values.size} does not match bit_depth {bit_depth}"
        )
    if values[-1] != 1.0:
        raise MalformedProfile(f"{path}: cdf must end at exactly 1, got {values[-1]!r}")
    try:
        cdf = NormalizedCdf(values, bit_depth)
    except ValueError as exc:
        raise MalformedProfile(f"{path}: {exc}") from exc
    if not isinstance(doc["image_count"], int) or isinstance(doc["image_count"], bool):
        raise MalformedProfile(f"{path}: image_count must be an integer")
    if not isinstance(doc["label"], str) or not isinstance(doc["created"], str):
        raise MalformedProfile(f"{path}: label and created must be strings")
    try:
        return ReferenceProfile(
            cdf=cdf,
            method=doc["method"],
            image_count=doc["image_count"],
            label=doc["label"],
            created=doc["created"],
        )
    except ValueError as exc:
        raise MalformedProfile(f"{path}: {exc}") from exc
