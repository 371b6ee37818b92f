"""Bit-exact image ingestion and emission.

PGM (binary P5) is the canonical fixture and output format: tiny header,
MSB-first 16-bit samples, no compression. A JSON sidecar at ``<path>.json``
carries photometric interpretation, vendor/energy metadata and, for
harmonized outputs, provenance. DICOM support is a read-only ingestion path
restricted to uncompressed little-endian transfer syntaxes.
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import (
    MalformedFile,
    MissingTag,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
)
from .image import MONO1, MONO2, GrayImage

log = logging.getLogger(__name__)

ENERGY_LOW = "low"
ENERGY_HIGH = "high"

_WHITESPACE = b" \t\r\n\x0b\x0c"


@dataclass(frozen=True)
class ImageRecord:
    """An image plus the file-level metadata that travelled with it."""

    image: GrayImage
    source_path: str
    vendor: str | None = None
    energy: str | None = None
    original_photometric: str = MONO2


def sidecar_path(path: str) -> str:
    return str(path) + ".json"


def _read_sidecar(path: str) -> dict:
    sc = sidecar_path(path)
    if not os.path.exists(sc):
        return {}
    try:
        with open(sc, "r") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedFile(f"{sc}: invalid JSON sidecar: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedFile(f"{sc}: sidecar must be a JSON object")
    photometric = doc.get("photometric", MONO2)
    if photometric not in (MONO1, MONO2):
        raise MalformedFile(f"{sc}: photometric must be MONO1 or MONO2, got {photometric!r}")
    energy = doc.get("energy")
    if energy not in (None, ENERGY_LOW, ENERGY_HIGH):
        raise MalformedFile(f"{sc}: energy must be low or high, got {energy!r}")
    vendor = doc.get("vendor")
    if vendor is not None and not isinstance(vendor, str):
        raise MalformedFile(f"{sc}: vendor must be a string")
    return doc


def read_pgm(path: str) -> ImageRecord:
    """Decode a binary PGM file.

    Header tokens may be separated by any whitespace and ``#`` comments per
    the PGM specification. ``maxval`` must lie in [255, 65535]; samples are
    two bytes most-significant-byte-first whenever maxval > 255. The pixel
    payload must be exactly the advertised size.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos] in _WHITESPACE:
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in _WHITESPACE:
            pos += 1
        if start == pos:
            raise MalformedFile(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = token()
    if magic != b"P5":
        raise MalformedFile(f"{path}: bad magic {magic!r}, expected P5")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as exc:
        raise MalformedFile(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise MalformedFile(f"{path}: invalid dimensions {width}x{height}")
    if not 255 <= maxval <= 65535:
        raise MalformedFile(f"{path}: maxval {maxval} outside supported range [255, 65535]")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise MalformedFile(f"{path}: missing whitespace after maxval")
    pos += 1

    two_byte = maxval > 255
    expected = width * height * (2 if two_byte else 1)
    payload = data[pos:]
    if len(payload) < expected:
        raise MalformedFile(
            f"{path}: truncated pixel data ({len(payload)} bytes, expected {expected})"
        )
    if len(payload) > expected:
        raise MalformedFile(f"{path}: {len(payload) - expected} trailing bytes after pixel data")
    dtype = ">u2" if two_byte else np.uint8
    pixels = np.frombuffer(payload, dtype=dtype).reshape(height, width).astype(np.uint16)
    if int(pixels.max()) > maxval:
        raise MalformedFile(f"{path}: sample {int(pixels.max())} exceeds maxval {maxval}")

    sidecar = _read_sidecar(path)
    photometric = sidecar.get("photometric", MONO2)
    image = GrayImage(pixels, maxval.bit_length(), photometric)
    return ImageRecord(
        image=image,
        source_path=str(path),
        vendor=sidecar.get("vendor"),
        energy=sidecar.get("energy"),
        original_photometric=photometric,
    )


def _atomic_write(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.chmod(tmp, 0o644)  # mkstemp defaults to 0600
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(record: ImageRecord, path: str, provenance: dict | None = None) -> None:
    """Emit binary P5 with maxval 2**b - 1 plus the JSON sidecar.

    Only depths the PGM reader accepts round-trip (8..16 bits); in-memory
    images below 8 bits are a test construct and cannot be written.
    """
    img = record.image
    if img.bit_depth < 8:
        raise ValueError(f"PGM files need bit_depth >= 8, got {img.bit_depth}")
    maxval = img.max_value
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if maxval > 255:
        body = img.pixels.astype(">u2").tobytes()
    else:
        body = img.pixels.astype(np.uint8).tobytes()
    _atomic_write(path, header + body)

    sidecar: dict = {
        "photometric": img.photometric,
        "vendor": record.vendor,
        "energy": record.energy,
    }
    if provenance:
        sidecar["harmonization"] = provenance
    _atomic_write(
        sidecar_path(path),
        (json.dumps(sidecar, indent=1, sort_keys=True) + "\n").encode("ascii"),
    )


# ---------------------------------------------------------------------------
# DICOM (read-only, uncompressed little endian only)
# ---------------------------------------------------------------------------

_IMPLICIT_VR_LE = "1.2.840.10008.1.2"
_EXPLICIT_VR_LE = "1.2.840.10008.1.2.1"
_LONG_VRS = {b"OB", b"OW", b"OF", b"OD", b"OL", b"SQ", b"UC", b"UR", b"UT", b"UN"}

_TAG_TRANSFER_SYNTAX = (0x0002, 0x0010)
_TAG_MANUFACTURER = (0x0008, 0x0070)
_TAG_PHOTOMETRIC = (0x0028, 0x0004)
_TAG_ROWS = (0x0028, 0x0010)
_TAG_COLUMNS = (0x0028, 0x0011)
_TAG_BITS_ALLOCATED = (0x0028, 0x0100)
_TAG_BITS_STORED = (0x0028, 0x0101)
_TAG_PIXEL_REPRESENTATION = (0x0028, 0x0103)
_TAG_PIXEL_DATA = (0x7FE0, 0x0010)
_RESCALE_VOI_TAGS = {
    (0x0028, 0x1050): "WindowCenter",
    (0x0028, 0x1051): "WindowWidth",
    (0x0028, 0x1052): "RescaleIntercept",
    (0x0028, 0x1053): "RescaleSlope",
    (0x0028, 0x3010): "VOILUTSequence",
}


def _parse_element(data: bytes, pos: int, explicit: bool, path: str):
    """Return ((group, element), value_bytes, next_pos)."""
    if pos + 8 > len(data):
        raise MalformedFile(f"{path}: truncated DICOM element at offset {pos}")
    group, elem = struct.unpack_from("<HH", data, pos)
    if explicit:
        vr = data[pos + 4 : pos + 6]
        if vr in _LONG_VRS:
            if pos + 12 > len(data):
                raise MalformedFile(f"{path}: truncated DICOM element at offset {pos}")
            (length,) = struct.unpack_from("<I", data, pos + 8)
            value_at = pos + 12
        else:
            (length,) = struct.unpack_from("<H", data, pos + 6)
            value_at = pos + 8
    else:
        (length,) = struct.unpack_from("<I", data, pos + 4)
        value_at = pos + 8
    if length == 0xFFFFFFFF:
        raise MalformedFile(
            f"{path}: undefined-length element ({group:04X},{elem:04X}) not supported"
        )
    end = value_at + length
    if end > len(data):
        raise MalformedFile(f"{path}: element ({group:04X},{elem:04X}) overruns the file")
    return (group, elem), data[value_at:end], end


def _us(value: bytes, name: str, path: str) -> int:
    if len(value) != 2:
        raise MalformedFile(f"{path}: tag {name} must be a 2-byte unsigned short")
    return struct.unpack("<H", value)[0]


def _text(value: bytes) -> str:
    return value.decode("ascii", errors="replace").strip("\x00 ").strip()


def read_dicom(path: str) -> ImageRecord:
    """Decode a DICOM part-10 file into a GrayImage plus metadata.

    Scope is deliberately narrow: implicit or explicit VR little endian,
    single-frame unsigned grayscale, MONOCHROME1/2 only. Rescale slope and
    intercept and VOI LUTs are never applied (the stored pixel values are
    what downstream statistics run on); their presence is logged.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 132 or data[128:132] != b"DICM":
        raise MalformedFile(f"{path}: missing DICM marker; not a DICOM part-10 file")

    # file meta group is always explicit VR little endian
    pos = 132
    transfer_syntax = None
    while pos + 8 <= len(data):
        group = struct.unpack_from("<H", data, pos)[0]
        if group != 0x0002:
            break
        tag, value, pos = _parse_element(data, pos, explicit=True, path=path)
        if tag == _TAG_TRANSFER_SYNTAX:
            transfer_syntax = _text(value)
    if transfer_syntax is None:
        raise MissingTag("TransferSyntaxUID")
    if transfer_syntax == _IMPLICIT_VR_LE:
        explicit = False
    elif transfer_syntax == _EXPLICIT_VR_LE:
        explicit = True
    else:
        raise UnsupportedTransferSyntax(
            f"{path}: transfer syntax {transfer_syntax} not supported "
            "(uncompressed little endian only)"
        )

    elements: dict[tuple[int, int], bytes] = {}
    while pos + 8 <= len(data):
        tag, value, pos = _parse_element(data, pos, explicit, path)
        elements[tag] = value
        if tag == _TAG_PIXEL_DATA:
            break

    def require(tag: tuple[int, int], name: str) -> bytes:
        if tag not in elements:
            raise MissingTag(name)
        return elements[tag]

    rows = _us(require(_TAG_ROWS, "Rows"), "Rows", path)
    cols = _us(require(_TAG_COLUMNS, "Columns"), "Columns", path)
    bits_allocated = _us(require(_TAG_BITS_ALLOCATED, "BitsAllocated"), "BitsAllocated", path)
    bits_stored = _us(require(_TAG_BITS_STORED, "BitsStored"), "BitsStored", path)
    pixel_repr = _us(
        require(_TAG_PIXEL_REPRESENTATION, "PixelRepresentation"), "PixelRepresentation", path
    )
    photometric_raw = _text(require(_TAG_PHOTOMETRIC, "PhotometricInterpretation"))
    pixel_data = require(_TAG_PIXEL_DATA, "PixelData")

    if photometric_raw == "MONOCHROME1":
        photometric = MONO1
    elif photometric_raw == "MONOCHROME2":
        photometric = MONO2
    else:
        raise UnsupportedPhotometric(
            f"{path}: photometric interpretation {photometric_raw!r} not supported"
        )
    if pixel_repr != 0:
        raise MalformedFile(f"{path}: signed pixel data (PixelRepresentation=1) not supported")
    if bits_allocated not in (8, 16):
        raise MalformedFile(f"{path}: BitsAllocated must be 8 or 16, got {bits_allocated}")
    if not 1 <= bits_stored <= bits_allocated:
        raise MalformedFile(
            f"{path}: BitsStored {bits_stored} inconsistent with BitsAllocated {bits_allocated}"
        )
    if rows < 1 or cols < 1:
        raise MalformedFile(f"{path}: invalid dimensions {rows}x{cols}")

    present = [name for tag, name in _RESCALE_VOI_TAGS.items() if tag in elements]
    if present:
        log.info(
            "%s: ignoring display transform tags (%s); stored pixel values are used as-is",
            path, ", ".join(sorted(present)),
        )

    sample_bytes = bits_allocated // 8
    expected = rows * cols * sample_bytes
    if len(pixel_data) == expected + 1 and expected % 2 == 1:
        pixel_data = pixel_data[:expected]  # even-length padding byte
    if len(pixel_data) != expected:
        raise MalformedFile(
            f"{path}: PixelData has {len(pixel_data)} bytes, expected {expected}"
        )
    dtype = "<u2" if sample_bytes == 2 else np.uint8
    pixels = np.frombuffer(pixel_data, dtype=dtype).reshape(rows, cols).astype(np.uint16)
    top = (1 << bits_stored) - 1
    if int(pixels.max()) > top:
        raise MalformedFile(
            f"{path}: sample {int(pixels.max())} exceeds 2**BitsStored - 1 = {top}"
        )

    vendor = None
    if _TAG_MANUFACTURER in elements:
        vendor = _text(elements[_TAG_MANUFACTURER]) or None

    image = GrayImage(pixels, bits_stored, photometric)
    return ImageRecord(
        image=image,
        source_path=str(path),
        vendor=vendor,
        energy=None,
        original_photometric=photometric,
    )


def read_image(path: str) -> ImageRecord:
    """Dispatch on extension: .pgm -> read_pgm, .dcm/.dicom -> read_dicom."""
    lower = str(path).lower()
    if lower.endswith(".pgm"):
        return read_pgm(path)
    if lower.endswith((".dcm", ".dicom")):
        return read_dicom(path)
    raise MalformedFile(f"{path}: unrecognized image extension (expected .pgm, .dcm or .dicom)")
