"""Exception types shared across the toolkit."""


class HarmonizationError(Exception):
    """Base class for every error the toolkit raises on bad data."""


class PhotometricNotNormalized(HarmonizationError):
    """Operation requires a MONO2 image but received MONO1."""


class EmptyForeground(HarmonizationError):
    """No usable foreground pixels (empty mask or zero-total histogram)."""


class DimensionMismatch(HarmonizationError):
    """Shapes or bit depths of the operands disagree."""


class DepthMismatch(DimensionMismatch):
    """Bit depths cannot be reconciled while aggregating reference images."""


class ProfileDepthMismatch(DimensionMismatch):
    """Profile grid cannot be reconciled with the image bit depth."""


class MalformedProfile(HarmonizationError):
    """Reference profile file fails schema or invariant validation."""


class MalformedFile(HarmonizationError):
    """Image file violates its format specification."""


class UnsupportedTransferSyntax(HarmonizationError):
    """DICOM transfer syntax outside the uncompressed little-endian subset."""


class UnsupportedPhotometric(HarmonizationError):
    """DICOM photometric interpretation other than MONOCHROME1/2."""


class MissingTag(HarmonizationError):
    """A required DICOM tag is absent."""

    def __init__(self, name: str):
        super().__init__(f"required DICOM tag missing: {name}")
        self.name = name
