"""Exception types shared across the package."""


class ScpError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ScpError, ValueError):
    """Vector operands have mismatched lengths."""


class ConfigurationError(ScpError, ValueError):
    """Two feature maps do not share the same layer structure."""


class BoundsError(ScpError, IndexError):
    """A pixel coordinate lies outside the addressed grid."""


class SizeError(ScpError, ValueError):
    """An image is too small for the requested operation."""


class CapacityError(ScpError, ValueError):
    """A requested count exceeds what the input can supply."""


class UnknownIdError(ScpError, KeyError):
    """An image id is not present in the dataset."""


class DataError(ScpError, ValueError):
    """A dataset entry is missing required content (keypoints, landmarks)."""


class SchemaError(ScpError, ValueError):
    """Landmark sets disagree on their fixed per-dataset length."""


class DegenerateVarianceError(ScpError, ValueError):
    """A correlation was requested on a constant series."""


class ValidationError(ScpError, ValueError):
    """A domain object violates one of its invariants."""


# Feature-file parse errors.  Each malformed-input class is distinct so
# callers can tell apart a wrong file from a damaged one.

class FormatError(ScpError, ValueError):
    """Base class for feature-file parse failures."""


class MagicError(FormatError):
    """The file does not start with the expected magic bytes."""


class VersionError(FormatError):
    """The file declares an unsupported format version."""


class TruncatedError(FormatError):
    """The file ends before the declared payload is complete."""


class DimensionOverflowError(FormatError):
    """Declared grid dimensions exceed the supported payload size."""


class StructureError(FormatError):
    """Header fields are internally inconsistent (layer geometry, norms)."""


class ManifestError(ScpError, ValueError):
    """A dataset manifest is malformed or references missing files."""
