"""Exception types shared across the package."""


class ViewaugError(ValueError):
    """Base class for all validation and geometry errors."""


class InvalidRotationError(ViewaugError):
    """Matrix is not a proper rotation (orthonormal, det +1)."""


class InvalidQuaternionError(ViewaugError):
    """Quaternion norm too far from 1."""


class InvalidDepthError(ViewaugError):
    """Depth value is non-positive or non-finite."""


class ShapeMismatchError(ViewaugError):
    """Array dimensions do not agree."""


class InsufficientViewsError(ViewaugError):
    """Fewer cameras than the operation requires."""


class DegenerateGeometryError(ViewaugError):
    """Camera configuration leaves the interpolation underdetermined."""


class SceneFormatError(ViewaugError):
    """Scene directory is missing files or holds malformed metadata."""


class BundleFormatError(ViewaugError):
    """Bundle manifest is missing, malformed, or references missing files."""


class BundleVersionError(BundleFormatError):
    """Bundle schema version is not supported."""
