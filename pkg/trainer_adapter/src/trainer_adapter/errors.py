class AdapterError(ValueError):
    """Base for everything this package raises on bad input."""


class BundleSchemaError(AdapterError):
    """The bundle directory does not match the expected layout or version."""


class FrameShapeError(AdapterError):
    """A rendered image does not match the frame it is scored against."""
