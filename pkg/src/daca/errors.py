"""Exception hierarchy.

Errors that indicate bad configuration or semantically invalid requests
derive from :class:`ConfigurationError`; malformed files derive from
:class:`FormatError`. The CLI maps the former to exit code 1 and the latter
(plus :class:`OSError`) to exit code 2.
"""


class DacaError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(DacaError, ValueError):
    pass


class FormatError(DacaError, ValueError):
    pass


# label files
class LabelError(FormatError):
    pass


class MalformedLine(LabelError):
    pass


class OutOfRange(LabelError):
    pass


class DegenerateBox(LabelError):
    pass


# image files
class UnsupportedFormat(FormatError):
    pass


class CorruptHeader(FormatError):
    pass


# pipeline
class NonDivisibleGrid(ConfigurationError):
    pass


class InvalidThreshold(ConfigurationError):
    pass


class InvalidParams(ConfigurationError):
    pass


class InvalidConfig(ConfigurationError):
    pass


class DimensionMismatch(ConfigurationError):
    pass


class NoConfidentRegion(DacaError):
    """The target image has no detections to select a region from."""


class EmptyDataset(ConfigurationError):
    pass


class NoGroundTruth(ConfigurationError):
    pass


class UnknownImage(DacaError, LookupError):
    """A ground-truth-backed detector was asked about an image it never saw."""
