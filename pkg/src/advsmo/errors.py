"""Exception taxonomy. Every failure mode the toolkit reports gets its own type."""


class AdvsmoError(Exception):
    """Base class for all toolkit errors."""


class UnsupportedBitDepthError(AdvsmoError):
    """PNG input is not 8 bits per sample."""


class CorruptImageError(AdvsmoError):
    """File exists but cannot be decoded as a PNG."""


class DimensionMismatchError(AdvsmoError):
    """Two images/channels that must share dimensions do not."""


class ImageTooSmallError(AdvsmoError):
    """Image smaller than the metric's minimum window."""


class DegenerateKernelError(AdvsmoError):
    """Raw kernel weights sum too close to zero to normalize."""


class KernelTooLargeError(AdvsmoError):
    """Kernel side exceeds an image dimension."""


class WindowTooLargeError(AdvsmoError):
    """Defense filter window exceeds an image dimension."""


class InvalidOffsetError(AdvsmoError):
    """Co-occurrence offset outside the channel."""


class InvalidLevelsError(AdvsmoError):
    """Co-occurrence level count outside [2, 256]."""


class GridRangeError(AdvsmoError):
    """Empty or malformed candidate grid specification."""


class EmptySetError(AdvsmoError):
    """Selection from an empty candidate set."""


class DegenerateRangeError(AdvsmoError):
    """Normalization range with min >= max."""


class EmptyDatasetError(AdvsmoError):
    """Training requested on an empty or single-point dataset."""


class EmptyGridError(AdvsmoError):
    """Band derivation requested over an empty grid."""


class ConfigError(AdvsmoError):
    """Invalid pipeline configuration; message names the offending key."""

    def __init__(self, key: str, reason: str):
        super().__init__(f"config key '{key}': {reason}")
        self.key = key


class ClassifierError(AdvsmoError):
    """Base for classifier access failures. All subclasses are retriable."""


class ClassifierTimeoutError(ClassifierError):
    """Endpoint did not answer within the configured timeout."""


class ClassifierHTTPError(ClassifierError):
    """Endpoint answered with a non-200 status."""


class MalformedResponseError(ClassifierError):
    """Endpoint answer could not be parsed as a verdict."""


class AllSamplesUnevaluatedError(AdvsmoError):
    """Every sample in a report failed evaluation; no rate can be formed."""
