"""Exception hierarchy shared by every stage of the generator."""


class QRNGError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(QRNGError, ValueError):
    """A parameter is outside its admissible range."""


class InvalidDistributionError(QRNGError, ValueError):
    """A probability vector is negative or not normalised."""


class InsufficientDataError(QRNGError, ValueError):
    """Not enough samples, counts or bits for the requested statistic."""


class EmptyBlockError(InsufficientDataError):
    """A sample block with zero measurements was requested."""


class SeedExhaustedError(QRNGError):
    """The seed pool cannot supply the requested number of bits."""


class OverlapSaturationError(QRNGError, ValueError):
    """The overlap constant reached 1 and the entropy bound is vacuous."""


class NothingExtractableError(QRNGError, ValueError):
    """The certified bound leaves no extractable randomness."""


class NoLinearRegionError(QRNGError, ValueError):
    """A calibration sweep has no usable linear region."""


class FormatError(QRNGError, ValueError):
    """Raw data or sidecar metadata are malformed or inconsistent."""


class PartialReadError(FormatError):
    """A raw data file is shorter than its metadata promises."""


class OutputError(QRNGError, OSError):
    """A report or output file cannot be written."""
