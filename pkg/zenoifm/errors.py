"""Exception and warning types raised by the simulator."""


class ZenoIFMError(Exception):
    """Base class for all simulator errors."""


class InvalidParameterError(ZenoIFMError, ValueError):
    """A parameter or value violates its documented range."""


class DimensionMismatchError(ZenoIFMError, ValueError):
    """Operator and state dimensions do not agree."""


class CutoffOverflowError(ZenoIFMError):
    """Population reached the Fock-space boundary during propagation."""


class StepSizeError(ZenoIFMError):
    """The fixed integration step is too coarse for the requested accuracy."""


class EmptySampleError(ZenoIFMError, ValueError):
    """An estimator was called without data."""


class OutOfSupportError(ZenoIFMError):
    """All candidate densities vanish at the evaluated point."""


class NoCrossingError(ZenoIFMError):
    """Discrimination curves do not cross on the search interval."""


class DegenerateFitError(ZenoIFMError, ValueError):
    """The fit design does not determine the parameters."""


class EMMonotonicityError(ZenoIFMError):
    """An EM iteration decreased the log-likelihood."""


class ConfigError(ZenoIFMError):
    """Scenario configuration could not be parsed or validated."""


class TruncationWarning(UserWarning):
    """The Fock cutoff discards more probability than the warning threshold."""
