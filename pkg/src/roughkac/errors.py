"""Exception hierarchy shared by all modules."""


class RoughKacError(Exception):
    """Base class for library errors."""


class ParameterError(RoughKacError, ValueError):
    """A parameter lies outside its documented range."""


class DomainError(RoughKacError, ValueError):
    """An evaluation point lies outside the domain of the object."""


class OrderingError(DomainError):
    """Grid nodes were supplied out of order."""


class DataError(RoughKacError, ValueError):
    """Sample data have the wrong shape or are otherwise unusable."""


class InsufficientDataError(DataError):
    """Too few points or samples to form an estimate."""


class ToleranceError(RoughKacError, ArithmeticError):
    """A numerical procedure did not reach its tolerance.

    ``residual`` carries the last error estimate.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class RegularityError(RoughKacError, ArithmeticError):
    """Dyadic sums failed to contract; ``ratio`` is the observed decay ratio."""

    def __init__(self, message, ratio):
        super().__init__(f"{message} (observed ratio={ratio:.4f})")
        self.ratio = ratio


class NumericalError(RoughKacError, ArithmeticError):
    """Factorization or other linear-algebra failure."""


class OverflowStepError(RoughKacError, ArithmeticError):
    """A solver step produced non-finite values."""

    def __init__(self, message, step_index):
        super().__init__(f"{message} at step {step_index}")
        self.step_index = step_index


class ResolutionError(RoughKacError, ValueError):
    """A grid is too coarse for the time scale it must resolve."""
