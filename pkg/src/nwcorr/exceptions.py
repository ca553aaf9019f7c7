"""Exception and warning types raised by nwcorr."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class DistributionalKernelError(DomainError):
    """The all-space localization kernel is a Dirac delta and has no pointwise value.

    Use :func:`nwcorr.correlator.correlation_sharp` (or the sharp regime of the
    estimator) for unlocalized / all-space measurements.
    """


class AccuracyError(ArithmeticError):
    """A quadrature cannot meet its resolution requirements."""


class DegenerateStateError(ArithmeticError):
    """The normalization of the correlation function vanishes."""


class AccuracyWarning(UserWarning):
    """A quadrature finished but its error estimate exceeds the requested target."""
