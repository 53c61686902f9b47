"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A model or run parameter violates its documented constraints."""


class DegenerateChannelError(RuntimeError):
    """The nulled channel set is numerically rank deficient.

    This is a probability-zero event for continuously distributed channels;
    callers are expected to resample the realization.
    """


class NumericalError(RuntimeError):
    """A quadrature or root-finding step failed to converge."""


class SearchError(NumericalError):
    """Density inversion could not bracket the target outage probability."""
