"""Shared exceptions and warnings."""


class BergtentsError(Exception):
    """Base class for errors raised by this package."""


class WrongDomainKind(BergtentsError):
    """Operation invoked on a domain kind it is not defined for."""


class DomainKindUnsupported(BergtentsError):
    """Feature not implemented for this domain kind."""


class OutsideTubularNeighborhood(BergtentsError):
    """Point too far from the boundary for projection-based operations."""


class NotOnBoundary(BergtentsError):
    """Point expected on the boundary is not (within tolerance)."""


class NoConvergence(BergtentsError):
    """Iterative solver exhausted its step budget."""


class BisectionFailure(BergtentsError):
    """Bisection could not bracket or refine a root."""


class EmptyRegion(BergtentsError):
    """Average requested over an empty or zero-measure region."""


class SingularSample(BergtentsError):
    """A sample coincides with a singular point of a weight."""


class ConfigError(BergtentsError):
    """Invalid run configuration."""


class ResolutionExceeded(UserWarning):
    """Requested scale is finer than the sample cloud resolves.

    Deep levels then saturate into singleton cells; exact set invariants
    still hold, so this is a warning rather than an error by default.
    """


class NonIntegrable(UserWarning):
    """Constructed weight pair has a non-integrable dual weight."""
