"""Exception types shared across the package."""


class RefusalError(Exception):
    """A run is refused because no solution can exist for the requested
    parameters (nonpositive lambda, or a certificate that provably fails)."""


class CertificateError(RefusalError):
    """No sub- or super-solution certificate could be established."""


class NumericalError(Exception):
    """A numerical process failed to converge within its budget."""


class MonotonicityError(NumericalError):
    """A monotone iteration produced a step of the wrong sign."""


class TransformRangeError(ValueError):
    """Evaluation outside the tabulated range of a transform."""
