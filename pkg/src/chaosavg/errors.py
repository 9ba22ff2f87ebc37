"""Exception types shared across the package.

Every failure mode that a caller is expected to handle gets its own class so
that the CLI can map them onto exit codes (config problems vs. numerical /
statistical failures) without string matching.
"""


class ChaosAvgError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(ChaosAvgError, ValueError):
    """An operation was called outside its documented domain."""


class InvalidConfigError(ChaosAvgError, ValueError):
    """A configuration document is malformed or inconsistent."""


class InvalidInputError(ChaosAvgError, ValueError):
    """Numerical input data is unusable (NaN / inf where finite required)."""


class CirculantEmbeddingError(ChaosAvgError, RuntimeError):
    """Circulant embedding stayed indefinite after maximal padding."""

    def __init__(self, most_negative: float, size: int):
        self.most_negative = most_negative
        self.size = size
        super().__init__(
            f"circulant embedding not nonnegative definite after padding to "
            f"{size} points; most negative eigenvalue {most_negative:.6e}"
        )


class QuadratureError(ChaosAvgError, RuntimeError):
    """A quadrature did not converge to the requested tolerance."""


class NonIntegrableError(ChaosAvgError, ValueError):
    """An integral required by a variance formula diverges."""


class InsufficientDataError(ChaosAvgError, ValueError):
    """Too few replications for the requested statistic."""
