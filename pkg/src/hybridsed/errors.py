"""Exception types raised across the package."""


class HybridSedError(Exception):
    """Base class for all package errors."""


class DimensionError(HybridSedError, ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(HybridSedError, ValueError):
    """A parameter set violates a structural invariant (e.g. r does not divide M)."""


class NumericalError(HybridSedError, ArithmeticError):
    """An iterative numerical routine failed (non-convergence, singular system)."""


class RankDeficiencyError(NumericalError):
    """A factorization met a (numerically) rank-deficient input."""


class InsufficientRankError(NumericalError):
    """A Krylov space collapsed below the number of requested directions."""
