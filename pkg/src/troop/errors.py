"""Exception types shared across the package."""


class TroopError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(TroopError, ValueError):
    """Array arguments have inconsistent or invalid shapes."""


class RankDeficient(TroopError, ValueError):
    """A matrix that must have full column rank does not."""


class SingularPairing(TroopError, ValueError):
    """det(Psi^T Phi) vanished; the oblique projector is undefined."""


class NonFiniteState(TroopError, FloatingPointError):
    """An integrator state left the representable range (NaN/inf)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class BlowUp(TroopError, FloatingPointError):
    """A reduced-model trajectory diverged during objective evaluation."""

    def __init__(self, message: str, trajectory_index: int | None = None):
        super().__init__(message)
        self.trajectory_index = trajectory_index


class LineSearchFailed(TroopError, RuntimeError):
    """No step satisfying sufficient decrease was found."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class DegenerateDenominator(TroopError, ArithmeticError):
    """Conjugate-gradient beta denominator vanished."""


class NotHurwitz(TroopError, ValueError):
    """A system matrix has eigenvalues with non-negative real part."""


class NearSingularGramian(TroopError, ValueError):
    """Requested reduction order exceeds the numerically observable rank."""
