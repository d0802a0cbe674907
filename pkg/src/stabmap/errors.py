"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Malformed input: bad dimensions, unknown parameter path, bad partition."""


class DomainError(ValueError):
    """Input is structurally fine but outside the model's physical domain."""


class NumericalError(RuntimeError):
    """A numerical kernel (eigensolver, linear solve) failed to converge."""


class NoEquilibrium(RuntimeError):
    """Equilibrium solve failed after homotopy exhaustion.

    Carries the best residual seen, so callers can distinguish "nearly there"
    from "hopeless" (e.g. a ray that stepped outside the feasible set).
    """

    def __init__(self, message, best_residual=None, best_x=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_x = best_x


class AnchorUnstable(RuntimeError):
    """The sweep anchor operating point is not stable; no region to map."""
