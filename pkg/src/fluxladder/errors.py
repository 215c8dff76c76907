"""Exception taxonomy shared across the engine.

Invalid arguments raise plain ``ValueError``; everything that can fail for
physical or resource reasons gets its own class so the CLI can map failures
to distinct exit codes.
"""


class CapacityError(RuntimeError):
    """Requested computation exceeds a configured size cap."""


class ConvergenceError(RuntimeError):
    """Iterative solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConsistencyError(RuntimeError):
    """A solved state violates a steady-state identity beyond tolerance."""


class InstabilityError(RuntimeError):
    """Drift matrix is not Hurwitz; no stationary Gaussian state exists."""


class StiffnessError(RuntimeError):
    """Time integrator step size underflowed; try the linear solver."""


class DegenerateDenominatorError(ValueError):
    """Controllability denominator (max+min)/2 vanishes on this grid."""
