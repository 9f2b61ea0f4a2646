"""
errors.py
---------
Exception hierarchy shared by the geometry, map, Bochner, flow and report layers.

Every error raised on purpose by the engine derives from RigidityError, so the CLI
can tell engine failures (exit 3) from configuration problems (exit 2).
"""

from typing import Optional


class RigidityError(Exception):
    """Base class for errors raised by the verification engine."""


class DomainError(RigidityError, ValueError):
    """A point lies outside every chart domain of a manifold."""


class ChartError(DomainError):
    """A map sends a point outside the coverage of its target chart."""


class ConditioningError(RigidityError, ArithmeticError):
    """A metric is too ill-conditioned to differentiate twice, or a frame cannot be built."""


class DegeneratePlaneError(RigidityError, ValueError):
    """Two tangent vectors do not span a 2-plane."""


class ResolutionError(RigidityError, ValueError):
    """A grid is too coarse for the requested stencil."""


class HarmonicityPreconditionError(RigidityError):
    """The Bochner identity was requested for a map that is not harmonic on the grid."""

    def __init__(self, sup_tension: float, tolerance: float):
        self.sup_tension = float(sup_tension)
        self.tolerance = float(tolerance)
        super().__init__(
            f"Map is not harmonic on the grid: sup|tau| = {self.sup_tension:.3e} "
            f"exceeds tolerance {self.tolerance:.1e}"
        )


class FlowBlowUpError(RigidityError):
    """A flow node cannot be placed in any target chart."""


class FlowInstabilityError(RigidityError, FloatingPointError):
    """The flow produced non-finite values."""


class ConfigError(RigidityError, ValueError):
    """An experiment configuration is missing, malformed or inconsistent."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class ConvergenceTableError(RigidityError, ValueError):
    """A convergence series cannot produce observed orders."""
