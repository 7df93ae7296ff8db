"""
fitspice Errors

Exception hierarchy shared by the grid, material, solver, netlist and harness
layers. Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional


class FitSpiceError(Exception):
    """Base class for all fitspice errors."""


class InvalidGeometry(FitSpiceError, ValueError):
    """Grid definition is unusable (too few nodes, non-positive spacing, ...)."""


class InvalidMaterial(FitSpiceError, ValueError):
    """Material property array has the wrong shape or a negative entry."""


class PhantomEdge(FitSpiceError, ValueError):
    """Operation requested on an edge that leaves the grid."""


class NonphysicalResistivity(FitSpiceError, ValueError):
    """Resistivity law crossed zero: 1 + alpha*(T - T0) <= 0."""


class OpenBranch(FitSpiceError, ValueError):
    """Edge has zero averaged conductivity, so its resistance is infinite."""


class ShapeError(FitSpiceError, ValueError):
    """Vector dimensions do not match."""


class MissingGround(FitSpiceError, ValueError):
    """Electrical network has no Dirichlet node and would float."""


class ScenarioError(FitSpiceError, ValueError):
    """Scenario definition is incomplete or inconsistent."""


class SingularSystem(FitSpiceError, RuntimeError):
    """Linear system could not be factorized."""


class NoConvergence(FitSpiceError, RuntimeError):
    """Newton iteration did not reach the requested tolerance."""

    def __init__(self, t: float, residual: float, iterations: int = 0):
        self.t = t
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Newton did not converge at t={t:.6e}s after {iterations} iterations "
            f"(scaled residual {residual:.3e})"
        )


class ParseError(FitSpiceError, ValueError):
    """Netlist text does not follow the dialect."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        self.message = message
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class SingularWarning(UserWarning):
    """A subnetwork has no path to ground or to any source."""
