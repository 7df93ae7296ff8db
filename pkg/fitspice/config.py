"""
fitspice Configuration

Solver defaults, netlist formatting rules and comparison thresholds.
"""

import os
from dataclasses import asdict, dataclass, replace
from typing import Optional

# Physical constants
EPS0 = 8.8541878128e-12  # F/m

MODES = ("lagged", "monolithic")
INTEGRATORS = ("be", "trap")


# Solver settings
class SolverConfig:
    # Newton convergence: componentwise scaled residual
    NEWTON_TOL = 1e-10
    MAX_ITER = 25

    # Step halvings allowed when a Newton update makes a resistivity non-physical
    MAX_DAMPING_HALVINGS = 10

    # dt defaults to tstop / DEFAULT_STEPS
    DEFAULT_STEPS = 1000

    DEFAULT_MODE = "lagged"
    DEFAULT_INTEGRATOR = "be"

    # Denominator floor for the scaled residual
    RESIDUAL_FLOOR = 1e-300


# Netlist formatting
class NetlistConfig:
    SIGNIFICANT_DIGITS = 9
    GROUND = "0"

    # Node names: one-based canonical index
    ELECTRICAL_NODE = "E{:06d}"
    THERMAL_NODE = "T{:06d}"

    # Element names
    EDGE_RESISTOR = "RE{:06d}"
    EDGE_BEHAVIORAL_RESISTOR = "BRE{:06d}"
    EDGE_CAPACITOR = "CE{:06d}"
    EDGE_THERMAL_RESISTOR = "RT{:06d}"
    NODE_THERMAL_CAPACITOR = "CT{:06d}"
    NODE_LOSS_SOURCE = "BIT{:06d}"
    ELECTRIC_DIRICHLET = "VE{:06d}"
    THERMAL_DIRICHLET = "VT{:06d}"
    EXTRA_ELECTRICAL = "RXE{:03d}"
    EXTRA_THERMAL = "RXT{:03d}"

    DEFAULT_TITLE = "fitspice electrothermal netlist"


# Cross-solver comparison
class CompareConfig:
    # Temperature error (max-norm over time of 2-norm over nodes) that counts as agreement
    TEMPERATURE_ERROR_WARNING = 1e-2

    # Output file names inside a report directory
    FIT_TRACE = "fit_trace.csv"
    MNA_TRACE = "mna_trace.csv"
    FIT_PROBES = "fit_probes.csv"
    MNA_PROBES = "mna_probes.csv"
    NETLIST = "netlist.cir"
    REPORT_TEXT = "report.txt"
    REPORT_JSON = "report.json"


@dataclass
class SolverSettings:
    """Per-run settings shared by the field and circuit solvers."""
    tstop: float
    dt: Optional[float] = None  # None -> tstop / DEFAULT_STEPS
    mode: str = SolverConfig.DEFAULT_MODE
    integrator: str = SolverConfig.DEFAULT_INTEGRATOR
    newton_tol: float = SolverConfig.NEWTON_TOL
    max_iter: int = SolverConfig.MAX_ITER

    def __post_init__(self):
        if self.tstop <= 0:
            raise ValueError(f"tstop must be positive, got {self.tstop}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.newton_tol <= 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    @property
    def step(self) -> float:
        """Resolved time step."""
        if self.dt is None:
            return self.tstop / SolverConfig.DEFAULT_STEPS
        return self.dt

    @property
    def num_steps(self) -> int:
        """Number of fixed steps covering [0, tstop]."""
        return max(1, int(round(self.tstop / self.step)))

    def with_overrides(self, **overrides) -> "SolverSettings":
        """Copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_env(cls, tstop: float, **kwargs) -> "SolverSettings":
        """
        Build settings, filling unset fields from FITSPICE_* environment variables.

        Keyword arguments win over the environment.
        """
        env = {
            "newton_tol": _env_float("FITSPICE_NEWTON_TOL"),
            "max_iter": _env_int("FITSPICE_MAX_ITER"),
            "mode": os.getenv("FITSPICE_MODE"),
            "integrator": os.getenv("FITSPICE_INTEGRATOR"),
        }
        merged = {k: v for k, v in env.items() if v is not None}
        merged.update({k: v for k, v in kwargs.items() if v is not None})
        return cls(tstop=tstop, **merged)


def _env_float(name: str) -> Optional[float]:
    value = os.getenv(name)
    return float(value) if value else None


def _env_int(name: str) -> Optional[int]:
    value = os.getenv(name)
    return int(value) if value else None
