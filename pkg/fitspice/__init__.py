"""
fitspice: FIT Electrothermal Models as Circuit Netlists

Turns a Finite Integration Technique discretization of a coupled
electroquasistatic / heat-conduction problem into a SPICE-style netlist:
- Staggered grid with primary/dual measures and incidence operators
- Temperature-dependent conductivities as behavioral resistors
- Joule losses as behavioral current sources in the thermal domain
- Built-in MNA circuit solver to replay the netlist
- Harness comparing field and circuit transients

Usage:
    from fitspice import ElectrothermalModel, benchmark_scenario, run_compare

    model = ElectrothermalModel(benchmark_scenario(alpha=0.005))
    netlist = model.netlist()
    fit_trace = model.simulate("fit")

    result = run_compare(benchmark_scenario(), output_dir="out")
    print(result.report.temperature_error)
"""

import logging

from .base import TransientSolver
from .config import CompareConfig, NetlistConfig, SolverConfig, SolverSettings
from .errors import (
    FitSpiceError,
    MissingGround,
    NoConvergence,
    NonphysicalResistivity,
    ParseError,
    ScenarioError,
    SingularSystem,
    SingularWarning,
)
from .field_solver import FieldSolver, assemble_system
from .grid import StaggeredGrid, build_grid, build_incidence
from .harness import (
    SOLVERS,
    ElectrothermalModel,
    Scenario,
    benchmark_scenario,
    builtin_scenarios,
    chip_surrogate_scenario,
    convergence_study,
    load_scenario,
    run_compare,
)
from .materials import Material, MaterialModel, assemble_material_matrices
from .mna import MnaSolver, MnaSystem, assemble
from .models import BoundaryConditions, CompareReport, ExtraBranch, TransientTrace
from .netlist import Netlist, emit, generate_netlist, parse

logger = logging.getLogger(__name__)

__version__ = "1.0.0"
__all__ = [
    "BoundaryConditions",
    "CompareConfig",
    "CompareReport",
    "ElectrothermalModel",
    "ExtraBranch",
    "FieldSolver",
    "FitSpiceError",
    "Material",
    "MaterialModel",
    "MissingGround",
    "MnaSolver",
    "MnaSystem",
    "Netlist",
    "NetlistConfig",
    "NoConvergence",
    "NonphysicalResistivity",
    "ParseError",
    "SOLVERS",
    "Scenario",
    "ScenarioError",
    "SingularSystem",
    "SingularWarning",
    "SolverConfig",
    "SolverSettings",
    "StaggeredGrid",
    "TransientSolver",
    "TransientTrace",
    "assemble",
    "assemble_material_matrices",
    "assemble_system",
    "benchmark_scenario",
    "build_grid",
    "build_incidence",
    "builtin_scenarios",
    "chip_surrogate_scenario",
    "convergence_study",
    "emit",
    "generate_netlist",
    "load_scenario",
    "parse",
    "run_compare",
]
