"""
Comparison Harness

Scenario definitions, the built-in benchmark and chip-surrogate scenarios,
the model facade and the field-versus-circuit comparison.

Algorithm (run_compare):
1. Build grid, materials, boundary conditions and FIT operators
2. FIT pipeline: field solver on the fixed time grid
3. Circuit pipeline: generate -> emit -> parse -> assemble -> solve
4. Both pipelines run concurrently; they share only immutable inputs
5. Compare traces with the relative error norm
       max_t ||a(t) - b(t)||_2 / max_t ||b(t)||_2
   for temperature and potential, plus max relative differences
6. Write traces, probes, netlist and report
"""

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import EPS0, CompareConfig, SolverSettings
from .errors import ScenarioError, ShapeError
from .field_solver import FieldSolver, assemble_system
from .grid import StaggeredGrid, build_grid
from .materials import Material, MaterialModel
from .mna import MnaSolver, assemble
from .models import BoundaryConditions, CompareReport, ExtraBranch, TransientTrace
from .netlist import Netlist, emit, generate_netlist, parse
from .waveforms import Dc, Exponential, Sine, Waveform, waveform_from_dict

logger = logging.getLogger(__name__)

FACES = ("x-", "x+", "y-", "y+", "z-", "z+")

IJK = Tuple[int, int, int]
Box = Tuple[Tuple[float, float, float], Tuple[float, float, float]]


# -- scenario --------------------------------------------------------------

@dataclass
class Region:
    """Axis-aligned box (meters) filled with one material."""
    material: str
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    def to_dict(self) -> dict:
        return {"material": self.material, "box": {"min": list(self.lo), "max": list(self.hi)}}


@dataclass
class NodeSelection:
    """One of: a boundary face, a box of node positions, or explicit (i, j, k) nodes."""
    face: Optional[str] = None
    box: Optional[Box] = None
    nodes: Optional[List[IJK]] = None

    def resolve(self, grid: StaggeredGrid) -> np.ndarray:
        if self.face is not None:
            if self.face not in FACES:
                raise ScenarioError(f"unknown face {self.face!r}, expected one of {FACES}")
            axis = "xyz".index(self.face[0])
            target = 0 if self.face[1] == "-" else grid.node_counts[axis] - 1
            nodes = [m for m in range(grid.n) if grid.node_ijk(m)[axis] == target]
            return np.array(nodes, dtype=int)
        if self.box is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.box)
            tol = 1e-9 * max(grid.extent)
            selected = grid.nodes_where(
                lambda X, Y, Z: (
                    (X >= lo[0] - tol) & (X <= hi[0] + tol)
                    & (Y >= lo[1] - tol) & (Y <= hi[1] + tol)
                    & (Z >= lo[2] - tol) & (Z <= hi[2] + tol)
                )
            )
            if selected.size == 0:
                raise ScenarioError(f"box {self.box} selects no nodes")
            return selected
        if self.nodes is not None:
            try:
                return np.array([grid.node_index(*ijk) for ijk in self.nodes], dtype=int)
            except IndexError as e:
                raise ScenarioError(str(e)) from e
        raise ScenarioError("node selection needs one of face, box or nodes")

    def to_dict(self) -> dict:
        if self.face is not None:
            return {"face": self.face}
        if self.box is not None:
            return {"box": {"min": list(self.box[0]), "max": list(self.box[1])}}
        return {"nodes": [list(n) for n in self.nodes or []]}

    @classmethod
    def from_dict(cls, data: dict) -> "NodeSelection":
        if "face" in data:
            return cls(face=str(data["face"]))
        if "box" in data:
            return cls(box=_box_from_dict(data["box"]))
        if "nodes" in data:
            return cls(nodes=[tuple(int(c) for c in n) for n in data["nodes"]])
        raise ScenarioError(f"selection {data!r} needs one of face, box or nodes")


@dataclass
class DirichletSpec:
    select: NodeSelection
    waveform: Waveform

    def to_dict(self) -> dict:
        return {"select": self.select.to_dict(), "waveform": self.waveform.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "DirichletSpec":
        try:
            return cls(NodeSelection.from_dict(data["select"]), waveform_from_dict(data["waveform"]))
        except KeyError as e:
            raise ScenarioError(f"Dirichlet entry is missing {e}") from e
        except ValueError as e:
            raise ScenarioError(str(e)) from e


@dataclass
class BranchSpec:
    name: str
    a: IJK
    b: IJK
    g_el: float = 0.0
    g_th: float = 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, "a": list(self.a), "b": list(self.b), "g_el": self.g_el, "g_th": self.g_th}


def _box_from_dict(data: dict) -> Box:
    try:
        lo = tuple(float(v) for v in data["min"])
        hi = tuple(float(v) for v in data["max"])
    except (KeyError, TypeError) as e:
        raise ScenarioError(f"box {data!r} needs min and max") from e
    if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
        raise ScenarioError(f"box {data!r} must have three axes with min <= max")
    return lo, hi


@dataclass
class Scenario:
    """Complete description of one electrothermal model and its run settings."""
    name: str
    node_counts: Tuple[int, int, int]
    spacings: List[List[float]]
    materials: Dict[str, Material]
    regions: List[Region]
    electric_dirichlet: List[DirichletSpec]
    thermal_dirichlet: List[DirichletSpec] = field(default_factory=list)
    extra_branches: List[BranchSpec] = field(default_factory=list)
    solver: dict = field(default_factory=dict)  # SolverSettings fields, tstop required
    probes: Dict[str, IJK] = field(default_factory=dict)
    T0: float = 300.0
    description: str = ""

    # -- building blocks -----------------------------------------------

    def build_grid(self) -> StaggeredGrid:
        return build_grid(self.node_counts, self.spacings)

    def build_materials(self, grid: StaggeredGrid) -> MaterialModel:
        """
        Assign one material per cell by cell center; later regions win.

        Raises:
            ScenarioError: unknown material, region outside the domain, uncovered cell
        """
        palette = list(self.materials.values())
        index = {name: k for k, name in enumerate(self.materials)}
        X, Y, Z = grid.cell_centers()
        assigned = np.full(grid.num_cells, -1, dtype=int)
        tol = 1e-9 * max(grid.extent)
        extent = grid.extent
        for region in self.regions:
            if region.material not in index:
                raise ScenarioError(f"region uses unknown material {region.material!r}")
            for axis in range(3):
                if region.lo[axis] < -tol or region.hi[axis] > extent[axis] + tol:
                    raise ScenarioError(f"region {region.material!r} leaves the domain along {'xyz'[axis]}")
            inside = (
                (X >= region.lo[0] - tol) & (X <= region.hi[0] + tol)
                & (Y >= region.lo[1] - tol) & (Y <= region.hi[1] + tol)
                & (Z >= region.lo[2] - tol) & (Z <= region.hi[2] + tol)
            )
            assigned[inside] = index[region.material]
        uncovered = int(np.count_nonzero(assigned < 0))
        if uncovered:
            raise ScenarioError(f"{uncovered} cell(s) are not covered by any region")
        return MaterialModel.from_assignment(palette, assigned, self.T0)

    def build_boundary_conditions(self, grid: StaggeredGrid) -> BoundaryConditions:
        bcs = BoundaryConditions()
        for entries, target in (
            (self.electric_dirichlet, bcs.electric_dirichlet),
            (self.thermal_dirichlet, bcs.thermal_dirichlet),
        ):
            for entry in entries:
                for node in entry.select.resolve(grid):
                    target[int(node)] = entry.waveform
        for branch in self.extra_branches:
            try:
                a, b = grid.node_index(*branch.a), grid.node_index(*branch.b)
            except IndexError as e:
                raise ScenarioError(f"extra branch {branch.name!r}: {e}") from e
            bcs.extra_branches.append(ExtraBranch(branch.name, a, b, branch.g_el, branch.g_th))
        bcs.validate(grid.n)
        return bcs

    def probe_nodes(self, grid: StaggeredGrid) -> Dict[str, int]:
        try:
            return {name: grid.node_index(*ijk) for name, ijk in self.probes.items()}
        except IndexError as e:
            raise ScenarioError(f"probe outside the grid: {e}") from e

    def settings(self, **overrides) -> SolverSettings:
        """Scenario solver section over FITSPICE_* environment, then non-None overrides."""
        values = dict(self.solver)
        if "tstop" not in values:
            raise ScenarioError(f"scenario {self.name!r} has no solver.tstop")
        tstop = values.pop("tstop")
        try:
            return SolverSettings.from_env(tstop, **values).with_overrides(**overrides)
        except (TypeError, ValueError) as e:
            raise ScenarioError(f"invalid solver settings: {e}") from e

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "description": self.description,
            "T0": self.T0,
            "grid": {"node_counts": list(self.node_counts), "spacings": [list(s) for s in self.spacings]},
            "materials": {name: m.to_dict() for name, m in self.materials.items()},
            "regions": [r.to_dict() for r in self.regions],
            "electric_dirichlet": [d.to_dict() for d in self.electric_dirichlet],
            "thermal_dirichlet": [d.to_dict() for d in self.thermal_dirichlet],
            "extra_branches": [b.to_dict() for b in self.extra_branches],
            "solver": dict(self.solver),
            "probes": {name: list(ijk) for name, ijk in self.probes.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        """
        Raises:
            ScenarioError: missing or malformed section
        """
        try:
            grid = data["grid"]
            regions = []
            for r in data["regions"]:
                lo, hi = _box_from_dict(r["box"])
                regions.append(Region(str(r["material"]), lo, hi))
            return cls(
                name=str(data.get("name", "unnamed")),
                description=str(data.get("description", "")),
                T0=float(data.get("T0", 300.0)),
                node_counts=tuple(int(c) for c in grid["node_counts"]),
                spacings=[[float(h) for h in axis] for axis in grid["spacings"]],
                materials={name: Material.from_dict(name, m) for name, m in data["materials"].items()},
                regions=regions,
                electric_dirichlet=[DirichletSpec.from_dict(d) for d in data.get("electric_dirichlet", [])],
                thermal_dirichlet=[DirichletSpec.from_dict(d) for d in data.get("thermal_dirichlet", [])],
                extra_branches=[
                    BranchSpec(
                        name=str(b["name"]),
                        a=tuple(int(c) for c in b["a"]),
                        b=tuple(int(c) for c in b["b"]),
                        g_el=float(b.get("g_el", 0.0)),
                        g_th=float(b.get("g_th", 0.0)),
                    )
                    for b in data.get("extra_branches", [])
                ],
                solver=dict(data.get("solver", {})),
                probes={name: tuple(int(c) for c in ijk) for name, ijk in data.get("probes", {}).items()},
            )
        except KeyError as e:
            raise ScenarioError(f"scenario is missing {e}") from e
        except (TypeError, ValueError) as e:
            if isinstance(e, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {e}") from e

    @classmethod
    def load(cls, path: str) -> "Scenario":
        with open(path) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise ScenarioError(f"{path}: invalid JSON: {e}") from e
        return cls.from_dict(data)

    def save(self, path: str):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")


# -- built-in scenarios ----------------------------------------------------

BENCHMARK_LENGTH = 4e-3       # m, whole bar
BENCHMARK_RESISTIVE = 3e-3    # m
BENCHMARK_SECTION = 1e-3      # m, square cross-section edge
BENCHMARK_SIGMA = 3.0
BENCHMARK_EPS_R = 1.13e5
BENCHMARK_AMPLITUDE = 1000.0  # V
BENCHMARK_FREQ = 76.9e3       # Hz


def benchmark_scenario(
    alpha: float = 0.0,
    node_counts: Sequence[int] = (5, 3, 3),
    dt: float = 1e-7,
    tstop: float = 1.2e-4,
    mode: str = "lagged",
) -> Scenario:
    """
    Resistive/capacitive cuboid driven by a 1 kV, 76.9 kHz sine on the x = 0 face.

    Args:
        alpha: temperature coefficient of the resistive material (1/K)
        node_counts: mesh; nx - 1 must be a multiple of 4 so x = 3 mm is a grid plane
    """
    nx, ny, nz = (int(c) for c in node_counts)
    if (nx - 1) % 4:
        raise ScenarioError(f"benchmark needs nx - 1 divisible by 4, got nx={nx}")
    section = BENCHMARK_SECTION
    return Scenario(
        name="benchmark",
        description="4 mm x 1 mm x 1 mm cuboid: 3 mm resistive bar in series with a 1 mm dielectric",
        T0=300.0,
        node_counts=(nx, ny, nz),
        spacings=[
            [BENCHMARK_LENGTH / (nx - 1)] * (nx - 1),
            [section / (ny - 1)] * (ny - 1),
            [section / (nz - 1)] * (nz - 1),
        ],
        materials={
            "resistive": Material("resistive", sigma=BENCHMARK_SIGMA, eps_r=1.0, lambda_th=400.0, rho_c=8000.0, alpha=alpha),
            "capacitive": Material("capacitive", sigma=0.0, eps_r=BENCHMARK_EPS_R, lambda_th=400.0, rho_c=8000.0),
        },
        regions=[
            Region("resistive", (0.0, 0.0, 0.0), (BENCHMARK_RESISTIVE, section, section)),
            Region("capacitive", (BENCHMARK_RESISTIVE, 0.0, 0.0), (BENCHMARK_LENGTH, section, section)),
        ],
        electric_dirichlet=[
            DirichletSpec(NodeSelection(face="x-"), Sine(0.0, BENCHMARK_AMPLITUDE, BENCHMARK_FREQ)),
            DirichletSpec(NodeSelection(face="x+"), Dc(0.0)),
        ],
        solver={"tstop": tstop, "dt": dt, "mode": mode},
        probes={
            "source": (0, (ny - 1) // 2, (nz - 1) // 2),
            "bar": ((nx - 1) // 4, (ny - 1) // 2, (nz - 1) // 2),
            "mid": (3 * (nx - 1) // 4, (ny - 1) // 2, (nz - 1) // 2),
        },
    )


def benchmark_lumped_rc() -> Tuple[float, float]:
    """(R, C) of the benchmark bar as lumped elements."""
    area = BENCHMARK_SECTION ** 2
    R = BENCHMARK_RESISTIVE / (BENCHMARK_SIGMA * area)
    C = EPS0 * BENCHMARK_EPS_R * area / (BENCHMARK_LENGTH - BENCHMARK_RESISTIVE)
    return R, C


def chip_surrogate_scenario(dt: float = 0.05, tstop: float = 20.0, mode: str = "lagged") -> Scenario:
    """
    Block package: mold over a substrate, a copper pad driven by 10 V (1 - exp(-t)),
    a chip grounded on its far face, and one bonding wire from pad to chip.
    """
    mm = 1e-3
    return Scenario(
        name="chip_surrogate",
        description="substrate + mold + Cu pad + chip joined by a 1 S / 1 kW/K bonding wire",
        T0=300.0,
        node_counts=(9, 5, 4),
        spacings=[[0.5 * mm] * 8, [0.5 * mm] * 4, [0.5 * mm, 0.25 * mm, 0.25 * mm]],
        materials={
            "mold": Material("mold", sigma=0.0, eps_r=1.0, lambda_th=0.8, rho_c=1.6e6),
            "substrate": Material("substrate", sigma=0.0, eps_r=1.0, lambda_th=25.0, rho_c=3.0e6),
            "copper": Material("copper", sigma=5.8e7, eps_r=1.0, lambda_th=400.0, rho_c=3.45e6, alpha=3.9e-3),
            "chip": Material("chip", sigma=10.0, eps_r=1.0, lambda_th=150.0, rho_c=1.66e6, alpha=5e-4),
        },
        regions=[
            Region("mold", (0.0, 0.0, 0.0), (4 * mm, 2 * mm, 1 * mm)),
            Region("substrate", (0.0, 0.0, 0.0), (4 * mm, 2 * mm, 0.5 * mm)),
            Region("copper", (0.0, 0.5 * mm, 0.5 * mm), (1 * mm, 1.5 * mm, 0.75 * mm)),
            Region("chip", (2 * mm, 0.5 * mm, 0.5 * mm), (4 * mm, 1.5 * mm, 1 * mm)),
        ],
        electric_dirichlet=[
            DirichletSpec(
                NodeSelection(box=((0.0, 0.5 * mm, 0.5 * mm), (1 * mm, 1.5 * mm, 0.75 * mm))),
                Exponential(0.0, 10.0, 1.0),
            ),
            DirichletSpec(
                NodeSelection(box=((4 * mm, 0.5 * mm, 0.5 * mm), (4 * mm, 1.5 * mm, 1 * mm))),
                Dc(0.0),
            ),
        ],
        extra_branches=[BranchSpec("bondwire", (1, 2, 2), (4, 2, 3), g_el=1.0, g_th=1000.0)],
        solver={"tstop": tstop, "dt": dt, "mode": mode},
        probes={"pad": (1, 2, 2), "wire_end": (4, 2, 3), "chip": (6, 2, 3), "substrate": (4, 2, 0)},
    )


BUILTIN_SCENARIOS = {
    "benchmark": benchmark_scenario,
    "chip_surrogate": chip_surrogate_scenario,
}


def builtin_scenarios() -> Dict[str, Scenario]:
    return {name: factory() for name, factory in BUILTIN_SCENARIOS.items()}


def load_scenario(name_or_path: str) -> Scenario:
    """Built-in scenario by name, otherwise a JSON scenario file."""
    if name_or_path in BUILTIN_SCENARIOS:
        return BUILTIN_SCENARIOS[name_or_path]()
    if not os.path.exists(name_or_path):
        raise ScenarioError(
            f"{name_or_path!r} is neither a built-in scenario ({', '.join(BUILTIN_SCENARIOS)}) nor a file"
        )
    return Scenario.load(name_or_path)


# -- model facade ----------------------------------------------------------

class ElectrothermalModel:
    """
    One scenario, discretized once and solved by either pipeline.

    Usage:
        model = ElectrothermalModel(benchmark_scenario())
        netlist = model.netlist()
        fit = model.simulate("fit")
        mna = model.simulate("mna")
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.grid = scenario.build_grid()
        self.materials = scenario.build_materials(self.grid)
        self.bcs = scenario.build_boundary_conditions(self.grid)
        self.system = assemble_system(self.grid, self.materials, self.bcs.extra_branches)
        self.probes = scenario.probe_nodes(self.grid)

    def settings(self, **overrides) -> SolverSettings:
        return self.scenario.settings(**overrides)

    def netlist(self, settings: Optional[SolverSettings] = None) -> Netlist:
        return generate_netlist(
            self.grid,
            self.materials,
            self.system.mats,
            self.bcs,
            settings=settings or self.settings(),
            title=f"fitspice {self.scenario.name}",
        )

    def field_solver(self, settings: Optional[SolverSettings] = None, **kwargs) -> FieldSolver:
        return FieldSolver(
            self.grid, self.materials, self.bcs, settings or self.settings(), system=self.system, **kwargs
        )

    def circuit_solver(
        self,
        settings: Optional[SolverSettings] = None,
        netlist: Optional[Netlist] = None,
        via_text: bool = True,
        **kwargs,
    ) -> MnaSolver:
        """Circuit solver on the generated netlist, by default after an emit/parse round trip."""
        settings = settings or self.settings()
        netlist = netlist or self.netlist(settings)
        if via_text:
            netlist = parse(emit(netlist))
        return MnaSolver(assemble(netlist), settings, num_grid_nodes=self.grid.n, **kwargs)

    def simulate(self, kind: str, settings: Optional[SolverSettings] = None, **kwargs) -> TransientTrace:
        """
        Run one pipeline.

        Raises:
            ScenarioError: unknown pipeline name
        """
        if kind not in SOLVERS:
            raise ScenarioError(f"unknown solver {kind!r}, expected one of {sorted(SOLVERS)}")
        if SOLVERS[kind] is FieldSolver:
            return self.field_solver(settings, **kwargs).run()
        return self.circuit_solver(settings, **kwargs).run()


# Registry for CLI dispatch
SOLVERS = {
    "fit": FieldSolver,
    "mna": MnaSolver,
}


# -- comparison ------------------------------------------------------------

def _check_time_grids(a: TransientTrace, b: TransientTrace):
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=1e-12, atol=0.0):
        raise ShapeError("traces are on different time grids")
    if a.num_nodes != b.num_nodes:
        raise ShapeError(f"traces have {a.num_nodes} and {b.num_nodes} nodes")


def relative_error_norm(values: np.ndarray, reference: np.ndarray) -> float:
    """max_t ||values(t) - reference(t)||_2 / max_t ||reference(t)||_2 (rows are time points)."""
    numerator = float(np.max(np.linalg.norm(values - reference, axis=1)))
    denominator = float(np.max(np.linalg.norm(reference, axis=1)))
    if denominator == 0.0:
        return 0.0 if numerator == 0.0 else float("inf")
    return numerator / denominator


def temperature_error(candidate: TransientTrace, reference: TransientTrace) -> float:
    _check_time_grids(candidate, reference)
    return relative_error_norm(candidate.T, reference.T)


def potential_error(candidate: TransientTrace, reference: TransientTrace) -> float:
    _check_time_grids(candidate, reference)
    return relative_error_norm(candidate.phi, reference.phi)


def max_relative_difference(values: np.ndarray, reference: np.ndarray) -> float:
    """max |values - reference| over all entries, divided by the peak |reference|."""
    peak = float(np.max(np.abs(reference))) if reference.size else 0.0
    worst = float(np.max(np.abs(values - reference))) if reference.size else 0.0
    if peak == 0.0:
        return 0.0 if worst == 0.0 else float("inf")
    return worst / peak


def series_rc_response(t, amplitude: float, freq_hz: float, R: float, C: float):
    """Capacitor voltage of a series RC driven by amplitude*sin(2*pi*f*t) from rest."""
    t = np.asarray(t, dtype=float)
    tau = R * C
    wt = 2.0 * np.pi * freq_hz * tau
    w = 2.0 * np.pi * freq_hz
    return amplitude / (1.0 + wt ** 2) * (np.sin(w * t) - wt * np.cos(w * t) + wt * np.exp(-t / tau))


def hottest_node_linearity(trace: TransientTrace, fraction: float = 0.25) -> Tuple[int, float, float]:
    """
    Linear fit of the hottest node's temperature over the final `fraction` of the run.

    Returns:
        (node, r_squared, slope in K/s)
    """
    node = int(np.argmax(trace.T[-1]))
    start = int(np.floor((1.0 - fraction) * (trace.times.size - 1)))
    t = trace.times[start:]
    y = trace.T[start:, node]
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return node, r_squared, float(slope)


@contextmanager
def _stage(name: str, timings: Dict[str, float]):
    start = time.perf_counter()
    try:
        yield
    except Exception as e:
        logger.error(f"[{name}] failed: {e}")
        raise
    finally:
        timings[name] = time.perf_counter() - start


@dataclass
class ComparisonResult:
    report: CompareReport
    fit: TransientTrace
    mna: TransientTrace
    netlist_text: str
    probes: Dict[str, int] = field(default_factory=dict)


def run_compare(
    scenario: Scenario,
    output_dir: Optional[str] = None,
    settings: Optional[SolverSettings] = None,
    via_text: bool = True,
) -> ComparisonResult:
    """
    Run the FIT and circuit pipelines on the same time grid and compare them.

    Raises:
        NoConvergence, SingularSystem: from either pipeline, logged with the stage name
        ScenarioError: invalid scenario
    """
    timings: Dict[str, float] = {}
    with _stage("assemble", timings):
        model = ElectrothermalModel(scenario)
        settings = settings or model.settings()

    with _stage("generate", timings):
        netlist = model.netlist(settings)
    with _stage("emit", timings):
        text = emit(netlist)

    def fit_pipeline() -> TransientTrace:
        with _stage("fit_solve", timings):
            return model.field_solver(settings).run()

    def mna_pipeline() -> TransientTrace:
        circuit = netlist
        if via_text:
            with _stage("parse", timings):
                circuit = parse(text)
        with _stage("mna_assemble", timings):
            system = assemble(circuit)
        with _stage("mna_solve", timings):
            return MnaSolver(system, settings, num_grid_nodes=model.grid.n).run()

    with ThreadPoolExecutor(max_workers=2, thread_name_prefix="pipeline") as executor:
        fit_future = executor.submit(fit_pipeline)
        mna_future = executor.submit(mna_pipeline)
        fit_trace = fit_future.result()
        mna_trace = mna_future.result()

    with _stage("compare", timings):
        report = CompareReport(
            scenario=scenario.name,
            settings=settings.to_dict(),
            num_nodes=model.grid.n,
            num_steps=fit_trace.num_steps,
            card_count=netlist.card_count,
            card_counts=netlist.card_counts(),
            stage_seconds={},
            fit_iterations=fit_trace.iteration_histogram(),
            mna_iterations=mna_trace.iteration_histogram(),
            temperature_error=temperature_error(mna_trace, fit_trace),
            potential_error=potential_error(mna_trace, fit_trace),
            max_rel_diff_T=max_relative_difference(mna_trace.T, fit_trace.T),
            max_rel_diff_phi=max_relative_difference(mna_trace.phi, fit_trace.phi),
            netlist_sha256=hashlib.sha256(text.encode()).hexdigest(),
        )
    report.stage_seconds = {name: round(seconds, 6) for name, seconds in timings.items()}

    if report.temperature_error > CompareConfig.TEMPERATURE_ERROR_WARNING:
        logger.warning(f"[{scenario.name}] temperature error {report.temperature_error:.3e} is large")
    logger.info(
        f"[{scenario.name}] temperature error {report.temperature_error:.4e}, "
        f"potential error {report.potential_error:.4e}"
    )

    result = ComparisonResult(report, fit_trace, mna_trace, text, model.probes)
    if output_dir:
        write_outputs(result, output_dir)
    return result


def write_outputs(result: ComparisonResult, output_dir: str):
    """Traces, probe traces, netlist and both report formats."""
    os.makedirs(output_dir, exist_ok=True)
    result.fit.to_csv(os.path.join(output_dir, CompareConfig.FIT_TRACE))
    result.mna.to_csv(os.path.join(output_dir, CompareConfig.MNA_TRACE))
    if result.probes:
        result.fit.to_probe_csv(os.path.join(output_dir, CompareConfig.FIT_PROBES), result.probes)
        result.mna.to_probe_csv(os.path.join(output_dir, CompareConfig.MNA_PROBES), result.probes)
    with open(os.path.join(output_dir, CompareConfig.NETLIST), "w", newline="\n") as f:
        f.write(result.netlist_text)
    with open(os.path.join(output_dir, CompareConfig.REPORT_TEXT), "w") as f:
        f.write(result.report.to_text())
    with open(os.path.join(output_dir, CompareConfig.REPORT_JSON), "w") as f:
        json.dump(result.report.to_dict(), f, indent=2)
        f.write("\n")
    logger.info(f"Wrote comparison outputs to {output_dir}")


def convergence_study(
    scenario: Scenario,
    dts: Sequence[float],
    reference: str = "mna",
    tstop: Optional[float] = None,
) -> List[dict]:
    """
    Temperature error of the lagged field solver against a monolithic reference
    for a sequence of time steps.

    Args:
        reference: "mna" (generated netlist) or "fit" (monolithic field solver)

    Returns:
        one dict per dt with dt, temperature_error, potential_error and the
        ratio to the previous error
    """
    model = ElectrothermalModel(scenario)
    rows: List[dict] = []
    for dt in dts:
        base = model.settings(dt=dt, tstop=tstop)
        lagged = model.field_solver(base.with_overrides(mode="lagged")).run()
        ref_settings = base.with_overrides(mode="monolithic", integrator="be")
        if reference == "fit":
            ref = model.field_solver(ref_settings).run()
        else:
            ref = model.circuit_solver(ref_settings, via_text=False).run()
        error = temperature_error(lagged, ref)
        row = {"dt": dt, "temperature_error": error, "potential_error": potential_error(lagged, ref)}
        if rows and error > 0:
            row["ratio"] = rows[-1]["temperature_error"] / error
        rows.append(row)
        logger.info(f"dt={dt:.3e}: temperature error {error:.4e}")
    return rows
