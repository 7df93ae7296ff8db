"""
fitspice Data Models

Boundary conditions, lumped branches, transient traces and comparison reports.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional
import hashlib
import json

import numpy as np
import pandas as pd

from .errors import MissingGround, ScenarioError, ShapeError
from .waveforms import Waveform


@dataclass(frozen=True)
class ExtraBranch:
    """Lumped two-node branch outside the grid, e.g. a bonding wire."""
    name: str
    node_a: int
    node_b: int
    g_el: float = 0.0  # S
    g_th: float = 0.0  # W/K

    def to_dict(self) -> dict:
        return {"name": self.name, "a": self.node_a, "b": self.node_b, "g_el": self.g_el, "g_th": self.g_th}


@dataclass
class BoundaryConditions:
    """Dirichlet maps (grid node -> waveform) and extra branches."""
    electric_dirichlet: Dict[int, Waveform] = field(default_factory=dict)
    thermal_dirichlet: Dict[int, Waveform] = field(default_factory=dict)  # rises over T0
    extra_branches: List[ExtraBranch] = field(default_factory=list)

    def validate(self, n: int):
        """
        Raises:
            MissingGround: no electric Dirichlet node
            ScenarioError: node index outside the grid, bad branch
        """
        if not self.electric_dirichlet:
            raise MissingGround("at least one electric Dirichlet node is required as potential reference")
        for label, nodes in (("electric", self.electric_dirichlet), ("thermal", self.thermal_dirichlet)):
            for node in nodes:
                if not 0 <= int(node) < n:
                    raise ScenarioError(f"{label} Dirichlet node {node} outside 0..{n - 1}")
        names = set()
        for branch in self.extra_branches:
            if branch.name in names:
                raise ScenarioError(f"duplicate extra branch name {branch.name!r}")
            names.add(branch.name)
            for node in (branch.node_a, branch.node_b):
                if not 0 <= int(node) < n:
                    raise ScenarioError(f"extra branch {branch.name!r}: node {node} outside 0..{n - 1}")
            if branch.node_a == branch.node_b:
                raise ScenarioError(f"extra branch {branch.name!r} connects a node to itself")
            if branch.g_el < 0 or branch.g_th < 0:
                raise ScenarioError(f"extra branch {branch.name!r} has a negative conductance")


@dataclass
class StepInfo:
    """Newton bookkeeping of one accepted time step."""
    t: float
    iterations: int
    residual: float
    electrical_iterations: Optional[int] = None
    halvings: int = 0

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "iterations": self.iterations,
            "residual": self.residual,
            "electrical_iterations": self.electrical_iterations,
            "halvings": self.halvings,
        }


@dataclass
class TransientTrace:
    """Time-indexed nodal potentials, temperature rises and Joule losses."""
    times: np.ndarray
    phi: np.ndarray    # steps x n, V
    T: np.ndarray      # steps x n, K over T0
    q_el: np.ndarray   # steps x n, W
    step_meta: List[StepInfo] = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.T = np.atleast_2d(np.asarray(self.T, dtype=float))
        self.q_el = np.atleast_2d(np.asarray(self.q_el, dtype=float))
        shape = (self.times.size, self.phi.shape[1])
        for name in ("phi", "T", "q_el"):
            if getattr(self, name).shape != shape:
                raise ShapeError(f"trace {name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def num_nodes(self) -> int:
        return self.phi.shape[1]

    @property
    def num_steps(self) -> int:
        return self.times.size - 1

    def iteration_histogram(self) -> Dict[int, int]:
        """Newton iterations -> number of steps."""
        return dict(sorted(Counter(info.iterations for info in self.step_meta).items()))

    def total_iterations(self) -> int:
        return sum(info.iterations for info in self.step_meta)

    def to_frame(self) -> pd.DataFrame:
        """Long format, one row per node per time point: t,node_id,phi,T,q_el."""
        steps, n = self.phi.shape
        return pd.DataFrame({
            "t": np.repeat(self.times, n),
            "node_id": np.tile(np.arange(n), steps),
            "phi": self.phi.ravel(),
            "T": self.T.ravel(),
            "q_el": self.q_el.ravel(),
        })

    def probe_frame(self, probes: Dict[str, int]) -> pd.DataFrame:
        """Compact format: t,<probe>_phi,<probe>_T per named node."""
        columns = {"t": self.times}
        for name, node in probes.items():
            columns[f"{name}_phi"] = self.phi[:, node]
            columns[f"{name}_T"] = self.T[:, node]
        return pd.DataFrame(columns)

    def to_csv(self, path: str):
        self.to_frame().to_csv(path, index=False, float_format="%.12e")

    def to_probe_csv(self, path: str, probes: Dict[str, int]):
        self.probe_frame(probes).to_csv(path, index=False, float_format="%.12e")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, source: str = "") -> "TransientTrace":
        """Inverse of to_frame (step metadata is not stored in CSV)."""
        frame = frame.sort_values(["t", "node_id"], kind="stable")
        times = np.unique(frame["t"].to_numpy())
        n = int(frame["node_id"].max()) + 1
        shape = (times.size, n)
        return cls(
            times=times,
            phi=frame["phi"].to_numpy().reshape(shape),
            T=frame["T"].to_numpy().reshape(shape),
            q_el=frame["q_el"].to_numpy().reshape(shape),
            source=source,
        )

    @classmethod
    def read_csv(cls, path: str) -> "TransientTrace":
        return cls.from_frame(pd.read_csv(path), source=path)


@dataclass
class CompareReport:
    """Result of one field-versus-circuit comparison run."""
    scenario: str
    settings: dict = field(default_factory=dict)
    num_nodes: int = 0
    num_steps: int = 0
    card_count: int = 0
    card_counts: Dict[str, int] = field(default_factory=dict)
    stage_seconds: Dict[str, float] = field(default_factory=dict)
    fit_iterations: Dict[int, int] = field(default_factory=dict)
    mna_iterations: Dict[int, int] = field(default_factory=dict)
    temperature_error: float = 0.0
    potential_error: float = 0.0
    max_rel_diff_T: float = 0.0
    max_rel_diff_phi: float = 0.0
    netlist_sha256: str = ""
    hash: str = ""  # SHA256 over the deterministic fields

    def __post_init__(self):
        if not self.hash:
            self.hash = self._compute_hash()

    def _compute_hash(self) -> str:
        """SHA256 of everything except wall times."""
        data = {
            "scenario": self.scenario,
            "settings": self.settings,
            "card_count": self.card_count,
            "temperature_error": repr(self.temperature_error),
            "potential_error": repr(self.potential_error),
            "netlist_sha256": self.netlist_sha256,
        }
        data_str = json.dumps(data, sort_keys=True)
        return hashlib.sha256(data_str.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        """Convert to dictionary for JSON serialization."""
        return {
            "scenario": self.scenario,
            "settings": self.settings,
            "num_nodes": self.num_nodes,
            "num_steps": self.num_steps,
            "card_count": self.card_count,
            "card_counts": self.card_counts,
            "stage_seconds": self.stage_seconds,
            "fit_iterations": {str(k): v for k, v in self.fit_iterations.items()},
            "mna_iterations": {str(k): v for k, v in self.mna_iterations.items()},
            "temperature_error": self.temperature_error,
            "potential_error": self.potential_error,
            "max_rel_diff_T": self.max_rel_diff_T,
            "max_rel_diff_phi": self.max_rel_diff_phi,
            "netlist_sha256": self.netlist_sha256,
            "hash": self.hash,
        }

    def to_text(self) -> str:
        """Human-readable summary."""
        lines = [
            f"Scenario:            {self.scenario}",
            f"Nodes / steps:       {self.num_nodes} / {self.num_steps}",
            f"Settings:            " + ", ".join(f"{k}={v}" for k, v in self.settings.items()),
            f"Netlist cards:       {self.card_count} (sha256 {self.netlist_sha256[:16]})",
        ]
        for kind, count in sorted(self.card_counts.items()):
            lines.append(f"  {kind:<18} {count}")
        lines.append("Stage wall times:")
        for stage, seconds in self.stage_seconds.items():
            lines.append(f"  {stage:<18} {seconds:.3f}s")
        lines.append(f"Newton iterations (FIT): {_format_histogram(self.fit_iterations)}")
        lines.append(f"Newton iterations (MNA): {_format_histogram(self.mna_iterations)}")
        lines.append(f"Temperature error norm:  {self.temperature_error:.4e} ({self.temperature_error * 100:.4f}%)")
        lines.append(f"Potential error norm:    {self.potential_error:.4e} ({self.potential_error * 100:.4f}%)")
        lines.append(f"Max relative diff T:     {self.max_rel_diff_T:.4e}")
        lines.append(f"Max relative diff phi:   {self.max_rel_diff_phi:.4e}")
        lines.append(f"Report hash:             {self.hash}")
        return "\n".join(lines) + "\n"


def _format_histogram(histogram: Dict[int, int]) -> str:
    if not histogram:
        return "-"
    return ", ".join(f"{k}:{v}" for k, v in sorted(histogram.items()))
