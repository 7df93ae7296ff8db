"""
MNA Circuit Solver

Modified nodal analysis of a parsed netlist with transient Newton solves.

Unknowns: node voltages (ground excluded) followed by one branch current
per voltage source. Per step the residual is

    F(x) = C (x - x_prev)/dt + theta*r(x, t) + (1 - theta)*r(x_prev, t_prev)
    r(x, t) = G x + f_nl(x) - b(t)

with theta = 1 (backward Euler) or, for the trapezoidal rule, theta = 1/2
on rows that carry capacitance and 1 on algebraic rows.

Stamps:
    R, C            conductance / capacitance between n+ and n-
    V               extra row and column (branch current leaves n+)
    I, BI           current I flows from n+ through the source to n-
    BR              conductance 1/R(x) with the chain rule onto the
                    nodes referenced by R's expression
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .base import TransientSolver
from .config import NetlistConfig, SolverSettings
from .errors import NonphysicalResistivity, ShapeError, SingularWarning
from .models import StepInfo, TransientTrace
from .netlist.elements import (
    ELECTRICAL,
    THERMAL,
    BehavioralCurrent,
    BehavioralResistor,
    Capacitor,
    CurrentSource,
    Netlist,
    Resistor,
    VoltageSource,
)
from .netlist.expression import CompiledExpression
from .newton import newton_solve, sparse_lu
from .waveforms import Waveform

logger = logging.getLogger(__name__)

GROUND_INDEX = -1


@dataclass
class BehavioralStamp:
    """Nonlinear element: terminals, compiled expression and argument indices."""
    name: str
    plus: int
    minus: int
    expression: CompiledExpression
    args: np.ndarray  # unknown index per expression node, -1 for ground
    is_resistor: bool


@dataclass
class MnaSystem:
    """Assembled linear part plus the nonlinear and source stamps."""
    netlist: Netlist
    node_index: Dict[str, int]
    vsrc_index: Dict[str, int]
    dimension: int
    G: sp.csr_matrix
    C: sp.csr_matrix
    vsources: List[Tuple[int, Waveform]] = field(default_factory=list)
    isources: List[Tuple[int, int, Waveform]] = field(default_factory=list)
    behavioral: List[BehavioralStamp] = field(default_factory=list)

    @property
    def is_linear(self) -> bool:
        return not self.behavioral

    @property
    def num_nodes(self) -> int:
        return len(self.node_index)

    def index_of(self, node: str) -> int:
        return GROUND_INDEX if node == NetlistConfig.GROUND else self.node_index[node]

    def source_vector(self, t: float) -> np.ndarray:
        """b(t): independent current injections and voltage-source values."""
        b = np.zeros(self.dimension)
        for plus, minus, waveform in self.isources:
            value = float(waveform(t))
            if plus >= 0:
                b[plus] -= value
            if minus >= 0:
                b[minus] += value
        for row, waveform in self.vsources:
            b[row] = float(waveform(t))
        return b

    def nonlinear(self, x: np.ndarray) -> Tuple[np.ndarray, sp.csr_matrix]:
        """
        f_nl(x) and its Jacobian.

        Raises:
            NonphysicalResistivity: a behavioral resistance is not positive and finite
        """
        f = np.zeros(self.dimension)
        rows: List[int] = []
        cols: List[int] = []
        vals: List[float] = []
        for stamp in self.behavioral:
            v = np.where(stamp.args >= 0, x[np.maximum(stamp.args, 0)], 0.0)
            value = stamp.expression.value(v)
            grad = stamp.expression.gradient(v)
            if stamp.is_resistor:
                if not np.isfinite(value) or value <= 0.0:
                    raise NonphysicalResistivity(f"{stamp.name}: resistance {value:.4g} ohm")
                vp = x[stamp.plus] if stamp.plus >= 0 else 0.0
                vm = x[stamp.minus] if stamp.minus >= 0 else 0.0
                g = 1.0 / value
                current = (vp - vm) * g
                # d current / d args via R
                partial = [-(vp - vm) * g * g * d for d in grad]
                terminal = [(stamp.plus, g), (stamp.minus, -g)]
            else:
                current = value
                partial = grad
                terminal = []
            for row, sign in ((stamp.plus, 1.0), (stamp.minus, -1.0)):
                if row < 0:
                    continue
                f[row] += sign * current
                for col, d in terminal:
                    if col >= 0:
                        rows.append(row)
                        cols.append(col)
                        vals.append(sign * d)
                for col, d in zip(stamp.args, partial):
                    if col >= 0 and d != 0.0:
                        rows.append(row)
                        cols.append(int(col))
                        vals.append(sign * d)
        J = sp.coo_matrix((vals, (rows, cols)), shape=(self.dimension, self.dimension)).tocsr()
        return f, J

    def behavioral_conductance(self, x: np.ndarray) -> sp.csr_matrix:
        """Stamps of 1/R(x) for behavioral resistors, without chain-rule terms."""
        rows, cols, vals = [], [], []
        for stamp in self.behavioral:
            if not stamp.is_resistor:
                continue
            v = np.where(stamp.args >= 0, x[np.maximum(stamp.args, 0)], 0.0)
            g = 1.0 / stamp.expression.value(v)
            _stamp_pair(rows, cols, vals, stamp.plus, stamp.minus, g)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.dimension, self.dimension)).tocsr()

    def matrices_at(self, x: Optional[np.ndarray] = None) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
        """(C, G) with behavioral resistors evaluated at x (default: zero state)."""
        x = np.zeros(self.dimension) if x is None else x
        return self.C, (self.G + self.behavioral_conductance(x)).tocsr()


def _stamp_pair(rows, cols, vals, plus: int, minus: int, value: float):
    for r, c, s in ((plus, plus, 1.0), (minus, minus, 1.0), (plus, minus, -1.0), (minus, plus, -1.0)):
        if r >= 0 and c >= 0:
            rows.append(r)
            cols.append(c)
            vals.append(s * value)


def find_floating_nodes(netlist: Netlist) -> List[str]:
    """Nodes in connected components that do not contain ground."""
    names = [NetlistConfig.GROUND] + netlist.nodes()
    index = {name: i for i, name in enumerate(names)}
    if len(names) == 1:
        return []
    a = [index[e.n_plus] for e in netlist]
    b = [index[e.n_minus] for e in netlist]
    adjacency = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(len(names), len(names)))
    _, labels = connected_components(adjacency, directed=False)
    return [name for name, label in zip(names, labels) if label != labels[0]]


def assemble(netlist: Netlist) -> MnaSystem:
    """
    Build the MNA system of a netlist.

    Warns:
        SingularWarning: a subnetwork has no path to ground
    """
    node_index = {name: i for i, name in enumerate(netlist.nodes())}
    vsources = netlist.of_kind(VoltageSource)
    vsrc_index = {v.name: len(node_index) + k for k, v in enumerate(vsources)}
    dimension = len(node_index) + len(vsources)

    def idx(node: str) -> int:
        return GROUND_INDEX if node == NetlistConfig.GROUND else node_index[node]

    g_rows, g_cols, g_vals = [], [], []
    c_rows, c_cols, c_vals = [], [], []
    system_vsources: List[Tuple[int, Waveform]] = []
    isources: List[Tuple[int, int, Waveform]] = []
    behavioral: List[BehavioralStamp] = []

    for element in netlist:
        plus, minus = idx(element.n_plus), idx(element.n_minus)
        if isinstance(element, Resistor):
            _stamp_pair(g_rows, g_cols, g_vals, plus, minus, 1.0 / element.ohms)
        elif isinstance(element, Capacitor):
            _stamp_pair(c_rows, c_cols, c_vals, plus, minus, element.farads)
        elif isinstance(element, VoltageSource):
            k = vsrc_index[element.name]
            for node, sign in ((plus, 1.0), (minus, -1.0)):
                if node >= 0:
                    g_rows += [node, k]
                    g_cols += [k, node]
                    g_vals += [sign, sign]
            system_vsources.append((k, element.waveform))
        elif isinstance(element, CurrentSource):
            isources.append((plus, minus, element.waveform))
        elif isinstance(element, (BehavioralResistor, BehavioralCurrent)):
            compiled = CompiledExpression(element.expression)
            args = np.array([idx(n) for n in compiled.nodes], dtype=int)
            behavioral.append(BehavioralStamp(
                name=element.name,
                plus=plus,
                minus=minus,
                expression=compiled,
                args=args,
                is_resistor=isinstance(element, BehavioralResistor),
            ))

    shape = (dimension, dimension)
    system = MnaSystem(
        netlist=netlist,
        node_index=node_index,
        vsrc_index=vsrc_index,
        dimension=dimension,
        G=sp.coo_matrix((g_vals, (g_rows, g_cols)), shape=shape).tocsr(),
        C=sp.coo_matrix((c_vals, (c_rows, c_cols)), shape=shape).tocsr(),
        vsources=system_vsources,
        isources=isources,
        behavioral=behavioral,
    )

    floating = find_floating_nodes(netlist)
    if floating:
        message = f"{len(floating)} node(s) have no path to ground: {', '.join(floating[:5])}"
        logger.warning(message)
        warnings.warn(message, SingularWarning, stacklevel=2)

    logger.info(
        f"Assembled MNA system: {dimension} unknowns "
        f"({len(node_index)} nodes, {len(vsources)} voltage sources, {len(behavioral)} behavioral)"
    )
    return system


@dataclass
class CircuitState:
    x: np.ndarray
    t: float
    r: np.ndarray  # r(x, t) at this state, for the trapezoidal rule


class MnaSolver(TransientSolver):
    """Transient circuit solver; traces are mapped back to grid nodes via the node table."""

    name = "mna"

    def __init__(
        self,
        system: MnaSystem,
        settings: SolverSettings,
        num_grid_nodes: Optional[int] = None,
        initial_T: Optional[np.ndarray] = None,
    ):
        super().__init__(settings)
        self.system = system
        netlist = system.netlist
        self.electrical = {
            name: i for name, i in netlist.grid_nodes(ELECTRICAL).items() if name in system.node_index
        }
        self.thermal = {
            name: i for name, i in netlist.grid_nodes(THERMAL).items() if name in system.node_index
        }
        if num_grid_nodes is None:
            indices = list(self.electrical.values()) + list(self.thermal.values())
            num_grid_nodes = max(indices) + 1 if indices else 0
        self.num_grid_nodes = num_grid_nodes

        if initial_T is not None:
            initial_T = np.asarray(initial_T, dtype=float)
            if initial_T.shape != (num_grid_nodes,):
                raise ShapeError(f"initial_T must have shape ({num_grid_nodes},), got {initial_T.shape}")
        self.initial_T = initial_T

        self._electrical_rows = np.array(
            [system.node_index[name] for name in self.electrical] + list(system.vsrc_index.values()),
            dtype=int,
        )
        self._names = {i: name for name, i in system.node_index.items()}
        self._dynamic = np.asarray(abs(system.C).sum(axis=1)).ravel() > 0
        self._factor_cache: Dict[float, object] = {}

    @classmethod
    def from_netlist(cls, netlist: Netlist, settings: Optional[SolverSettings] = None, **kwargs) -> "MnaSolver":
        """Assemble a netlist; settings default to its .TRAN directive."""
        if settings is None:
            if netlist.tran is None:
                raise ValueError("netlist has no .TRAN directive and no settings were given")
            settings = SolverSettings(tstop=netlist.tran.tstop, dt=netlist.tran.dt)
        return cls(assemble(netlist), settings, **kwargs)

    def theta(self) -> np.ndarray:
        if self.settings.integrator == "trap":
            return np.where(self._dynamic, 0.5, 1.0)
        return np.ones(self.system.dimension)

    def residual_terms(self, x: np.ndarray, t: float) -> Tuple[np.ndarray, sp.csr_matrix]:
        """r(x, t) = G x + f_nl(x) - b(t) and its Jacobian."""
        f, J_nl = self.system.nonlinear(x)
        return self.system.G @ x + f - self.system.source_vector(t), (self.system.G + J_nl).tocsr()

    # -- TransientSolver -------------------------------------------------

    def initial_state(self) -> CircuitState:
        """
        Zero state except nodes driven directly against ground by a voltage
        source; thermal nodes start from initial_T when given.
        """
        x = np.zeros(self.system.dimension)
        if self.initial_T is not None:
            for name, i in self.thermal.items():
                x[self.system.node_index[name]] = self.initial_T[i]
        for element in self.system.netlist.of_kind(VoltageSource):
            plus = self.system.index_of(element.n_plus)
            minus = self.system.index_of(element.n_minus)
            value = float(element.waveform(0.0))
            if minus < 0 and plus >= 0:
                x[plus] = value
            elif plus < 0 and minus >= 0:
                x[minus] = -value
        r, _ = self.residual_terms(x, 0.0) if self.settings.integrator == "trap" else (None, None)
        return CircuitState(x=x, t=0.0, r=r)

    def advance(self, state: CircuitState, t_new: float, dt: float) -> Tuple[CircuitState, StepInfo]:
        system = self.system
        theta = self.theta()
        C_dt = system.C / dt
        old = (1.0 - theta) * state.r if state.r is not None else 0.0

        def residual(x):
            r, J_r = self.residual_terms(x, t_new)
            F = C_dt @ (x - state.x) + theta * r + old
            J = (C_dt + sp.diags(theta) @ J_r).tocsr()
            return F, J

        result = newton_solve(
            residual,
            state.x,
            t=t_new,
            tol=self.settings.newton_tol,
            max_iter=self.settings.max_iter,
            factorize=self._factorize(dt),
            blocks={"electrical": self._electrical_rows},
        )
        r_new = None
        if self.settings.integrator == "trap":
            r_new, _ = self.residual_terms(result.x, t_new)
        info = StepInfo(
            t=t_new,
            iterations=result.iterations,
            residual=result.residual,
            electrical_iterations=result.block_iterations.get("electrical"),
            halvings=result.halvings,
        )
        return CircuitState(x=result.x, t=t_new, r=r_new), info

    def observe(self, state: CircuitState):
        n = self.num_grid_nodes
        phi, T, q = np.zeros(n), np.zeros(n), np.zeros(n)
        x = state.x
        for name, i in self.electrical.items():
            phi[i] = x[self.system.node_index[name]]
        for name, i in self.thermal.items():
            T[i] = x[self.system.node_index[name]]
        for stamp in self.system.behavioral:
            if stamp.is_resistor:
                continue
            v = np.where(stamp.args >= 0, x[np.maximum(stamp.args, 0)], 0.0)
            value = stamp.expression.value(v)
            # positive current leaves n+ and enters n-
            for node, sign in ((stamp.minus, 1.0), (stamp.plus, -1.0)):
                name = self._name_of(node)
                if name in self.thermal:
                    q[self.thermal[name]] += sign * value
        return phi, T, q

    # -- internals -------------------------------------------------------

    def _name_of(self, index: int) -> Optional[str]:
        return self._names.get(index)

    def _factorize(self, dt: float):
        if not self.system.is_linear:
            return sparse_lu

        def cached(J):
            if dt not in self._factor_cache:
                self._factor_cache[dt] = sparse_lu(J)
            return self._factor_cache[dt]
        return cached

    def get_stats(self) -> dict:
        stats = super().get_stats()
        stats.update({
            "unknowns": self.system.dimension,
            "behavioral": len(self.system.behavioral),
            "integrator": self.settings.integrator,
            "cached_factorizations": len(self._factor_cache),
        })
        return stats


def solve_transient(
    system: MnaSystem,
    dt: float,
    tstop: float,
    newton_opts: Optional[dict] = None,
    num_grid_nodes: Optional[int] = None,
) -> TransientTrace:
    """
    Fixed-step transient of an assembled system.

    Args:
        newton_opts: optional SolverSettings fields (newton_tol, max_iter, integrator)

    Raises:
        NoConvergence: Newton failed at some step
        SingularSystem: the Jacobian could not be factorized
    """
    if dt <= 0 or tstop < dt:
        raise ValueError(f"need 0 < dt <= tstop, got dt={dt}, tstop={tstop}")
    settings = SolverSettings(tstop=tstop, dt=dt, **(newton_opts or {}))
    return MnaSolver(system, settings, num_grid_nodes=num_grid_nodes).run()
