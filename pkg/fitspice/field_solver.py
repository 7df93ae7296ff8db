"""
Field Solver

Backward-Euler transient solver for the coupled FIT system

    K_eps dPhi/dt + K_sigma(T) Phi        = 0
    M_rhoc dT/dt  + K_lambda T            = Q_el(Phi, T)

with K_x = G^T M_x G (= S_dual M_x S_dual^T), edge voltages u = G Phi,
branch losses Q_hat = u * (M_sigma(T) u) and nodal losses Q_el = W Q_hat,
W = 1/2 D_V~ P_Q D_V^-1. Temperatures are rises over T0.

Coupling modes:
    lagged      one Gauss-Seidel pass: electrical solve with sigma at the
                previous T, losses from the new Phi, then the thermal solve
    monolithic  Newton on (Phi, T) jointly with analytic Jacobian blocks

Dirichlet values are eliminated: the unknowns are the free nodes only.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .base import TransientSolver
from .config import SolverSettings
from .errors import ShapeError
from .grid import IncidenceOperators, StaggeredGrid, build_incidence
from .materials import MaterialMatrices, MaterialModel, assemble_material_matrices
from .models import BoundaryConditions, StepInfo
from .newton import newton_solve, scaled_residual, sparse_lu

logger = logging.getLogger(__name__)


def compute_branch_losses(e: np.ndarray, j_current: np.ndarray) -> np.ndarray:
    """
    Per-edge Joule power Q_hat = e * j (Hadamard product).

    Raises:
        ShapeError: vectors differ in shape
    """
    e = np.asarray(e, dtype=float)
    j_current = np.asarray(j_current, dtype=float)
    if e.shape != j_current.shape:
        raise ShapeError(f"edge voltage {e.shape} and current {j_current.shape} differ")
    return e * j_current


def loss_projection(grid: StaggeredGrid, P_Q: sp.spmatrix) -> sp.csr_matrix:
    """W = 1/2 D_V~ P_Q D_V^-1 with the inverse taken as zero on phantom edges."""
    inv = np.zeros(3 * grid.n)
    real = grid.shifted_volumes > 0
    inv[real] = 1.0 / grid.shifted_volumes[real]
    return (0.5 * sp.diags(grid.dual_volumes) @ P_Q @ sp.diags(inv)).tocsr()


def project_losses(grid: StaggeredGrid, P_Q: sp.spmatrix, Q_hat: np.ndarray) -> np.ndarray:
    """
    Distribute per-edge losses onto the dual cells of the edge endpoints.

    Raises:
        ShapeError: Q_hat is not a 3n vector
    """
    Q_hat = np.asarray(Q_hat, dtype=float)
    if Q_hat.shape != (3 * grid.n,):
        raise ShapeError(f"Q_hat must have shape ({3 * grid.n},), got {Q_hat.shape}")
    return loss_projection(grid, P_Q) @ Q_hat


def branch_laplacian(n: int, branches, attr: str) -> sp.csr_matrix:
    """Nodal conductance matrix of lumped branches (attr 'g_el' or 'g_th')."""
    rows, cols, vals = [], [], []
    for b in branches:
        g = getattr(b, attr)
        if g == 0.0:
            continue
        rows += [b.node_a, b.node_b, b.node_a, b.node_b]
        cols += [b.node_a, b.node_b, b.node_b, b.node_a]
        vals += [g, g, -g, -g]
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


@dataclass(frozen=True)
class AssembledSystem:
    """Operators and material matrices of one discretized model."""
    grid: StaggeredGrid
    ops: IncidenceOperators
    mats: MaterialMatrices
    K_eps: sp.csr_matrix
    K_sigma0: sp.csr_matrix   # at T0, extra branches included
    K_lambda: sp.csr_matrix   # extra branches included
    M_rhoc: sp.csr_matrix
    W_loss: sp.csr_matrix
    edge_mean: sp.csr_matrix  # 1/2 |G|: node temperatures -> edge averages
    L_el: sp.csr_matrix
    L_th: sp.csr_matrix


def assemble_system(
    grid: StaggeredGrid, materials: MaterialModel, extra_branches=()
) -> AssembledSystem:
    ops = build_incidence(grid)
    mats = assemble_material_matrices(grid, materials)
    G, GT = ops.G, ops.G.T.tocsr()
    L_el = branch_laplacian(grid.n, extra_branches, "g_el")
    L_th = branch_laplacian(grid.n, extra_branches, "g_th")
    system = AssembledSystem(
        grid=grid,
        ops=ops,
        mats=mats,
        K_eps=(GT @ mats.M_eps @ G).tocsr(),
        K_sigma0=(GT @ mats.M_sigma @ G + L_el).tocsr(),
        K_lambda=(GT @ mats.M_lambda @ G + L_th).tocsr(),
        M_rhoc=mats.M_rhoc,
        W_loss=loss_projection(grid, ops.P_Q),
        edge_mean=(0.5 * abs(G)).tocsr(),
        L_el=L_el,
        L_th=L_th,
    )
    logger.info(f"Assembled FIT system: n={grid.n}, {G.nnz // 2} real edges")
    return system


def free_nodes(n: int, fixed) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[list(fixed)] = False
    return np.flatnonzero(mask)


def eliminated_matrices(system: AssembledSystem, bcs: BoundaryConditions) -> Dict[str, sp.csr_matrix]:
    """FIT matrices restricted to non-Dirichlet rows and columns."""
    fe = free_nodes(system.grid.n, bcs.electric_dirichlet)
    ft = free_nodes(system.grid.n, bcs.thermal_dirichlet)
    return {
        "K_eps": system.K_eps[fe][:, fe].tocsr(),
        "K_sigma": system.K_sigma0[fe][:, fe].tocsr(),
        "M_rhoc": system.M_rhoc[ft][:, ft].tocsr(),
        "K_lambda": system.K_lambda[ft][:, ft].tocsr(),
    }


@dataclass
class FieldState:
    phi: np.ndarray
    T: np.ndarray
    q_el: np.ndarray


class FieldSolver(TransientSolver):
    """
    FIT reference solver.

    Integration is always backward Euler; SolverSettings.integrator only
    affects the circuit solver.
    """

    name = "fit"

    def __init__(
        self,
        grid: StaggeredGrid,
        materials: MaterialModel,
        bcs: BoundaryConditions,
        settings: SolverSettings,
        initial_T: Optional[np.ndarray] = None,
        losses_enabled: bool = True,
        system: Optional[AssembledSystem] = None,
    ):
        super().__init__(settings)
        bcs.validate(grid.n)
        self.grid = grid
        self.materials = materials
        self.bcs = bcs
        self.system = system or assemble_system(grid, materials, bcs.extra_branches)
        self.losses_enabled = losses_enabled

        n = grid.n
        self.fe = free_nodes(n, bcs.electric_dirichlet)
        self.ft = free_nodes(n, bcs.thermal_dirichlet)
        self.de = np.array(sorted(bcs.electric_dirichlet), dtype=int)
        self.dt_nodes = np.array(sorted(bcs.thermal_dirichlet), dtype=int)

        if initial_T is not None:
            initial_T = np.asarray(initial_T, dtype=float)
            if initial_T.shape != (n,):
                raise ShapeError(f"initial_T must have shape ({n},), got {initial_T.shape}")
        self.initial_T = initial_T

        # (name, dt) -> solve callable for matrices that stay constant
        self._factor_cache: Dict[Tuple[str, float], Callable] = {}

    # -- physics ---------------------------------------------------------

    def edge_temperatures(self, T: np.ndarray) -> np.ndarray:
        """Edge-average temperature rises, 1/2 (T_tail + T_head)."""
        return self.system.edge_mean @ T

    def losses(self, phi: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Nodal Joule losses for potentials phi and edge conductances g."""
        if not self.losses_enabled:
            return np.zeros(self.grid.n)
        u = self.system.ops.G @ phi
        return self.system.W_loss @ compute_branch_losses(u, g * u)

    def conductance_matrix(self, g: np.ndarray) -> sp.csr_matrix:
        G = self.system.ops.G
        return (G.T @ sp.diags(g) @ G + self.system.L_el).tocsr()

    # -- TransientSolver -------------------------------------------------

    def initial_state(self) -> FieldState:
        n = self.grid.n
        phi = np.zeros(n)
        T = np.zeros(n) if self.initial_T is None else self.initial_T.copy()
        self._apply_dirichlet(phi, T, 0.0)
        g, _ = self.system.mats.conductances(self.edge_temperatures(T))
        return FieldState(phi=phi, T=T, q_el=self.losses(phi, g))

    def observe(self, state: FieldState):
        return state.phi.copy(), state.T.copy(), state.q_el.copy()

    def advance(self, state: FieldState, t_new: float, dt: float) -> Tuple[FieldState, StepInfo]:
        if self.settings.mode == "monolithic":
            return self._step_monolithic(state, t_new, dt)
        return self._step_lagged(state, t_new, dt)

    def step_coupled(self, state: FieldState, t_new: float, dt: float, mode: str) -> FieldState:
        """One implicit step in the given coupling mode."""
        if mode == "monolithic":
            return self._step_monolithic(state, t_new, dt)[0]
        return self._step_lagged(state, t_new, dt)[0]

    # -- internals -------------------------------------------------------

    def _apply_dirichlet(self, phi: np.ndarray, T: np.ndarray, t: float):
        for node, w in self.bcs.electric_dirichlet.items():
            phi[node] = float(w(t))
        for node, w in self.bcs.thermal_dirichlet.items():
            T[node] = float(w(t))

    def _solve_restricted(
        self, A: sp.csr_matrix, rhs: np.ndarray, x: np.ndarray, free: np.ndarray,
        fixed: np.ndarray, cache_key: Optional[Tuple[str, float]],
    ) -> Tuple[np.ndarray, float]:
        """Solve A x = rhs for the free entries of x; returns (x, scaled residual)."""
        if free.size == 0:
            return x, 0.0
        A_ff = A[free][:, free].tocsc()
        b = rhs[free] - A[free][:, fixed] @ x[fixed] if fixed.size else rhs[free]
        if cache_key is not None and cache_key in self._factor_cache:
            solve = self._factor_cache[cache_key]
        else:
            solve = sparse_lu(A_ff)
            if cache_key is not None:
                self._factor_cache[cache_key] = solve
        x = x.copy()
        x[free] = solve(b)
        residual = A_ff @ x[free] - b
        return x, scaled_residual(residual, A_ff, x[free], np.abs(b))

    def _step_lagged(self, state: FieldState, t_new: float, dt: float) -> Tuple[FieldState, StepInfo]:
        sysm = self.system
        phi = np.zeros(self.grid.n)
        T = state.T.copy()
        self._apply_dirichlet(phi, T, t_new)

        # Electrical block, sigma at the previous temperature
        g, _ = sysm.mats.conductances(self.edge_temperatures(state.T))
        A_el = (sysm.K_eps / dt + self.conductance_matrix(g)).tocsr()
        key = ("electrical", dt) if sysm.mats.linear else None
        phi, res_el = self._solve_restricted(
            A_el, sysm.K_eps @ state.phi / dt, phi, self.fe, self.de, key
        )

        # Thermal block with the losses of the new potentials
        q = self.losses(phi, g)
        A_th = (sysm.M_rhoc / dt + sysm.K_lambda).tocsr()
        T, res_th = self._solve_restricted(
            A_th, sysm.M_rhoc @ state.T / dt + q, T, self.ft, self.dt_nodes, ("thermal", dt)
        )

        info = StepInfo(t=t_new, iterations=1, residual=max(res_el, res_th), electrical_iterations=1)
        return FieldState(phi=phi, T=T, q_el=q), info

    def _step_monolithic(self, state: FieldState, t_new: float, dt: float) -> Tuple[FieldState, StepInfo]:
        sysm = self.system
        n = self.grid.n
        G = sysm.ops.G
        GT = G.T.tocsr()
        fe, ft = self.fe, self.ft
        free = np.concatenate([fe, n + ft])

        phi_base = state.phi.copy()
        T_base = state.T.copy()
        self._apply_dirichlet(phi_base, T_base, t_new)

        A_eps = sysm.K_eps / dt
        A_rho = sysm.M_rhoc / dt
        W = sysm.W_loss
        H = sysm.edge_mean
        loss_scale = 1.0 if self.losses_enabled else 0.0

        def unpack(x):
            phi = phi_base.copy()
            T = T_base.copy()
            phi[fe] = x[:fe.size]
            T[ft] = x[fe.size:]
            return phi, T

        def residual(x):
            phi, T = unpack(x)
            u = G @ phi
            g, dg = sysm.mats.conductances(H @ T)
            F_e = A_eps @ (phi - state.phi) + GT @ (g * u) + sysm.L_el @ phi
            F_t = A_rho @ (T - state.T) + sysm.K_lambda @ T - loss_scale * (W @ (g * u * u))
            J_ee = A_eps + GT @ sp.diags(g) @ G + sysm.L_el
            J_et = GT @ sp.diags(u * dg) @ H
            J_te = -loss_scale * (W @ sp.diags(2.0 * g * u) @ G)
            J_tt = A_rho + sysm.K_lambda - loss_scale * (W @ sp.diags(u * u * dg) @ H)
            F = np.concatenate([F_e, F_t])[free]
            J = sp.bmat([[J_ee, J_et], [J_te, J_tt]], format="csr")[free][:, free]
            return F, J

        x0 = np.concatenate([phi_base[fe], T_base[ft]])
        result = newton_solve(
            residual,
            x0,
            t=t_new,
            tol=self.settings.newton_tol,
            max_iter=self.settings.max_iter,
            blocks={"electrical": np.arange(fe.size)},
        )
        phi, T = unpack(result.x)
        g, _ = sysm.mats.conductances(H @ T)
        info = StepInfo(
            t=t_new,
            iterations=result.iterations,
            residual=result.residual,
            electrical_iterations=result.block_iterations.get("electrical"),
            halvings=result.halvings,
        )
        return FieldState(phi=phi, T=T, q_el=self.losses(phi, g)), info

    def get_stats(self) -> dict:
        stats = super().get_stats()
        stats.update({
            "nodes": self.grid.n,
            "free_electric": int(self.fe.size),
            "free_thermal": int(self.ft.size),
            "cached_factorizations": len(self._factor_cache),
        })
        return stats


def thermal_energy(system: AssembledSystem, T: np.ndarray) -> float:
    """Sum_i M_rhoc[i,i] T_i (J, relative to T0)."""
    return float(system.M_rhoc.diagonal() @ T)
