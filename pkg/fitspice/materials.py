"""
Materials

Per-cell material properties, edge and node averaging, the diagonal FIT
material matrices and the temperature-dependent conductivity law.

Averaging:
    edge value  = sum of touching-cell values weighted by the share of the
                  dual facet each cell covers (1/4 each on an equidistant
                  interior edge, renormalized at the boundary)
    node value  = sum of intersecting-cell values weighted by the share of
                  the dual volume each cell covers

Conductivity law (temperature rise tau = T - T0):
    sigma_p(tau) = sigma_ref_p / (1 + alpha_p * tau)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .config import EPS0
from .errors import InvalidMaterial, NonphysicalResistivity, OpenBranch, PhantomEdge
from .grid import StaggeredGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Material:
    """Homogeneous isotropic property set."""
    name: str
    sigma: float = 0.0       # S/m at T0
    eps_r: float = 1.0
    lambda_th: float = 0.0   # W/K/m
    rho_c: float = 0.0       # J/K/m^3
    alpha: float = 0.0       # 1/K

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "eps_r": self.eps_r,
            "lambda": self.lambda_th,
            "rho_c": self.rho_c,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, name: str, data: dict) -> "Material":
        return cls(
            name=name,
            sigma=float(data.get("sigma", 0.0)),
            eps_r=float(data.get("eps_r", 1.0)),
            lambda_th=float(data.get("lambda", 0.0)),
            rho_c=float(data.get("rho_c", 0.0)),
            alpha=float(data.get("alpha", 0.0)),
        )


@dataclass
class MaterialModel:
    """Per-primary-cell properties in canonical cell order."""
    sigma_ref: np.ndarray
    eps: np.ndarray
    lambda_th: np.ndarray
    rho_c: np.ndarray
    alpha: np.ndarray
    T0: float = 300.0

    def __post_init__(self):
        for name in ("sigma_ref", "eps", "lambda_th", "rho_c", "alpha"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())

    @property
    def num_cells(self) -> int:
        return self.sigma_ref.size

    @property
    def is_linear(self) -> bool:
        """True when no conducting cell has a temperature coefficient."""
        return not np.any((self.alpha != 0.0) & (self.sigma_ref > 0.0))

    def validate(self, num_cells: int):
        """
        Raises:
            InvalidMaterial: wrong length, negative or non-finite entry, eps <= 0
        """
        for name in ("sigma_ref", "eps", "lambda_th", "rho_c", "alpha"):
            values = getattr(self, name)
            if values.size != num_cells:
                raise InvalidMaterial(f"{name} has {values.size} entries, grid has {num_cells} cells")
            if not np.all(np.isfinite(values)):
                raise InvalidMaterial(f"{name} contains non-finite values")
        for name in ("sigma_ref", "lambda_th", "rho_c"):
            if np.any(getattr(self, name) < 0):
                raise InvalidMaterial(f"{name} must be non-negative")
        if np.any(self.eps <= 0):
            raise InvalidMaterial("permittivity must be positive in every cell")

    @classmethod
    def uniform(cls, num_cells: int, material: Material, T0: float = 300.0) -> "MaterialModel":
        return cls.from_assignment([material], np.zeros(num_cells, dtype=int), T0)

    @classmethod
    def from_assignment(
        cls, materials: Sequence[Material], cell_material: np.ndarray, T0: float = 300.0
    ) -> "MaterialModel":
        """Build per-cell arrays from a palette and a cell -> palette index map."""
        idx = np.asarray(cell_material, dtype=int)
        table = np.array(
            [[m.sigma, m.eps_r, m.lambda_th, m.rho_c, m.alpha] for m in materials], dtype=float
        )
        props = table[idx]
        return cls(
            sigma_ref=props[:, 0],
            eps=EPS0 * props[:, 1],
            lambda_th=props[:, 2],
            rho_c=props[:, 3],
            alpha=props[:, 4],
            T0=T0,
        )


@dataclass(frozen=True)
class MaterialMatrices:
    """Diagonal FIT material matrices plus what the nonlinear law needs at runtime."""
    M_sigma: sp.csr_matrix   # 3n x 3n, S, at T0
    M_eps: sp.csr_matrix     # 3n x 3n, F
    M_lambda: sp.csr_matrix  # 3n x 3n, W/K
    M_rhoc: sp.csr_matrix    # n x n,   J/K
    sigma_bar_weights: sp.csr_matrix  # 3n x cells, rows sum to 1 on real edges
    node_weights: sp.csr_matrix       # n x cells, rows sum to 1
    edge_factor: np.ndarray           # 3n, |A~_j| / |L_j|, 0 on phantom edges
    # 3n x cells: conductance contributed by each touching cell at T0
    sigma_coefficients: sp.csr_matrix
    alpha: np.ndarray
    linear: bool = True
    _coef_rows: np.ndarray = field(default=None, repr=False)

    def conductances(self, tau_bar: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Edge conductances and their derivative w.r.t. the edge temperature rise.

        Args:
            tau_bar: 3n vector of edge-average temperature rises (K)

        Returns:
            (g, dg_dtau): M_sigma(T) diagonal and its derivative

        Raises:
            NonphysicalResistivity: 1 + alpha*tau <= 0 on a conducting cell
        """
        C = self.sigma_coefficients
        if self.linear:
            return self.M_sigma.diagonal(), np.zeros(C.shape[0])

        a = self.alpha[C.indices]
        factor = 1.0 + a * tau_bar[self._coef_rows]
        if np.any(factor <= 0.0):
            bad = int(self._coef_rows[np.argmin(factor)])
            raise NonphysicalResistivity(
                f"resistivity factor 1 + alpha*dT <= 0 on edge {bad} (dT={tau_bar[bad]:.4g} K)"
            )
        contrib = C.data / factor
        dcontrib = -C.data * a / factor ** 2
        g = np.bincount(self._coef_rows, weights=contrib, minlength=C.shape[0])
        dg = np.bincount(self._coef_rows, weights=dcontrib, minlength=C.shape[0])
        return g, dg

    def coefficient_groups(self, edge: int) -> Dict[float, float]:
        """Conductance coefficients of one edge, summed per distinct alpha."""
        row = self.sigma_coefficients.getrow(edge)
        groups: Dict[float, float] = {}
        for cell, c in zip(row.indices, row.data):
            if c == 0.0:
                continue
            a = float(self.alpha[cell])
            groups[a] = groups.get(a, 0.0) + float(c)
        return groups


def _half_widths(grid: StaggeredGrid) -> List[np.ndarray]:
    return [0.5 * h for h in grid.spacings]


def _node_ijk_arrays(grid: StaggeredGrid) -> List[np.ndarray]:
    nodes = np.arange(grid.n)
    nx, ny, _ = grid.node_counts
    return [nodes % nx, (nodes // nx) % ny, nodes // (nx * ny)]


def _cell_ids(grid: StaggeredGrid, ci, cj, ck) -> np.ndarray:
    cx, cy, _ = grid.cell_counts
    return ci + cx * cj + cx * cy * ck


def edge_average_weights(grid: StaggeredGrid) -> sp.csr_matrix:
    """
    Sparse 3n x cells matrix of edge averaging weights.

    The weight of cell p on edge j is the part of the dual facet A~_j lying in
    p, divided by |A~_j|. Phantom rows are empty.
    """
    ijk = _node_ijk_arrays(grid)
    half = _half_widths(grid)
    cells = grid.cell_counts
    areas = grid.dual_facet_areas

    rows, cols, vals = [], [], []
    for axis in range(3):
        b, c = [ax for ax in range(3) if ax != axis]
        edges = np.arange(grid.n) + grid.n * axis
        for ob in (-1, 0):
            for oc in (-1, 0):
                cell = [None, None, None]
                cell[axis] = ijk[axis]
                cell[b] = ijk[b] + ob
                cell[c] = ijk[c] + oc
                valid = (
                    (cell[axis] < cells[axis])
                    & (cell[b] >= 0) & (cell[b] < cells[b])
                    & (cell[c] >= 0) & (cell[c] < cells[c])
                )
                if not np.any(valid):
                    continue
                cb, cc = cell[b][valid], cell[c][valid]
                share = half[b][cb] * half[c][cc]
                e = edges[valid]
                rows.append(e)
                cols.append(_cell_ids(grid, *(cell[ax][valid] for ax in range(3))))
                vals.append(share / areas[e])

    W = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * grid.n, grid.num_cells),
    )
    return W.tocsr()


def node_average_weights(grid: StaggeredGrid) -> sp.csr_matrix:
    """Sparse n x cells matrix: share of the dual volume V~_i inside each cell."""
    ijk = _node_ijk_arrays(grid)
    half = _half_widths(grid)
    cells = grid.cell_counts
    nodes = np.arange(grid.n)

    rows, cols, vals = [], [], []
    for ox in (-1, 0):
        for oy in (-1, 0):
            for oz in (-1, 0):
                cell = [ijk[0] + ox, ijk[1] + oy, ijk[2] + oz]
                valid = np.ones(grid.n, dtype=bool)
                for ax in range(3):
                    valid &= (cell[ax] >= 0) & (cell[ax] < cells[ax])
                if not np.any(valid):
                    continue
                c = [cell[ax][valid] for ax in range(3)]
                share = half[0][c[0]] * half[1][c[1]] * half[2][c[2]]
                m = nodes[valid]
                rows.append(m)
                cols.append(_cell_ids(grid, *c))
                vals.append(share / grid.dual_volumes[m])

    W = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n, grid.num_cells),
    )
    return W.tocsr()


def average_edge_property(
    grid: StaggeredGrid, per_cell_values: np.ndarray, edge_j: int
) -> Tuple[float, List[Tuple[int, float]]]:
    """
    Area-weighted average of a cell property over the cells touching an edge.

    Returns:
        (value, [(cell, weight), ...])

    Raises:
        PhantomEdge: edge leaves the grid
    """
    if edge_j < 0 or edge_j >= 3 * grid.n:
        raise IndexError(f"edge {edge_j} outside 0..{3 * grid.n - 1}")
    if grid.phantom[edge_j]:
        raise PhantomEdge(f"edge {edge_j} is a phantom edge")
    row = edge_average_weights(grid).getrow(edge_j)
    values = np.asarray(per_cell_values, dtype=float)
    weights = list(zip(row.indices.tolist(), row.data.tolist()))
    return float(row.data @ values[row.indices]), weights


def assemble_material_matrices(grid: StaggeredGrid, materials: MaterialModel) -> MaterialMatrices:
    """
    Build M_sigma, M_eps, M_lambda (3n) and M_rhoc (n).

    Raises:
        InvalidMaterial: property arrays do not fit the grid or are negative
    """
    materials.validate(grid.num_cells)

    W_edge = edge_average_weights(grid)
    W_node = node_average_weights(grid)

    factor = np.zeros(3 * grid.n)
    real = ~grid.phantom
    factor[real] = grid.dual_facet_areas[real] / grid.edge_lengths[real]

    coefficients = (sp.diags(factor) @ W_edge @ sp.diags(materials.sigma_ref)).tocsr()
    coefficients.eliminate_zeros()
    coef_rows = np.repeat(np.arange(coefficients.shape[0]), np.diff(coefficients.indptr))

    sigma_bar = W_edge @ materials.sigma_ref
    eps_bar = W_edge @ materials.eps
    lambda_bar = W_edge @ materials.lambda_th
    rhoc_bar = W_node @ materials.rho_c

    matrices = MaterialMatrices(
        M_sigma=sp.diags(factor * sigma_bar, format="csr"),
        M_eps=sp.diags(factor * eps_bar, format="csr"),
        M_lambda=sp.diags(factor * lambda_bar, format="csr"),
        M_rhoc=sp.diags(rhoc_bar * grid.dual_volumes, format="csr"),
        sigma_bar_weights=W_edge,
        node_weights=W_node,
        edge_factor=factor,
        sigma_coefficients=coefficients,
        alpha=materials.alpha,
        linear=materials.is_linear,
        _coef_rows=coef_rows,
    )
    logger.debug(
        f"Assembled material matrices: {int(np.count_nonzero(factor * sigma_bar))} conducting edges, "
        f"linear={matrices.linear}"
    )
    return matrices


def evaluate_sigma_of_T(materials: MaterialModel, cell_p: int, T_bar: float) -> float:
    """
    Conductivity of one cell at absolute edge temperature T_bar (K).

    Raises:
        NonphysicalResistivity: 1 + alpha*(T_bar - T0) <= 0
    """
    sigma = float(materials.sigma_ref[cell_p])
    if sigma == 0.0:
        return 0.0
    factor = 1.0 + float(materials.alpha[cell_p]) * (T_bar - materials.T0)
    if factor <= 0.0:
        raise NonphysicalResistivity(
            f"cell {cell_p}: resistivity factor {factor:.4g} at T={T_bar:.4g} K"
        )
    return sigma / factor


def edge_resistance_of_T(
    grid: StaggeredGrid, materials: MaterialModel, edge_j: int, T_bar: float
) -> float:
    """
    R_j = |L_j| / (sigma_bar_j(T_bar) |A~_j|), the reciprocal of the FIT conductance.

    Raises:
        PhantomEdge: edge leaves the grid
        OpenBranch: no conducting cell touches the edge
    """
    _, weights = average_edge_property(grid, materials.sigma_ref, edge_j)
    sigma_bar = sum(w * evaluate_sigma_of_T(materials, p, T_bar) for p, w in weights)
    if sigma_bar <= 0.0:
        raise OpenBranch(f"edge {edge_j} has zero conductivity")
    return float(grid.edge_lengths[edge_j] / (sigma_bar * grid.dual_facet_areas[edge_j]))
