"""
Staggered Grid

Primary/dual hexahedral grid pair with canonical indexing, boundary-clipped
dual measures and the discrete topological operators G, S_dual and P_Q.

Canonical indexing (zero-based):
    node (i, j, k)         -> i + nx*j + nx*ny*k
    edge of axis a at node -> node + n*a,  a in {0: x, 1: y, 2: z}
Edges whose head would leave the grid are "phantom": they keep their slot in
every 3n-sized array with zero measures and all-zero operator rows.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import InvalidGeometry

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _outer3(fx: np.ndarray, fy: np.ndarray, fz: np.ndarray) -> np.ndarray:
    """Flattened outer product with x running fastest."""
    return np.multiply.outer(np.multiply.outer(fz, fy), fx).ravel()


@dataclass(frozen=True)
class StaggeredGrid:
    """Geometry of the primary grid and its boundary-clipped dual."""
    node_counts: Tuple[int, int, int]
    spacings: Tuple[np.ndarray, np.ndarray, np.ndarray]
    n: int
    coordinates: Tuple[np.ndarray, np.ndarray, np.ndarray]
    edge_lengths: np.ndarray      # 3n, |L_j|
    dual_facet_areas: np.ndarray  # 3n, |A~_j|
    dual_volumes: np.ndarray      # n,  |V~_i|
    shifted_volumes: np.ndarray   # 3n, |V^_j| = |A~_j| |L_j|
    phantom: np.ndarray           # 3n bool

    @property
    def strides(self) -> Tuple[int, int, int]:
        nx, ny, _ = self.node_counts
        return 1, nx, nx * ny

    @property
    def cell_counts(self) -> Tuple[int, int, int]:
        nx, ny, nz = self.node_counts
        return nx - 1, ny - 1, nz - 1

    @property
    def num_cells(self) -> int:
        cx, cy, cz = self.cell_counts
        return cx * cy * cz

    @property
    def real_edges(self) -> np.ndarray:
        return np.flatnonzero(~self.phantom)

    @property
    def extent(self) -> Tuple[float, float, float]:
        return tuple(float(c[-1]) for c in self.coordinates)

    @property
    def total_volume(self) -> float:
        return float(np.prod([np.sum(h) for h in self.spacings]))

    def node_index(self, i: int, j: int, k: int) -> int:
        nx, ny, nz = self.node_counts
        if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
            raise IndexError(f"node ({i}, {j}, {k}) outside grid {self.node_counts}")
        return i + nx * j + nx * ny * k

    def node_ijk(self, node: int) -> Tuple[int, int, int]:
        nx, ny, _ = self.node_counts
        return node % nx, (node // nx) % ny, node // (nx * ny)

    def edge_index(self, node: int, axis: int) -> int:
        return node + self.n * axis

    def edge_nodes(self, edge: int) -> Tuple[int, int]:
        """(tail, head) of a real edge; the edge points along the positive axis."""
        axis, tail = divmod(edge, self.n)
        return tail, tail + self.strides[axis]

    def is_interior(self, node: int) -> bool:
        ijk = self.node_ijk(node)
        return all(0 < c < count - 1 for c, count in zip(ijk, self.node_counts))

    def nodes_where(self, predicate) -> np.ndarray:
        """Indices of nodes whose (x, y, z) position satisfies predicate."""
        xs, ys, zs = self.coordinates
        X = np.multiply.outer(np.multiply.outer(np.ones_like(zs), np.ones_like(ys)), xs).ravel()
        Y = np.multiply.outer(np.multiply.outer(np.ones_like(zs), ys), np.ones_like(xs)).ravel()
        Z = np.multiply.outer(np.multiply.outer(zs, np.ones_like(ys)), np.ones_like(xs)).ravel()
        return np.flatnonzero(predicate(X, Y, Z))

    def cell_centers(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened (x, y, z) cell-center coordinates in canonical cell order."""
        mids = [0.5 * (c[:-1] + c[1:]) for c in self.coordinates]
        ones = [np.ones_like(m) for m in mids]
        X = _outer3(mids[0], ones[1], ones[2])
        Y = _outer3(ones[0], mids[1], ones[2])
        Z = _outer3(ones[0], ones[1], mids[2])
        return X, Y, Z


@dataclass(frozen=True)
class IncidenceOperators:
    """Topological operators of the grid pair."""
    G: sp.csr_matrix        # 3n x n, discrete gradient
    S_dual: sp.csr_matrix   # n x 3n, discrete divergence, = -G^T
    P_Q: sp.csr_matrix      # n x 3n, shifted-cell to dual-cell incidence
    P: Tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]  # P_x, P_y, P_z
    phantom: np.ndarray     # 3n bool


def build_grid(node_counts: Sequence[int], spacings: Sequence[Sequence[float]]) -> StaggeredGrid:
    """
    Build the staggered grid pair.

    Args:
        node_counts: (nx, ny, nz), at least 2 nodes per axis
        spacings: per-axis cell widths in meters, length node_count - 1 each

    Raises:
        InvalidGeometry: bad counts or spacings
    """
    if len(node_counts) != 3 or len(spacings) != 3:
        raise InvalidGeometry("node_counts and spacings must both have three axes")

    counts = tuple(int(c) for c in node_counts)
    widths = []
    for axis, (count, h) in enumerate(zip(counts, spacings)):
        if count < 2:
            raise InvalidGeometry(f"axis {AXES[axis]} needs at least 2 nodes, got {count}")
        h = np.asarray(h, dtype=float).ravel()
        if h.size != count - 1:
            raise InvalidGeometry(
                f"axis {AXES[axis]}: expected {count - 1} spacings for {count} nodes, got {h.size}"
            )
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise InvalidGeometry(f"axis {AXES[axis]}: spacings must be positive and finite")
        widths.append(h)

    nx, ny, nz = counts
    n = nx * ny * nz

    coordinates = tuple(_readonly(np.concatenate(([0.0], np.cumsum(h)))) for h in widths)

    # Dual cell width per node: half of each adjacent primary cell
    dual = []
    for h in widths:
        w = np.zeros(h.size + 1)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        dual.append(w)
    # Edge length per node along the axis, zero where the edge leaves the grid
    length = [np.append(h, 0.0) for h in widths]
    ones = [np.ones(c) for c in counts]

    edge_lengths = np.concatenate([
        _outer3(length[0], ones[1], ones[2]),
        _outer3(ones[0], length[1], ones[2]),
        _outer3(ones[0], ones[1], length[2]),
    ])
    phantom = edge_lengths == 0.0
    dual_facet_areas = np.concatenate([
        _outer3(ones[0], dual[1], dual[2]),
        _outer3(dual[0], ones[1], dual[2]),
        _outer3(dual[0], dual[1], ones[2]),
    ])
    dual_facet_areas[phantom] = 0.0
    dual_volumes = _outer3(dual[0], dual[1], dual[2])
    shifted_volumes = dual_facet_areas * edge_lengths

    grid = StaggeredGrid(
        node_counts=counts,
        spacings=tuple(_readonly(h) for h in widths),
        n=n,
        coordinates=coordinates,
        edge_lengths=_readonly(edge_lengths),
        dual_facet_areas=_readonly(dual_facet_areas),
        dual_volumes=_readonly(dual_volumes),
        shifted_volumes=_readonly(shifted_volumes),
        phantom=_readonly(phantom),
    )
    logger.debug(f"Built grid {counts}: n={n}, real edges={int((~phantom).sum())}")
    return grid


def _difference_1d(count: int) -> sp.csr_matrix:
    """-1 on the diagonal, +1 on the super-diagonal, last row zero (phantom)."""
    main = -np.ones(count)
    main[-1] = 0.0
    return sp.diags([main, np.ones(count - 1)], [0, 1], shape=(count, count), format="csr")


def _kron3(a: sp.spmatrix, b: sp.spmatrix, c: sp.spmatrix) -> sp.csr_matrix:
    return sp.kron(a, sp.kron(b, c, format="csr"), format="csr")


def build_incidence(grid: StaggeredGrid) -> IncidenceOperators:
    """
    Build G = [P_x; P_y; P_z], S_dual = -G^T and P_Q = |G|^T.

    Edge direction equals the positive coordinate direction: each real row of
    G has -1 at its tail node and +1 at its head node.
    """
    nx, ny, nz = grid.node_counts
    Ix, Iy, Iz = (sp.identity(c, format="csr") for c in (nx, ny, nz))

    P_x = _kron3(Iz, Iy, _difference_1d(nx))
    P_y = _kron3(Iz, _difference_1d(ny), Ix)
    P_z = _kron3(_difference_1d(nz), Iy, Ix)
    for P in (P_x, P_y, P_z):
        P.eliminate_zeros()

    G = sp.vstack([P_x, P_y, P_z], format="csr")
    G.eliminate_zeros()
    S_dual = (-G.T).tocsr()
    P_Q = abs(G).T.tocsr()

    return IncidenceOperators(
        G=G,
        S_dual=S_dual,
        P_Q=P_Q,
        P=(P_x, P_y, P_z),
        phantom=grid.phantom,
    )
