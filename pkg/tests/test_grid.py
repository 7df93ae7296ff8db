"""
Unit tests for the staggered grid and its incidence operators.

Covers canonical indexing, boundary-clipped dual measures, phantom edges
and the G / S_dual / P_Q identities on hand-checked and random grids.
"""

import os
import sys
import unittest

import numpy as np

_project_root = os.path.normpath(os.path.join(os.path.dirname(__file__), os.pardir))
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from fitspice.errors import InvalidGeometry  # noqa: E402
from fitspice.grid import build_grid, build_incidence  # noqa: E402


def _uniform(counts, h=1e-3):
    return build_grid(counts, [[h] * (c - 1) for c in counts])


def _random_grid(rng):
    counts = tuple(int(c) for c in rng.integers(2, 6, size=3))
    spacings = [rng.uniform(0.2e-3, 2e-3, size=c - 1) for c in counts]
    return build_grid(counts, spacings)


class TestBuildGrid(unittest.TestCase):
    """Test 1 -- measures of small hand-checked grids."""

    def test_single_cell_dual_volumes(self):
        """(2,2,2): every corner node owns one octant of the cell."""
        grid = _uniform((2, 2, 2))
        self.assertEqual(grid.n, 8)
        np.testing.assert_allclose(grid.dual_volumes, np.full(8, 1.25e-10), rtol=1e-12)

    def test_corner_dual_facet_area(self):
        """(3,2,2): an x-edge on the domain corner line has a quarter facet."""
        grid = _uniform((3, 2, 2))
        edge = grid.edge_index(grid.node_index(1, 0, 0), 0)
        self.assertAlmostEqual(grid.dual_facet_areas[edge], 2.5e-7, delta=1e-19)
        self.assertAlmostEqual(grid.edge_lengths[edge], 1e-3, delta=1e-15)

    def test_benchmark_coarse_mesh(self):
        """(5,2,2): 20 nodes, 4 x-cells of the 4 mm bar."""
        grid = _uniform((5, 2, 2))
        self.assertEqual(grid.n, 20)
        self.assertEqual(grid.cell_counts, (4, 1, 1))
        self.assertAlmostEqual(grid.extent[0], 4e-3, delta=1e-15)

    def test_phantom_edges(self):
        grid = _uniform((3, 2, 2))
        last = grid.node_index(2, 0, 0)
        self.assertTrue(grid.phantom[grid.edge_index(last, 0)])
        self.assertFalse(grid.phantom[grid.edge_index(last, 1)])
        self.assertEqual(grid.edge_lengths[grid.edge_index(last, 0)], 0.0)
        self.assertEqual(grid.dual_facet_areas[grid.edge_index(last, 0)], 0.0)
        # real edges: 2*2*2 along x, 3*1*2 along y, 3*2*1 along z
        self.assertEqual(grid.real_edges.size, 8 + 6 + 6)

    def test_indexing_round_trip(self):
        grid = _uniform((4, 3, 2))
        for node in range(grid.n):
            self.assertEqual(grid.node_index(*grid.node_ijk(node)), node)
        self.assertEqual(grid.node_index(1, 2, 1), 1 + 4 * 2 + 12 * 1)
        with self.assertRaises(IndexError):
            grid.node_index(4, 0, 0)

    def test_edge_nodes(self):
        grid = _uniform((4, 3, 2))
        node = grid.node_index(1, 1, 0)
        self.assertEqual(grid.edge_nodes(grid.edge_index(node, 0)), (node, node + 1))
        self.assertEqual(grid.edge_nodes(grid.edge_index(node, 1)), (node, node + 4))
        self.assertEqual(grid.edge_nodes(grid.edge_index(node, 2)), (node, node + 12))

    def test_arrays_are_read_only(self):
        grid = _uniform((2, 2, 2))
        with self.assertRaises(ValueError):
            grid.dual_volumes[0] = 1.0


class TestInvalidGeometry(unittest.TestCase):
    """Test 2 -- geometry validation."""

    def test_too_few_nodes(self):
        with self.assertRaises(InvalidGeometry):
            build_grid((1, 2, 2), [[], [1e-3], [1e-3]])

    def test_non_positive_spacing(self):
        with self.assertRaises(InvalidGeometry):
            build_grid((3, 2, 2), [[1e-3, 0.0], [1e-3], [1e-3]])
        with self.assertRaises(InvalidGeometry):
            build_grid((3, 2, 2), [[1e-3, -1e-3], [1e-3], [1e-3]])

    def test_spacing_count_mismatch(self):
        with self.assertRaises(InvalidGeometry):
            build_grid((3, 2, 2), [[1e-3], [1e-3], [1e-3]])


class TestIncidence(unittest.TestCase):
    """Test 3 -- discrete gradient, divergence and loss incidence."""

    def test_chain_along_x(self):
        """3 nodes along x: P_x = [-1 1 0; 0 -1 1; 0 0 0], third row phantom."""
        grid = build_grid((3, 2, 2), [[1e-3, 1e-3], [1e-3], [1e-3]])
        ops = build_incidence(grid)
        block = ops.P[0].toarray()[:3, :3]
        expected = np.array([[-1, 1, 0], [0, -1, 1], [0, 0, 0]], dtype=float)
        np.testing.assert_array_equal(block, expected)
        self.assertTrue(ops.phantom[2])
        self.assertEqual(ops.G.getrow(2).nnz, 0)

    def test_unit_cube_loss_incidence(self):
        """(2,2,2): each node touches exactly 3 real edges."""
        ops = build_incidence(_uniform((2, 2, 2)))
        np.testing.assert_array_equal(np.asarray(ops.P_Q.sum(axis=1)).ravel(), np.full(8, 3.0))

    def test_identities_on_random_grids(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            grid = _random_grid(rng)
            ops = build_incidence(grid)

            # G = -S_dual^T, structure and values
            diff = ops.G + ops.S_dual.T
            diff.eliminate_zeros()
            self.assertEqual(diff.nnz, 0)

            # (G phi)_j = phi_head - phi_tail on real edges, 0 on phantom edges
            phi = rng.normal(size=grid.n)
            u = ops.G @ phi
            for edge in grid.real_edges:
                tail, head = grid.edge_nodes(edge)
                self.assertAlmostEqual(u[edge], phi[head] - phi[tail], places=12)
            np.testing.assert_array_equal(u[grid.phantom], 0.0)

            # dual volumes tile the domain
            self.assertAlmostEqual(grid.dual_volumes.sum() / grid.total_volume, 1.0, places=12)

            # P_Q: row sums 3..6, real columns exactly two ones, phantom columns empty
            row_sums = np.asarray(ops.P_Q.sum(axis=1)).ravel()
            self.assertTrue(np.all((row_sums >= 3) & (row_sums <= 6)))
            col_sums = np.asarray(ops.P_Q.sum(axis=0)).ravel()
            np.testing.assert_array_equal(col_sums[~grid.phantom], 2.0)
            np.testing.assert_array_equal(col_sums[grid.phantom], 0.0)

            # shifted volume of each real edge is facet times length
            np.testing.assert_allclose(
                grid.shifted_volumes, grid.dual_facet_areas * grid.edge_lengths, rtol=1e-15
            )


if __name__ == "__main__":
    unittest.main()
