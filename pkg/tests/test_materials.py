"""
Unit tests for material averaging, FIT material matrices and the
temperature-dependent conductivity law.
"""

import os
import sys
import unittest

import numpy as np

_project_root = os.path.normpath(os.path.join(os.path.dirname(__file__), os.pardir))
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from fitspice.config import EPS0  # noqa: E402
from fitspice.errors import InvalidMaterial, NonphysicalResistivity, OpenBranch, PhantomEdge  # noqa: E402
from fitspice.grid import build_grid  # noqa: E402
from fitspice.materials import (  # noqa: E402
    Material,
    MaterialModel,
    assemble_material_matrices,
    average_edge_property,
    edge_average_weights,
    edge_resistance_of_T,
    evaluate_sigma_of_T,
    node_average_weights,
)


def _uniform(counts, h=1e-3):
    return build_grid(counts, [[h] * (c - 1) for c in counts])


def _model(grid, sigma, eps_r=1.0, lambda_th=0.0, rho_c=0.0, alpha=0.0, T0=300.0):
    cells = grid.num_cells
    return MaterialModel(
        sigma_ref=np.broadcast_to(np.asarray(sigma, dtype=float), (cells,)).copy(),
        eps=EPS0 * np.broadcast_to(np.asarray(eps_r, dtype=float), (cells,)).copy(),
        lambda_th=np.full(cells, lambda_th),
        rho_c=np.full(cells, rho_c),
        alpha=np.broadcast_to(np.asarray(alpha, dtype=float), (cells,)).copy(),
        T0=T0,
    )


class TestEdgeAveraging(unittest.TestCase):
    """Test 1 -- area-weighted edge averages."""

    def test_half_conducting_interior_edge(self):
        """Interior x-edge touching sigma = {3, 3, 0, 0} averages to 1.5."""
        grid = _uniform((2, 3, 3))
        # cells (0, j, k) -> j + 2k; k = 0 conducting
        sigma = np.array([3.0, 3.0, 0.0, 0.0])
        edge = grid.edge_index(grid.node_index(0, 1, 1), 0)
        value, weights = average_edge_property(grid, sigma, edge)
        self.assertAlmostEqual(value, 1.5, places=14)
        self.assertEqual(len(weights), 4)
        for _, w in weights:
            self.assertAlmostEqual(w, 0.25, places=14)

    def test_homogeneous_edge(self):
        grid = _uniform((3, 3, 3))
        edge = grid.edge_index(grid.node_index(0, 1, 1), 0)
        value, _ = average_edge_property(grid, np.full(grid.num_cells, 3.0), edge)
        self.assertAlmostEqual(value, 3.0, places=14)

    def test_boundary_edge_single_cell(self):
        """(5,2,2) bar: a corner-line x-edge touches one cell with weight 1."""
        grid = _uniform((5, 2, 2))
        sigma = np.array([3.0, 3.0, 3.0, 0.0])
        edge = grid.edge_index(grid.node_index(1, 0, 0), 0)
        value, weights = average_edge_property(grid, sigma, edge)
        self.assertAlmostEqual(value, 3.0, places=14)
        self.assertEqual(weights, [(1, 1.0)])

    def test_phantom_edge_rejected(self):
        grid = _uniform((3, 2, 2))
        with self.assertRaises(PhantomEdge):
            average_edge_property(grid, np.ones(grid.num_cells), grid.edge_index(2, 0))

    def test_weight_rows_sum_to_one(self):
        rng = np.random.default_rng(11)
        grid = build_grid((4, 3, 5), [rng.uniform(0.5e-3, 2e-3, c - 1) for c in (4, 3, 5)])
        edge_rows = np.asarray(edge_average_weights(grid).sum(axis=1)).ravel()
        np.testing.assert_allclose(edge_rows[~grid.phantom], 1.0, rtol=1e-12)
        np.testing.assert_array_equal(edge_rows[grid.phantom], 0.0)
        node_rows = np.asarray(node_average_weights(grid).sum(axis=1)).ravel()
        np.testing.assert_allclose(node_rows, 1.0, rtol=1e-12)


class TestMaterialMatrices(unittest.TestCase):
    """Test 2 -- diagonal FIT material matrices."""

    def test_interior_conductance(self):
        grid = _uniform((3, 3, 3))
        mats = assemble_material_matrices(grid, _model(grid, 3.0))
        edge = grid.edge_index(grid.node_index(0, 1, 1), 0)
        self.assertAlmostEqual(mats.M_sigma[edge, edge], 3e-3, delta=1e-15)

    def test_lumped_capacitance(self):
        """1 mm cube of eps_r = 1.13e5: x-edge capacitances add up to eps A / d."""
        grid = _uniform((2, 2, 2))
        mats = assemble_material_matrices(grid, _model(grid, 0.0, eps_r=1.13e5))
        x_edges = np.arange(grid.n)[~grid.phantom[: grid.n]]
        total = mats.M_eps.diagonal()[x_edges].sum()
        self.assertAlmostEqual(total / (EPS0 * 1.13e5 * 1e-3), 1.0, places=12)
        self.assertAlmostEqual(total, 1.0005e-9, delta=1e-12)

    def test_heat_capacity_of_interior_node(self):
        grid = _uniform((3, 3, 3))
        mats = assemble_material_matrices(grid, _model(grid, 0.0, rho_c=8000.0))
        node = grid.node_index(1, 1, 1)
        self.assertAlmostEqual(mats.M_rhoc[node, node], 8e-6, delta=1e-18)

    def test_phantom_entries_are_zero(self):
        grid = _uniform((3, 2, 2))
        mats = assemble_material_matrices(grid, _model(grid, 3.0, lambda_th=400.0))
        for M in (mats.M_sigma, mats.M_eps, mats.M_lambda):
            np.testing.assert_array_equal(M.diagonal()[grid.phantom], 0.0)

    def test_negative_property_rejected(self):
        grid = _uniform((2, 2, 2))
        with self.assertRaises(InvalidMaterial):
            assemble_material_matrices(grid, _model(grid, -1.0))
        with self.assertRaises(InvalidMaterial):
            assemble_material_matrices(grid, _model(grid, 1.0, eps_r=0.0))

    def test_wrong_cell_count_rejected(self):
        grid = _uniform((3, 2, 2))
        model = MaterialModel.uniform(1, Material("bad", sigma=1.0))
        with self.assertRaises(InvalidMaterial):
            assemble_material_matrices(grid, model)


class TestConductivityLaw(unittest.TestCase):
    """Test 3 -- sigma(T) = sigma_ref / (1 + alpha (T - T0))."""

    def test_temperature_independent(self):
        model = _model(_uniform((2, 2, 2)), 3.0)
        for T in (200.0, 300.0, 1000.0):
            self.assertEqual(evaluate_sigma_of_T(model, 0, T), 3.0)

    def test_linear_resistivity(self):
        model = _model(_uniform((2, 2, 2)), 1.0, alpha=4e-3)
        self.assertAlmostEqual(evaluate_sigma_of_T(model, 0, 400.0), 1.0 / 1.4, places=12)

    def test_insulator(self):
        model = _model(_uniform((2, 2, 2)), 0.0, alpha=4e-3)
        self.assertEqual(evaluate_sigma_of_T(model, 0, 900.0), 0.0)

    def test_nonphysical_resistivity(self):
        model = _model(_uniform((2, 2, 2)), 1.0, alpha=-0.01)
        with self.assertRaises(NonphysicalResistivity):
            evaluate_sigma_of_T(model, 0, 400.0)

    def test_edge_resistance(self):
        grid = _uniform((3, 3, 3))
        edge = grid.edge_index(grid.node_index(0, 1, 1), 0)
        self.assertAlmostEqual(edge_resistance_of_T(grid, _model(grid, 3.0), edge, 300.0), 1000.0 / 3.0, places=9)

        heated = _model(grid, 1.0, alpha=4e-3)
        self.assertAlmostEqual(edge_resistance_of_T(grid, heated, edge, 300.0), 1000.0, places=9)
        self.assertAlmostEqual(edge_resistance_of_T(grid, heated, edge, 550.0), 2000.0, places=9)

    def test_open_branch(self):
        grid = _uniform((2, 2, 2))
        with self.assertRaises(OpenBranch):
            edge_resistance_of_T(grid, _model(grid, 0.0), 0, 300.0)


class TestConductances(unittest.TestCase):
    """Test 4 -- vectorized conductances and their derivative."""

    def setUp(self):
        rng = np.random.default_rng(3)
        self.grid = build_grid((4, 3, 3), [rng.uniform(0.5e-3, 1.5e-3, c - 1) for c in (4, 3, 3)])
        cells = self.grid.num_cells
        sigma = rng.uniform(0.5, 5.0, cells)
        sigma[rng.random(cells) < 0.3] = 0.0
        self.model = _model(self.grid, sigma, alpha=rng.uniform(0.0, 5e-3, cells))
        self.mats = assemble_material_matrices(self.grid, self.model)

    def test_reference_temperature_matches_matrix(self):
        g, _ = self.mats.conductances(np.zeros(3 * self.grid.n))
        np.testing.assert_allclose(g, self.mats.M_sigma.diagonal(), rtol=1e-12, atol=1e-18)
        sigma_bar = self.mats.sigma_bar_weights @ self.model.sigma_ref
        np.testing.assert_allclose(g, self.mats.edge_factor * sigma_bar, rtol=1e-12, atol=1e-18)

    def test_matches_scalar_law(self):
        tau = np.full(3 * self.grid.n, 80.0)
        g, _ = self.mats.conductances(tau)
        for edge in self.grid.real_edges[::5]:
            if g[edge] == 0.0:
                continue
            R = edge_resistance_of_T(self.grid, self.model, edge, self.model.T0 + 80.0)
            self.assertAlmostEqual(g[edge] * R, 1.0, places=10)

    def test_derivative(self):
        rng = np.random.default_rng(5)
        tau = rng.uniform(0.0, 100.0, 3 * self.grid.n)
        h = 1e-3
        g, dg = self.mats.conductances(tau)
        g_plus, _ = self.mats.conductances(tau + h)
        g_minus, _ = self.mats.conductances(tau - h)
        np.testing.assert_allclose(dg, (g_plus - g_minus) / (2 * h), rtol=1e-6, atol=1e-15)
        # positive alpha: conductance falls with temperature
        self.assertTrue(np.all(dg <= 0.0))
        self.assertTrue(np.all(g <= self.mats.M_sigma.diagonal() + 1e-18))

    def test_coefficient_groups_sum_to_conductance(self):
        diagonal = self.mats.M_sigma.diagonal()
        for edge in self.grid.real_edges:
            groups = self.mats.coefficient_groups(edge)
            self.assertAlmostEqual(sum(groups.values()), diagonal[edge], delta=1e-12 * max(diagonal[edge], 1e-30))

    def test_nonphysical_factor_detected(self):
        model = _model(self.grid, 1.0, alpha=-0.01)
        mats = assemble_material_matrices(self.grid, model)
        with self.assertRaises(NonphysicalResistivity):
            mats.conductances(np.full(3 * self.grid.n, 150.0))


if __name__ == "__main__":
    unittest.main()
