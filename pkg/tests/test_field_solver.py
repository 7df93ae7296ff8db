"""
Unit tests for the FIT field solver: loss computation and projection,
DC and RC oracles, energy bookkeeping and Newton behavior.
"""

import os
import sys
import unittest

import numpy as np

_project_root = os.path.normpath(os.path.join(os.path.dirname(__file__), os.pardir))
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from fitspice.config import SolverSettings  # noqa: E402
from fitspice.errors import MissingGround, ShapeError  # noqa: E402
from fitspice.field_solver import (  # noqa: E402
    FieldSolver,
    assemble_system,
    compute_branch_losses,
    project_losses,
    thermal_energy,
)
from fitspice.grid import build_grid, build_incidence  # noqa: E402
from fitspice.harness import ElectrothermalModel, benchmark_lumped_rc, benchmark_scenario, series_rc_response  # noqa: E402
from fitspice.materials import Material, MaterialModel  # noqa: E402
from fitspice.models import BoundaryConditions, ExtraBranch  # noqa: E402
from fitspice.waveforms import Dc  # noqa: E402

COPPERISH = Material("bar", sigma=3.0, eps_r=1.0, lambda_th=400.0, rho_c=8000.0)


def _uniform(counts, h=1e-3):
    return build_grid(counts, [[h] * (c - 1) for c in counts])


def _face(grid, axis, index):
    return [m for m in range(grid.n) if grid.node_ijk(m)[axis] == index]


def _driven_bar(counts=(5, 2, 2), volts=1.0, material=COPPERISH):
    grid = _uniform(counts)
    materials = MaterialModel.uniform(grid.num_cells, material)
    bcs = BoundaryConditions()
    for node in _face(grid, 0, 0):
        bcs.electric_dirichlet[node] = Dc(volts)
    for node in _face(grid, 0, counts[0] - 1):
        bcs.electric_dirichlet[node] = Dc(0.0)
    return grid, materials, bcs


class TestBranchLosses(unittest.TestCase):
    """Test 1 -- per-edge Joule power and its projection onto dual cells."""

    def test_zero_field(self):
        np.testing.assert_array_equal(compute_branch_losses(np.zeros(6), np.zeros(6)), np.zeros(6))

    def test_single_branch(self):
        """1 V across 1 kOhm dissipates 1 mW."""
        u = np.array([1.0])
        self.assertAlmostEqual(compute_branch_losses(u, u / 1000.0)[0], 1e-3, places=15)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            compute_branch_losses(np.zeros(3), np.zeros(4))

    def test_projection_of_interior_node(self):
        """Six incident edges carrying 1 W put 3 W into an equidistant interior dual cell."""
        grid = _uniform((3, 3, 3))
        ops = build_incidence(grid)
        center = grid.node_index(1, 1, 1)
        Q_hat = np.zeros(3 * grid.n)
        for axis, stride in enumerate(grid.strides):
            Q_hat[grid.edge_index(center, axis)] = 1.0
            Q_hat[grid.edge_index(center - stride, axis)] = 1.0
        Q_el = project_losses(grid, ops.P_Q, Q_hat)
        self.assertAlmostEqual(Q_el[center], 3.0, places=12)

    def test_zero_projection(self):
        grid = _uniform((3, 2, 2))
        ops = build_incidence(grid)
        np.testing.assert_array_equal(project_losses(grid, ops.P_Q, np.zeros(3 * grid.n)), 0.0)
        with self.assertRaises(ShapeError):
            project_losses(grid, ops.P_Q, np.zeros(grid.n))

    def test_interior_power_conservation(self):
        """Edges between interior nodes hand their power to the two dual cells half each."""
        grid = _uniform((5, 5, 4))
        ops = build_incidence(grid)
        rng = np.random.default_rng(17)
        Q_hat = np.zeros(3 * grid.n)
        for edge in grid.real_edges:
            tail, head = grid.edge_nodes(edge)
            if grid.is_interior(tail) and grid.is_interior(head):
                Q_hat[edge] = rng.uniform(0.0, 2.0)
        self.assertGreater(np.count_nonzero(Q_hat), 0)
        Q_el = project_losses(grid, ops.P_Q, Q_hat)
        self.assertAlmostEqual(Q_el.sum() / Q_hat.sum(), 1.0, places=10)


class TestDirectCurrent(unittest.TestCase):
    """Test 2 -- homogeneous bar under a DC voltage."""

    def test_linear_ramp_and_total_power(self):
        grid, materials, bcs = _driven_bar()
        solver = FieldSolver(grid, materials, bcs, SolverSettings(tstop=1e-5, dt=1e-6))
        trace = solver.run()
        phi = trace.phi[-1]
        for node in range(grid.n):
            i = grid.node_ijk(node)[0]
            self.assertAlmostEqual(phi[node], 1.0 - i / 4.0, places=9)

        # R = 4 mm / (3 S/m * 1 mm^2)
        u = solver.system.ops.G @ phi
        g = solver.system.mats.M_sigma.diagonal()
        power = compute_branch_losses(u, g * u).sum()
        self.assertAlmostEqual(power / (1.0 / (4e-3 / 3e-6)), 1.0, places=9)
        self.assertTrue(np.all(trace.q_el[-1] >= 0.0))

    def test_missing_ground(self):
        grid, materials, _ = _driven_bar()
        with self.assertRaises(MissingGround):
            FieldSolver(grid, materials, BoundaryConditions(), SolverSettings(tstop=1e-5))


class TestThermalEnergy(unittest.TestCase):
    """Test 3 -- adiabatic heat bookkeeping."""

    def _solver(self, initial_T, losses_enabled):
        grid, materials, bcs = _driven_bar(counts=(4, 3, 3), volts=0.0)
        settings = SolverSettings(tstop=1e-3, dt=1e-4)
        return FieldSolver(grid, materials, bcs, settings, initial_T=initial_T, losses_enabled=losses_enabled)

    def test_uniform_temperature_is_stationary(self):
        solver = self._solver(np.full(36, 5.0), losses_enabled=False)
        trace = solver.run()
        np.testing.assert_allclose(trace.T, 5.0, rtol=1e-12)

    def test_energy_conserved_without_losses(self):
        rng = np.random.default_rng(23)
        solver = self._solver(rng.uniform(0.0, 10.0, 36), losses_enabled=False)
        trace = solver.run()
        energies = [thermal_energy(solver.system, T) for T in trace.T]
        for before, after in zip(energies, energies[1:]):
            self.assertAlmostEqual(after / before, 1.0, places=12)
        # diffusion flattens the profile
        self.assertLess(np.ptp(trace.T[-1]), np.ptp(trace.T[0]))

    def test_energy_non_decreasing_with_losses(self):
        model = ElectrothermalModel(benchmark_scenario(node_counts=(5, 2, 2)))
        solver = model.field_solver(model.settings(tstop=2e-5))
        trace = solver.run()
        energies = np.array([thermal_energy(solver.system, T) for T in trace.T])
        self.assertTrue(np.all(np.diff(energies) >= -1e-12 * energies.max()))
        self.assertGreater(energies[-1], 0.0)

    def test_initial_temperature_shape(self):
        with self.assertRaises(ShapeError):
            self._solver(np.zeros(5), losses_enabled=True)


class TestNewton(unittest.TestCase):
    """Test 4 -- monolithic Newton iteration."""

    def test_linear_electrical_block_converges_in_one_iteration(self):
        model = ElectrothermalModel(benchmark_scenario(alpha=0.0, node_counts=(5, 2, 2)))
        trace = model.field_solver(model.settings(mode="monolithic", tstop=2e-6)).run()
        self.assertEqual(trace.num_steps, 20)
        for info in trace.step_meta:
            self.assertEqual(info.electrical_iterations, 1)
            self.assertLess(info.residual, 1e-10)

    def test_nonlinear_steps_converge(self):
        model = ElectrothermalModel(benchmark_scenario(alpha=0.05, node_counts=(5, 2, 2)))
        solver = model.field_solver(model.settings(mode="monolithic", tstop=5e-6))
        trace = solver.run()
        self.assertTrue(all(info.residual < 1e-10 for info in trace.step_meta))
        self.assertEqual(solver.get_stats()["steps"], trace.num_steps)

    def test_lagged_matches_monolithic_when_linear(self):
        """Without a temperature coefficient the two coupling modes solve the same equations."""
        model = ElectrothermalModel(benchmark_scenario(alpha=0.0, node_counts=(5, 2, 2)))
        lagged = model.field_solver(model.settings(mode="lagged", tstop=5e-6)).run()
        mono = model.field_solver(model.settings(mode="monolithic", tstop=5e-6)).run()
        np.testing.assert_allclose(lagged.phi, mono.phi, rtol=1e-8, atol=1e-8 * np.abs(mono.phi).max())
        np.testing.assert_allclose(lagged.T, mono.T, rtol=1e-8, atol=1e-8 * np.abs(mono.T).max())

    def test_linear_lagged_run_factorizes_each_block_once(self):
        model = ElectrothermalModel(benchmark_scenario(alpha=0.0, node_counts=(5, 2, 2)))
        solver = model.field_solver(model.settings(mode="lagged", tstop=2e-5, dt=1e-7))
        solver.run()
        self.assertEqual(solver.get_stats()["cached_factorizations"], 2)

    def test_step_coupled_modes_agree_on_one_step(self):
        model = ElectrothermalModel(benchmark_scenario(alpha=0.0, node_counts=(5, 2, 2)))
        solver = model.field_solver(model.settings(tstop=1e-6, dt=1e-7))
        start = solver.initial_state()
        lagged = solver.step_coupled(start, 1e-7, 1e-7, "lagged")
        mono = solver.step_coupled(start, 1e-7, 1e-7, "monolithic")
        np.testing.assert_allclose(lagged.phi, mono.phi, rtol=1e-8, atol=1e-8 * np.abs(mono.phi).max())
        np.testing.assert_allclose(lagged.T, mono.T, rtol=1e-8, atol=1e-8 * np.abs(mono.T).max())

    def test_extra_branch_is_stamped(self):
        grid, materials, bcs = _driven_bar(counts=(3, 2, 2))
        plain = assemble_system(grid, materials)
        branch = ExtraBranch("wire", 0, grid.n - 1, g_el=2.0, g_th=5.0)
        wired = assemble_system(grid, materials, [branch])
        diff = (wired.K_sigma0 - plain.K_sigma0).toarray()
        self.assertAlmostEqual(diff[0, 0], 2.0)
        self.assertAlmostEqual(diff[0, grid.n - 1], -2.0)
        self.assertAlmostEqual((wired.K_lambda - plain.K_lambda)[grid.n - 1, grid.n - 1], 5.0)


class TestSeriesRC(unittest.TestCase):
    """Test 5 -- benchmark bar against the analytic series-RC response."""

    def test_interface_potential_follows_rc_divider(self):
        R, C = benchmark_lumped_rc()
        self.assertAlmostEqual(R, 1000.0, places=9)
        self.assertAlmostEqual(C / 1.0005e-9, 1.0, places=3)

        scenario = benchmark_scenario(node_counts=(5, 3, 3))
        model = ElectrothermalModel(scenario)
        settings = model.settings(dt=5e-9, tstop=3.0 / 76.9e3)
        trace = model.field_solver(settings).run()

        node = model.probes["mid"]
        expected = series_rc_response(trace.times, 1000.0, 76.9e3, R, C)
        error = np.max(np.abs(trace.phi[:, node] - expected)) / np.max(np.abs(expected))
        self.assertLess(error, 5e-3)


if __name__ == "__main__":
    unittest.main()
