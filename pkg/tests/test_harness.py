"""
Unit tests for scenarios, the comparison harness and the command line.

The chip-package comparison integrates 400 steps through both pipelines
and takes a while.
"""

import io
import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest import mock

import numpy as np

_project_root = os.path.normpath(os.path.join(os.path.dirname(__file__), os.pardir))
if _project_root not in sys.path:
    sys.path.insert(0, _project_root)

from fitspice.cli import EXIT_ERROR, EXIT_OK, main  # noqa: E402
from fitspice.config import CompareConfig  # noqa: E402
from fitspice.errors import ScenarioError, ShapeError  # noqa: E402
from fitspice.harness import (  # noqa: E402
    BUILTIN_SCENARIOS,
    ElectrothermalModel,
    NodeSelection,
    Scenario,
    benchmark_scenario,
    builtin_scenarios,
    chip_surrogate_scenario,
    convergence_study,
    hottest_node_linearity,
    load_scenario,
    max_relative_difference,
    relative_error_norm,
    run_compare,
    temperature_error,
)
from fitspice.models import TransientTrace  # noqa: E402
from fitspice.waveforms import Sine  # noqa: E402


def _trace(T, phi=None):
    T = np.asarray(T, dtype=float)
    return TransientTrace(
        times=np.arange(T.shape[0], dtype=float),
        phi=np.zeros_like(T) if phi is None else np.asarray(phi, dtype=float),
        T=T,
        q_el=np.zeros_like(T),
        step_meta=[],
    )


class TestErrorNorms(unittest.TestCase):
    """Test 1 -- trace comparison metrics."""

    def test_self_comparison_is_zero(self):
        rng = np.random.default_rng(19)
        trace = _trace(rng.uniform(0.0, 5.0, (6, 4)))
        self.assertEqual(temperature_error(trace, trace), 0.0)

    def test_max_over_time_ratio(self):
        reference = _trace([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])
        candidate = _trace([[0.0, 0.0], [3.0, 4.5], [6.0, 8.0]])
        # ||diff|| peaks at 0.5, ||reference|| peaks at 10
        self.assertAlmostEqual(temperature_error(candidate, reference), 0.05, places=14)

    def test_zero_reference(self):
        zeros = np.zeros((3, 2))
        self.assertEqual(relative_error_norm(zeros, zeros), 0.0)
        self.assertEqual(max_relative_difference(zeros, zeros), 0.0)

    def test_mismatched_traces(self):
        with self.assertRaises(ShapeError):
            temperature_error(_trace(np.zeros((3, 2))), _trace(np.zeros((4, 2))))
        with self.assertRaises(ShapeError):
            temperature_error(_trace(np.zeros((3, 2))), _trace(np.zeros((3, 5))))

    def test_linearity_of_ramp(self):
        t = np.linspace(0.0, 10.0, 41)
        T = np.column_stack([0.1 * t, 2.0 * t + 1.0])
        node, r_squared, slope = hottest_node_linearity(_trace(T))
        self.assertEqual(node, 1)
        self.assertAlmostEqual(r_squared, 1.0, places=12)
        self.assertAlmostEqual(slope, 2.0 * 0.25, places=9)


class TestScenario(unittest.TestCase):
    """Test 2 -- scenario construction and serialization."""

    def test_builtin_names(self):
        self.assertEqual(set(builtin_scenarios()), set(BUILTIN_SCENARIOS))
        self.assertEqual(load_scenario("benchmark").name, "benchmark")

    def test_benchmark_layout(self):
        model = ElectrothermalModel(benchmark_scenario(node_counts=(9, 3, 3)))
        self.assertEqual(model.grid.n, 81)
        left = [m for m in range(model.grid.n) if model.grid.node_ijk(m)[0] == 0]
        waveforms = {id(model.bcs.electric_dirichlet[m]) for m in left}
        self.assertEqual(len(waveforms), 1)
        self.assertIsInstance(model.bcs.electric_dirichlet[left[0]], Sine)
        # the last x-layer of cells is the dielectric
        sigma = model.materials.sigma_ref.reshape(model.grid.cell_counts[::-1])
        np.testing.assert_array_equal(sigma[:, :, :6], 3.0)
        np.testing.assert_array_equal(sigma[:, :, 6:], 0.0)
        self.assertEqual(model.probes["mid"], model.grid.node_index(6, 1, 1))

    def test_json_round_trip(self):
        scenario = chip_surrogate_scenario()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "chip.json")
            scenario.save(path)
            with open(path) as f:
                self.assertEqual(json.load(f)["grid"]["node_counts"], [9, 5, 4])
            loaded = Scenario.load(path)
            self.assertEqual(loaded.to_dict(), scenario.to_dict())
            self.assertEqual(load_scenario(path).name, "chip_surrogate")

        a = ElectrothermalModel(scenario)
        b = ElectrothermalModel(Scenario.from_dict(scenario.to_dict()))
        np.testing.assert_array_equal(a.materials.sigma_ref, b.materials.sigma_ref)
        self.assertEqual(sorted(a.bcs.electric_dirichlet), sorted(b.bcs.electric_dirichlet))

    def test_invalid_scenarios(self):
        with self.assertRaises(ScenarioError):
            benchmark_scenario(node_counts=(6, 2, 2))

        scenario = benchmark_scenario()
        scenario.regions = scenario.regions[:1]
        with self.assertRaises(ScenarioError):
            ElectrothermalModel(scenario)

        scenario = benchmark_scenario()
        scenario.regions[0].material = "unobtainium"
        with self.assertRaises(ScenarioError):
            ElectrothermalModel(scenario)

        grid = benchmark_scenario().build_grid()
        with self.assertRaises(ScenarioError):
            NodeSelection(face="w+").resolve(grid)
        with self.assertRaises(ScenarioError):
            NodeSelection(box=((1.0, 1.0, 1.0), (2.0, 2.0, 2.0))).resolve(grid)
        with self.assertRaises(ScenarioError):
            Scenario.from_dict({"name": "broken"})
        with self.assertRaises(ScenarioError):
            load_scenario("no-such-scenario")

    def test_settings_precedence(self):
        scenario = benchmark_scenario()
        del scenario.solver["mode"]
        with mock.patch.dict(os.environ, {"FITSPICE_MODE": "monolithic", "FITSPICE_MAX_ITER": "7"}):
            settings = scenario.settings()
            self.assertEqual(settings.mode, "monolithic")
            self.assertEqual(settings.max_iter, 7)
            self.assertEqual(scenario.settings(mode="lagged", max_iter=None).mode, "lagged")
            self.assertEqual(scenario.settings(max_iter=None).max_iter, 7)
        with self.assertRaises(ScenarioError):
            scenario.settings(integrator="rk4")


class TestComparison(unittest.TestCase):
    """Test 3 -- field versus circuit runs."""

    def test_run_compare_writes_outputs(self):
        scenario = benchmark_scenario(node_counts=(5, 2, 2), tstop=2e-6)
        with tempfile.TemporaryDirectory() as tmp:
            result = run_compare(scenario, output_dir=tmp)
            for name in (
                CompareConfig.FIT_TRACE,
                CompareConfig.MNA_TRACE,
                CompareConfig.FIT_PROBES,
                CompareConfig.MNA_PROBES,
                CompareConfig.NETLIST,
                CompareConfig.REPORT_TEXT,
                CompareConfig.REPORT_JSON,
            ):
                self.assertTrue(os.path.exists(os.path.join(tmp, name)), name)
            reread = TransientTrace.read_csv(os.path.join(tmp, CompareConfig.FIT_TRACE))
            np.testing.assert_allclose(reread.T, result.fit.T, rtol=1e-11, atol=1e-300)
            np.testing.assert_allclose(reread.times, result.fit.times, rtol=1e-11)
            with open(os.path.join(tmp, CompareConfig.REPORT_JSON)) as f:
                report = json.load(f)

        self.assertEqual(report["card_count"], result.report.card_count)
        self.assertEqual(result.report.num_steps, 20)
        for stage in ("assemble", "generate", "emit", "fit_solve", "parse", "mna_assemble", "mna_solve", "compare"):
            self.assertIn(stage, result.report.stage_seconds)
        # linear benchmark: lagged FIT and the circuit solve the same equations
        self.assertLess(result.report.temperature_error, 1e-6)
        self.assertLess(result.report.potential_error, 1e-6)

    def test_report_hash_ignores_wall_times(self):
        scenario = benchmark_scenario(node_counts=(5, 2, 2), tstop=1e-6)
        first = run_compare(scenario, via_text=False).report
        second = run_compare(scenario, via_text=False).report
        self.assertEqual(first.hash, second.hash)

    def test_lagged_coupling_converges_first_order(self):
        scenario = benchmark_scenario(alpha=4e-3, node_counts=(5, 2, 2))
        rows = convergence_study(scenario, [2e-7, 1e-7], reference="mna", tstop=2e-5)
        self.assertEqual(len(rows), 2)
        for row in rows:
            self.assertLess(row["temperature_error"], 1e-2)
            self.assertGreater(row["temperature_error"], 0.0)
        self.assertGreater(rows[1]["ratio"], 1.6)
        self.assertLess(rows[1]["ratio"], 2.4)

    def test_chip_surrogate_agreement_and_linear_heating(self):
        result = run_compare(chip_surrogate_scenario(), via_text=False)
        self.assertLess(result.report.temperature_error, 2e-3)

        hottest = result.fit.T[:, int(np.argmax(result.fit.T[-1]))]
        self.assertTrue(np.all(np.diff(hottest) >= 0.0))
        _, r_squared, slope = hottest_node_linearity(result.fit)
        self.assertGreater(r_squared, 0.999)
        self.assertGreater(slope, 0.0)


class TestCommandLine(unittest.TestCase):
    """Test 4 -- fitspice command line."""

    def _run(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, out.getvalue(), err.getvalue()

    def test_scenario_list(self):
        code, out, _ = self._run("scenario", "list")
        self.assertEqual(code, EXIT_OK)
        for name in BUILTIN_SCENARIOS:
            self.assertIn(name, out)

    def test_extract_to_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "bench.cir")
            code, out, _ = self._run("extract", "benchmark", "-o", path, "--tstop", "1e-6")
            self.assertEqual(code, EXIT_OK)
            with open(path) as f:
                text = f.read()
        self.assertTrue(text.startswith("fitspice benchmark\n"))
        self.assertTrue(text.rstrip().endswith(".END"))
        self.assertIn("Wrote", out)

    def test_simulate_writes_probe_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "probes.csv")
            code, out, _ = self._run(
                "simulate", "fit", "benchmark", "--dt", "1e-7", "--tstop", "1e-6", "--probes", path
            )
            self.assertEqual(code, EXIT_OK)
            self.assertTrue(os.path.exists(path))
        self.assertIn("FIT: 10 steps", out)

    def test_bad_arguments_are_input_errors(self):
        for argv in (
            ("simulate", "fit", "benchmark", "--mode", "bogus"),
            ("simulate", "fit", "benchmark", "--dt", "abc"),
            ("frobnicate",),
        ):
            with self.subTest(argv=argv):
                code, _, err = self._run(*argv)
                self.assertEqual(code, EXIT_ERROR)
                self.assertIn("usage", err)

    def test_help_exits_ok(self):
        code, out, _ = self._run("scenario", "--help")
        self.assertEqual(code, EXIT_OK)
        self.assertIn("list", out)

    def test_unknown_scenario(self):
        code, _, err = self._run("extract", "no-such-scenario")
        self.assertEqual(code, EXIT_ERROR)
        self.assertIn("Error", err)


if __name__ == "__main__":
    unittest.main()
