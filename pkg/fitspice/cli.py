#!/usr/bin/env python3
"""
fitspice command line

Usage:
    fitspice extract benchmark -o bench.cir          # FIT model -> netlist
    fitspice simulate fit benchmark -o fit.csv       # field solver trace
    fitspice simulate mna chip_surrogate             # circuit solver on the generated netlist
    fitspice compare benchmark -o out/               # both pipelines + report
    fitspice convergence benchmark --dts 1e-7 5e-8   # lagged vs monolithic error per dt
    fitspice scenario list
    fitspice scenario show chip_surrogate -o chip.json

<scenario> is a built-in name or the path of a JSON scenario file.
Solver flags override the scenario file, which overrides FITSPICE_* environment variables.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from .errors import FitSpiceError, NoConvergence
from .harness import (
    BUILTIN_SCENARIOS,
    SOLVERS,
    ElectrothermalModel,
    convergence_study,
    load_scenario,
    run_compare,
)
from .netlist import emit, write_netlist

logger = logging.getLogger("fitspice")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_CONVERGENCE = 2


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with EXIT_ERROR; argparse's own code 2 is EXIT_NO_CONVERGENCE here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_solver_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--dt", type=float, default=None, help="Time step in seconds")
    parser.add_argument("--tstop", type=float, default=None, help="Stop time in seconds")
    parser.add_argument("--mode", choices=["lagged", "monolithic"], default=None,
                        help="Field coupling mode (default: scenario / FITSPICE_MODE / lagged)")
    parser.add_argument("--integrator", choices=["be", "trap"], default=None,
                        help="Circuit integrator (the field solver is always backward Euler)")
    parser.add_argument("--newton-tol", type=float, default=None, help="Scaled residual tolerance")
    parser.add_argument("--max-iter", type=int, default=None, help="Newton iteration limit")


def _overrides(args) -> dict:
    return {
        "dt": args.dt,
        "tstop": args.tstop,
        "mode": args.mode,
        "integrator": args.integrator,
        "newton_tol": args.newton_tol,
        "max_iter": args.max_iter,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="fitspice", description="FIT electrothermal model to netlist extraction")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    extract = sub.add_parser("extract", help="Write the netlist of a scenario")
    extract.add_argument("scenario")
    extract.add_argument("-o", "--output", default=None, help="Netlist path (default: stdout)")
    _add_solver_flags(extract)

    simulate = sub.add_parser("simulate", help="Run one solver and write its trace")
    simulate.add_argument("solver", choices=sorted(SOLVERS))
    simulate.add_argument("scenario")
    simulate.add_argument("-o", "--output", default=None, help="Trace CSV path")
    simulate.add_argument("--probes", default=None, help="Probe CSV path")
    _add_solver_flags(simulate)

    compare = sub.add_parser("compare", help="Run both solvers and compare them")
    compare.add_argument("scenario")
    compare.add_argument("-o", "--output-dir", default=None, help="Directory for traces, netlist and report")
    compare.add_argument("--in-memory", action="store_true",
                         help="Feed the generated netlist to the circuit solver without the text round trip")
    _add_solver_flags(compare)

    convergence = sub.add_parser("convergence", help="Lagged-coupling error against a monolithic reference")
    convergence.add_argument("scenario")
    convergence.add_argument("--dts", type=float, nargs="+", required=True, help="Time steps to study")
    convergence.add_argument("--reference", choices=["mna", "fit"], default="mna")
    convergence.add_argument("--tstop", type=float, default=None, help="Stop time in seconds")

    scenario = sub.add_parser("scenario", help="List or show scenarios")
    scenario_sub = scenario.add_subparsers(dest="action", required=True)
    scenario_sub.add_parser("list", help="List built-in scenarios")
    show = scenario_sub.add_parser("show", help="Print a scenario as JSON")
    show.add_argument("scenario")
    show.add_argument("-o", "--output", default=None, help="JSON path (default: stdout)")

    return parser


def cmd_extract(args) -> int:
    model = ElectrothermalModel(load_scenario(args.scenario))
    netlist = model.netlist(model.settings(**_overrides(args)))
    if args.output:
        write_netlist(netlist, args.output)
        print(f"Wrote {netlist.card_count} cards to {args.output}")
    else:
        sys.stdout.write(emit(netlist))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = ElectrothermalModel(load_scenario(args.scenario))
    settings = model.settings(**_overrides(args))
    trace = model.simulate(args.solver, settings)

    print(f"{args.solver.upper()}: {trace.num_steps} steps, {trace.total_iterations()} Newton iterations")
    peak = trace.T[-1].max()
    print(f"  final peak temperature rise: {peak:.6e} K at node {int(trace.T[-1].argmax())}")
    if args.output:
        trace.to_csv(args.output)
        print(f"  trace: {args.output}")
    if args.probes:
        trace.to_probe_csv(args.probes, model.probes)
        print(f"  probes: {args.probes}")
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    settings = scenario.settings(**_overrides(args))
    result = run_compare(scenario, output_dir=args.output_dir, settings=settings, via_text=not args.in_memory)
    sys.stdout.write(result.report.to_text())
    if args.output_dir:
        print(f"Outputs written to {args.output_dir}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    rows = convergence_study(load_scenario(args.scenario), args.dts, reference=args.reference, tstop=args.tstop)
    print(f"{'dt':>12}  {'T error':>12}  {'phi error':>12}  {'ratio':>8}")
    for row in rows:
        ratio = f"{row['ratio']:.3f}" if "ratio" in row else "-"
        print(f"{row['dt']:>12.4e}  {row['temperature_error']:>12.4e}  {row['potential_error']:>12.4e}  {ratio:>8}")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.action == "list":
        for name, factory in BUILTIN_SCENARIOS.items():
            print(f"{name:<16} {factory().description}")
        return EXIT_OK
    scenario = load_scenario(args.scenario)
    if args.output:
        scenario.save(args.output)
        print(f"Wrote {args.output}")
    else:
        print(json.dumps(scenario.to_dict(), indent=2))
    return EXIT_OK


COMMANDS = {
    "extract": cmd_extract,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "convergence": cmd_convergence,
    "scenario": cmd_scenario,
}


def main(argv: Optional[List[str]] = None) -> int:
    # .env in the working directory, then next to the package
    load_dotenv()
    load_dotenv(Path(__file__).parent.parent / ".env")

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # --help exits 0, usage errors EXIT_ERROR
        return e.code if isinstance(e.code, int) else EXIT_ERROR
    level = "DEBUG" if args.verbose else os.getenv("FITSPICE_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        return COMMANDS[args.command](args)
    except NoConvergence as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except (FitSpiceError, ValueError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
