#!/usr/bin/env python3
"""
Thermo-Electromagnetic Simulation Runner
========================================

Command-line entry point:

    python run_simulation.py run config/upsetting_benchmark.yaml
    python run_simulation.py verify [dc skin power adiabatic radiation]
    python run_simulation.py mesh-info mesh.txt
    python run_simulation.py material-curves --output output/materials.xlsx

Exit codes: 0 success, 1 simulation failure, 2 configuration error,
3 Newton non-convergence.

Author: Simulation Team
Version: 1.0.0
"""

import argparse
import logging
import os
import sys
import time
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from core.coupled_solver import CoupledSolver, CoupledState
from core.exceptions import (ConfigError, InvalidArgumentError, NonConvergenceError,
                             SimulationError)
from core.materials import MaterialModel
from core.mesh import mesh_summary, read_mesh
from result_exporter import ResultExporter
from scenario_config import LoggingConfig, ScenarioConfig, build_problem, load_config
from verifier import Verifier

LOG_FORMAT = '%(asctime)s | %(levelname)-8s | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3

logger = logging.getLogger(__name__)


# ============================================================================
# CONSOLE UI UTILITIES
# ============================================================================

def print_banner(text: str, char: str = "=", width: int = 70):
    """Print a formatted banner"""
    print(f"\n{char * width}")
    print(f"{text.center(width)}")
    print(f"{char * width}\n")


def print_section(text: str, width: int = 70):
    """Print a section header"""
    print(f"\n{'-' * width}")
    print(f"  {text}")
    print(f"{'-' * width}")


def print_step_line(state: CoupledState):
    volts = "  ".join(f"|V{k}| {abs(v):10.4g} V" for k, v in sorted(state.port_voltages.items()))
    print(f"  t = {state.t:8.3f} s | {state.newton_iterations:2d} it | "
          f"max {state.theta_max:8.2f} C | P {state.P_diss:10.4g} W | {volts}")


def setup_logging(settings: Optional[LoggingConfig] = None) -> None:
    """Console handler plus an optional rotating file handler"""
    settings = settings or LoggingConfig(file=None)
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(getattr(logging, str(settings.level).upper(), logging.INFO))
    formatter = logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT)

    console = logging.StreamHandler()
    console.setFormatter(formatter)
    root.addHandler(console)

    if settings.file:
        os.makedirs(os.path.dirname(settings.file) or ".", exist_ok=True)
        handler = RotatingFileHandler(settings.file,
                                      maxBytes=int(settings.max_file_size_mb * 1024 * 1024),
                                      backupCount=settings.backup_count)
        handler.setFormatter(formatter)
        root.addHandler(handler)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_run(args) -> int:
    config: ScenarioConfig = load_config(args.config)
    setup_logging(config.logging)
    problem, solver_config = build_problem(config)

    print_banner(f"SIMULATION: {problem.name.upper()}")
    mesh = problem.mesh
    print(f"  Mesh:      {mesh.num_nodes} nodes, {mesh.num_triangles} triangles")
    print(f"  Mode:      {solver_config.mode}")
    print(f"  Frequency: {problem.frequency_hz:g} Hz")
    print(f"  Steps:     {solver_config.num_steps} x {solver_config.dt:g} s")

    exporter = ResultExporter(config.output.directory, config.output.vtk_every_n_steps,
                              csv=config.output.csv, excel=config.output.excel,
                              prefix=problem.name)
    num_steps = solver_config.num_steps
    step = {'n': 0}

    def on_state(state: CoupledState):
        print_step_line(state)
        if exporter.wants_vtk(step['n'], last=step['n'] == num_steps):
            exporter.export_state(state, problem, solver_config.mode, step['n'])
        step['n'] += 1

    print_section("Time marching")
    start = time.time()
    result = CoupledSolver(problem, solver_config).run(callback=on_state)
    outputs = exporter.finish(result.states, solver_config)

    final = result.final
    print_banner("SIMULATION COMPLETE")
    print(f"  Total time:          {time.time() - start:.1f} s")
    print(f"  Final max theta:     {final.theta_max:.2f} C")
    print(f"  Dissipated power:    {final.P_diss:.6g} W")
    print(f"  Files written:       {len(exporter.written)}")
    for path in outputs:
        print(f"    {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    setup_logging(LoggingConfig(level=args.log_level, file=None))
    print_banner("VERIFICATION AGAINST REFERENCE SOLUTIONS")
    verifier = Verifier(nr=args.nr, nz=args.nz)
    try:
        table = verifier.run(args.checks)
    except KeyError as e:
        raise InvalidArgumentError(str(e.args[0])) from e
    with pd.option_context('display.width', 120, 'display.float_format', '{:.6g}'.format):
        print(table.to_string(index=False))
    passed = int(table['passed'].sum())
    print(f"\n  {passed}/{len(table)} checks passed")
    return EXIT_OK if verifier.all_passed else EXIT_FAILURE


def cmd_mesh_info(args) -> int:
    setup_logging(LoggingConfig(level=args.log_level, file=None))
    mesh = read_mesh(args.mesh)
    mesh.validate()
    summary = mesh_summary(mesh)
    print_section(f"Mesh {args.mesh}")
    print(f"  Nodes:          {summary['nodes']}")
    print(f"  Triangles:      {summary['triangles']}")
    print(f"  Boundary edges: {summary['boundary_edges']}")
    print(f"  r range:        [{summary['r_range'][0]:g}, {summary['r_range'][1]:g}] m")
    print(f"  z range:        [{summary['z_range'][0]:g}, {summary['z_range'][1]:g}] m")
    print(f"  Area:           {summary['area']:.6g} m^2")
    print("  EM tags:        " + ", ".join(f"{k}: {v}" for k, v in sorted(summary['em_tags'].items())))
    print("  Thermal tags:   " + ", ".join(f"{k}: {v}" for k, v in sorted(summary['thermal_tags'].items())))
    return EXIT_OK


def cmd_material_curves(args) -> int:
    setup_logging(LoggingConfig(level=args.log_level, file=None))
    mat = MaterialModel()
    temperatures = [float(t) for t in args.temperatures]
    H = np.linspace(0.0, args.h_max, args.points)
    properties = mat.property_table(np.linspace(0.0, 1500.0, 151))
    curves = {f"BH_{t:g}C": mat.bh_curve(t, H) for t in temperatures}

    output = Path(args.output)
    output.parent.mkdir(parents=True, exist_ok=True)
    if output.suffix.lower() == ".xlsx":
        with pd.ExcelWriter(output, engine='openpyxl') as writer:
            properties.to_excel(writer, sheet_name="Properties", index=False)
            for name, frame in curves.items():
                frame.to_excel(writer, sheet_name=name, index=False)
        written = [output]
    else:
        properties.to_csv(output, index=False)
        written = [output]
        for name, frame in curves.items():
            path = output.with_name(f"{output.stem}_{name}.csv")
            frame.to_csv(path, index=False)
            written.append(path)
    print_section("Material curves")
    for path in written:
        print(f"  {path}")
    return EXIT_OK


# ============================================================================
# MAIN ENTRY POINT
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Axisymmetric thermo-electromagnetic simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a YAML scenario")
    run.add_argument("config")
    run.set_defaults(func=cmd_run)

    verify = sub.add_parser("verify", help="Compare the solver with reference solutions")
    verify.add_argument("checks", nargs="*", help="dc, skin, power, adiabatic, radiation (default: all)")
    verify.add_argument("--nr", type=int, default=16)
    verify.add_argument("--nz", type=int, default=32)
    verify.add_argument("--log-level", default="INFO")
    verify.set_defaults(func=cmd_verify)

    info = sub.add_parser("mesh-info", help="Summarize a mesh file")
    info.add_argument("mesh")
    info.add_argument("--log-level", default="WARNING")
    info.set_defaults(func=cmd_mesh_info)

    curves = sub.add_parser("material-curves", help="Export B-H curves and property tables")
    curves.add_argument("--output", default="output/material_curves.xlsx")
    curves.add_argument("--temperatures", nargs="+", default=[20, 400, 700, 740])
    curves.add_argument("--h-max", type=float, default=2e5)
    curves.add_argument("--points", type=int, default=201)
    curves.add_argument("--log-level", default="WARNING")
    curves.set_defaults(func=cmd_material_curves)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as e:
        print(f"\n❌ Configuration error: {e}", file=sys.stderr)
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NonConvergenceError as e:
        print(f"\n❌ Solver did not converge: {e}", file=sys.stderr)
        logger.error(f"Aborted: {e} (residual history {e.history})")
        return EXIT_NONCONVERGENCE
    except SimulationError as e:
        print(f"\n❌ Simulation failed: {e}", file=sys.stderr)
        logger.error(f"Aborted: {e}")
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("\n\n⚠️ Interrupted by user")
        logger.warning("Interrupted by user")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
