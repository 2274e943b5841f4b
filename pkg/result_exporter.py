"""
Result Exporter
===============

Post-hoc output files of a simulation run.

Features:
- Legacy ASCII VTK unstructured grids (temperature, |H~|, |J|, Joule density)
- Deformed-configuration VTK companions for Lagrangian runs
- CSV time series of port voltages, dissipated power and temperature range
- Optional Excel workbook (openpyxl engine) with a run summary sheet

Author: Simulation Team
Version: 1.0.0
"""

import logging
import os
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from core.coupled_solver import CoupledState, Problem, SolverConfig, timeseries_frame
from core.exceptions import InvalidArgumentError, SimulationError
from core.geometry import FormulationMode
from core.kinematics import push_forward
from core.mesh import MeridionalMesh

logger = logging.getLogger(__name__)

VTK_TRIANGLE = 5
FLOAT_FORMAT = "%.17g"


def _write_scalars(f, name: str, values: np.ndarray) -> None:
    f.write(f"SCALARS {name} double 1\n")
    f.write("LOOKUP_TABLE default\n")
    np.savetxt(f, np.asarray(values, dtype=float).reshape(-1, 1), fmt=FLOAT_FORMAT)


def write_vtk(path: Union[str, Path], mesh: MeridionalMesh, point_data: Dict[str, np.ndarray],
              cell_data: Dict[str, np.ndarray], title: str = "axisymmetric simulation") -> Path:
    """
    Legacy ASCII VTK unstructured grid of a meridional mesh

    Points are written as (r, z, 0). Values use 17 significant digits so that
    they read back bit-exactly.
    """
    n, m = mesh.num_nodes, mesh.num_triangles
    for name, values in point_data.items():
        if len(values) != n:
            raise InvalidArgumentError(f"Point array '{name}' has {len(values)} values, mesh has {n} nodes")
    for name, values in cell_data.items():
        if len(values) != m:
            raise InvalidArgumentError(f"Cell array '{name}' has {len(values)} values, mesh has {m} triangles")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points = np.column_stack([mesh.nodes, np.zeros(n)])
    cells = np.column_stack([np.full(m, 3), mesh.triangles])
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title.splitlines()[0][:255] if title else 'untitled'}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {n} double\n")
        np.savetxt(f, points, fmt=FLOAT_FORMAT)
        f.write(f"CELLS {m} {4 * m}\n")
        np.savetxt(f, cells, fmt="%d")
        f.write(f"CELL_TYPES {m}\n")
        np.savetxt(f, np.full((m, 1), VTK_TRIANGLE), fmt="%d")
        if point_data:
            f.write(f"POINT_DATA {n}\n")
            for name, values in point_data.items():
                _write_scalars(f, name, values)
        if cell_data:
            f.write(f"CELL_DATA {m}\n")
            for name, values in cell_data.items():
                _write_scalars(f, name, values)
    return path


class ResultExporter:
    """Writes VTK snapshots, the CSV time series and the optional workbook of one run"""

    def __init__(self, output_dir: Union[str, Path] = "output", vtk_every_n_steps: int = 10,
                 csv: bool = True, excel: bool = False, prefix: str = "scenario"):
        self.output_dir = Path(output_dir)
        self.vtk_every_n_steps = vtk_every_n_steps
        self.csv = csv
        self.excel = excel
        self.prefix = prefix
        self.written: List[Path] = []
        self.logger = logging.getLogger(f"{__name__}.ResultExporter")
        os.makedirs(self.output_dir, exist_ok=True)

    # ========================================================================
    # FIELDS
    # ========================================================================

    def export_vtk(self, state: CoupledState, mesh: MeridionalMesh, path: Union[str, Path]) -> Path:
        """Temperature and |H~| per node, |J| and Q per triangle"""
        if state.post is None:
            raise InvalidArgumentError("State has no post-processed fields")
        try:
            out = write_vtk(path, mesh,
                            point_data={'temperature': state.theta, 'H_tilde_abs': np.abs(state.H)},
                            cell_data={'current_density_abs': state.post.J_mod,
                                       'joule_density': state.post.Q},
                            title=f"{self.prefix} t={state.t:.17g}")
        except OSError as e:
            raise SimulationError(f"Cannot write {path}: {e}") from e
        self.written.append(out)
        self.logger.debug(f"VTK written: {out}")
        return out

    def export_state(self, state: CoupledState, problem: Problem, mode: FormulationMode,
                     step: int) -> List[Path]:
        """
        Snapshot files of one time level

        Lagrangian runs write the reference mesh and a deformed companion with
        the nodes moved to x = p + u(p, t). Eulerian runs already live on the
        current configuration and write only that mesh.
        """
        deformed = push_forward(problem.mesh, problem.field, state.t)
        stem = self.output_dir / f"{self.prefix}_{step:05d}"
        if FormulationMode(mode) is FormulationMode.LAGRANGIAN:
            return [self.export_vtk(state, problem.mesh, f"{stem}.vtk"),
                    self.export_vtk(state, deformed, f"{stem}_deformed.vtk")]
        return [self.export_vtk(state, deformed, f"{stem}.vtk")]

    def wants_vtk(self, step: int, last: bool = False) -> bool:
        if self.vtk_every_n_steps <= 0:
            return False
        return last or step % self.vtk_every_n_steps == 0

    # ========================================================================
    # TIME SERIES
    # ========================================================================

    def export_timeseries(self, states: Sequence[CoupledState], path: Optional[Union[str, Path]] = None) -> Path:
        """CSV with '.' decimals and ',' separators, one row per time level"""
        if len(states) == 0:
            raise InvalidArgumentError("At least one state is required")
        path = Path(path) if path is not None else self.output_dir / f"{self.prefix}_timeseries.csv"
        frame = timeseries_frame(list(states))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, index=False, sep=",", decimal=".", float_format="%.17g")
        except OSError as e:
            raise SimulationError(f"Cannot write {path}: {e}") from e
        self.written.append(path)
        self.logger.info(f"Time series written: {path} ({len(frame)} rows)")
        return path

    def export_excel(self, states: Sequence[CoupledState], config: Optional[SolverConfig] = None,
                     path: Optional[Union[str, Path]] = None) -> Path:
        """Workbook with a TimeSeries sheet and a Summary sheet"""
        if len(states) == 0:
            raise InvalidArgumentError("At least one state is required")
        path = Path(path) if path is not None else self.output_dir / f"{self.prefix}_timeseries.xlsx"
        frame = timeseries_frame(list(states))
        final = states[-1]
        summary = {
            'Metric': ['Time levels', 'Final time (s)', 'Max temperature (C)',
                       'Min temperature (C)', 'Dissipated power (W)', 'Total Newton iterations'],
            'Value': [len(states), final.t, final.theta_max, final.theta_min, final.P_diss,
                      sum(s.newton_iterations for s in states)],
        }
        try:
            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                frame.to_excel(writer, sheet_name="TimeSeries", index=False)
                pd.DataFrame(summary).to_excel(writer, sheet_name="Summary", index=False)
                if config is not None:
                    settings = pd.DataFrame(list(config.to_dict().items()), columns=['Setting', 'Value'])
                    settings['Value'] = settings['Value'].astype(str)
                    settings.to_excel(writer, sheet_name="Solver", index=False)
        except OSError as e:
            raise SimulationError(f"Cannot write {path}: {e}") from e
        self.written.append(path)
        self.logger.info(f"Workbook written: {path}")
        return path

    def finish(self, states: Sequence[CoupledState], config: Optional[SolverConfig] = None) -> List[Path]:
        """Time-series outputs enabled for this run"""
        paths = []
        if self.csv:
            paths.append(self.export_timeseries(states))
        if self.excel:
            paths.append(self.export_excel(states, config))
        return paths


def export_vtk(state: CoupledState, mesh: MeridionalMesh, path: Union[str, Path]) -> Path:
    return ResultExporter(Path(path).parent).export_vtk(state, mesh, path)


def export_timeseries(states: Iterable[CoupledState], path: Union[str, Path]) -> Path:
    return ResultExporter(Path(path).parent).export_timeseries(list(states), path)
