"""
test_run_simulation.py - Command-line entry point and exit codes
"""

import logging

import pandas as pd
import pytest

from core.mesh import generate_rectangle_mesh, write_mesh
from run_simulation import (EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK, build_parser, main,
                            setup_logging)
from scenario_config import LoggingConfig, OUTPUT_DIR_ENV

SCENARIO = """
geometry:
  R: 0.01
  L: 0.03
  nr: 2
  nz: 4
materials:
  constant_sigma: 5.0e+6
  constant_mu: 1.0e-4
ports:
  - k: 1
    drive: current
    amplitude_re: 2000.0
source:
  frequency_hz: 500.0
solver:
  dt: 0.1
  t_end: 0.2
output:
  directory: {output}
  vtk_every_n_steps: 1
  excel: true
logging:
  level: WARNING
  file: null
"""


@pytest.fixture(autouse=True)
def restore_logging(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def write_scenario(tmp_path, extra=""):
    path = tmp_path / "scenario.yaml"
    path.write_text(SCENARIO.format(output=tmp_path / "out") + extra)
    return path


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", str(write_scenario(tmp_path))]) == EXIT_OK
    out = tmp_path / "out"
    names = sorted(p.name for p in out.iterdir())
    assert "custom_timeseries.csv" in names
    assert "custom_timeseries.xlsx" in names
    assert "custom_00000.vtk" in names and "custom_00002_deformed.vtk" in names
    series = pd.read_csv(out / "custom_timeseries.csv")
    assert len(series) == 3
    assert "SIMULATION COMPLETE" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    path = write_scenario(tmp_path, "thermal:\n  emissivity: 2.0\n")
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert "thermal.emissivity" in capsys.readouterr().err


def test_non_convergence_exit_code(tmp_path):
    text = write_scenario(tmp_path).read_text()
    text = text.replace("materials:\n  constant_sigma: 5.0e+6\n  constant_mu: 1.0e-4\n", "")
    text = text.replace("  t_end: 0.2\n", "  t_end: 0.2\n  newton_max_iter: 1\n  max_halvings: 0\n")
    scenario = tmp_path / "nonlinear.yaml"
    scenario.write_text(text)
    assert main(["run", str(scenario)]) == EXIT_NONCONVERGENCE


def test_mesh_info(tmp_path, capsys):
    path = write_mesh(generate_rectangle_mesh(0.01, 0.02, 2, 3), tmp_path / "bar.mesh")
    assert main(["mesh-info", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Triangles:      12" in out
    assert "portJ:1: 2" in out


def test_material_curves_workbook(tmp_path):
    output = tmp_path / "curves.xlsx"
    assert main(["material-curves", "--output", str(output), "--temperatures", "20", "700",
                 "--points", "11"]) == EXIT_OK
    workbook = pd.ExcelFile(output, engine='openpyxl')
    assert workbook.sheet_names == ["Properties", "BH_20C", "BH_700C"]
    assert len(pd.read_excel(workbook, sheet_name="BH_20C")) == 11


def test_material_curves_csv(tmp_path):
    output = tmp_path / "props.csv"
    assert main(["material-curves", "--output", str(output), "--temperatures", "20"]) == EXIT_OK
    assert (tmp_path / "props_BH_20C.csv").exists()


def test_unknown_verification_check(capsys):
    assert main(["verify", "magic"]) == EXIT_CONFIG


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_setup_logging_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(LoggingConfig(level="debug", file=str(log_file)))
    logging.getLogger("core.test").debug("hello")
    assert logging.getLogger().level == logging.DEBUG
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "hello" in log_file.read_text()
