"""
test_scenario_config.py - YAML scenarios, defaults and validation messages
"""

from pathlib import Path

import numpy as np
import pytest

from core.exceptions import ConfigError
from core.geometry import FormulationMode
from core.kinematics import UpsettingBenchmarkField, ZeroField
from scenario_config import (OUTPUT_DIR_ENV, build_problem, load_config, parse_config,
                             print_config)

CONFIG_DIR = Path(__file__).parent / "config"

CUSTOM = """
geometry:
  R: 0.01
  L: 0.04
  nr: 2
  nz: 4
ports:
  - k: 1
    drive: voltage
    amplitude_re: 0.5
source:
  frequency_hz: 50.0
solver:
  dt: 0.5
  t_end: 1.0
  mode: eulerian
"""


def key_path_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.key_path


# ============================================================================
# DEFAULTS AND OVERRIDES
# ============================================================================

def test_benchmark_defaults():
    cfg = parse_config("scenario: upsetting_benchmark\n")
    assert cfg.geometry.R == 0.02875
    assert cfg.geometry.L == 0.165
    assert (cfg.geometry.nr, cfg.geometry.nz) == (48, 96)
    assert cfg.ports[0].amplitude_re == 35000.0
    assert cfg.source.frequency_hz == 500.0
    assert cfg.thermal.h == 0.0 and cfg.thermal.emissivity == 0.0
    assert cfg.solver.dt == 0.1 and cfg.solver.t_end == 20.0
    assert cfg.motion.field == "upsetting_benchmark"


def test_keys_override_scenario():
    cfg = parse_config("scenario: upsetting_benchmark\nsolver:\n  dt: 0.05\n")
    assert cfg.solver.dt == 0.05
    assert cfg.solver.t_end == 20.0


def test_custom_scenario():
    cfg = parse_config(CUSTOM)
    assert cfg.scenario is None
    assert cfg.ports[0].drive == "voltage"
    assert cfg.solver.newton_tol == 1e-8
    assert cfg.logging.level == "INFO"


def test_print_round_trip():
    cfg = parse_config("scenario: upsetting_benchmark\nthermal:\n  h: 15\n")
    assert parse_config(print_config(cfg)) == cfg


# ============================================================================
# ERRORS
# ============================================================================

def test_missing_frequency():
    path = key_path_of("scenario: upsetting_benchmark\nsource:\n  frequency_hz: null\n")
    assert path == "source.frequency_hz"


def test_emissivity_out_of_range():
    assert key_path_of("scenario: upsetting_benchmark\nthermal:\n  emissivity: 1.5\n") == \
        "thermal.emissivity"


def test_unknown_key():
    assert key_path_of("scenario: upsetting_benchmark\nsolver:\n  dtt: 0.1\n") == "solver.dtt"
    assert key_path_of("bogus: 1\n") == "bogus"


@pytest.mark.parametrize("override, expected", [
    ("geometry:\n  nr: 0\n", "geometry.nr"),
    ("geometry:\n  nz: 2.5\n", "geometry.nz"),
    ("solver:\n  mode: spectral\n", "solver.mode"),
    ("solver:\n  dt: -0.1\n", "solver.dt"),
    ("solver:\n  dt: 0.3\n", "solver.t_end"),
    ("motion:\n  stretch: -1.0\n", "motion.stretch"),
    ("ports:\n  - k: 1\n    drive: power\n", "ports[0].drive"),
    ("materials:\n  constant_mu: 1.0e-9\n", "materials"),
    ("thermal:\n  sides: {top: dirichlet}\n", "thermal.dirichlet"),
    ("logging:\n  level: chatty\n", "logging.level"),
])
def test_invalid_values_name_their_key(override, expected):
    assert key_path_of("scenario: upsetting_benchmark\n" + override) == expected


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config("solver:\n  dt: 0.1\n   t_end: 2\n")
    assert info.value.line == 3
    assert str(info.value).startswith("line 3:")


def test_unknown_scenario():
    assert key_path_of("scenario: forging\n") == "scenario"


# ============================================================================
# CONSTRUCTION
# ============================================================================

def test_build_benchmark_problem():
    cfg = parse_config("scenario: upsetting_benchmark\ngeometry:\n  nr: 4\n  nz: 8\n")
    problem, solver_config = build_problem(cfg)
    assert problem.mesh.num_nodes == 45
    assert problem.omega == pytest.approx(2.0 * np.pi * 500.0)
    assert isinstance(problem.field, UpsettingBenchmarkField)
    assert problem.ports.get(1).amplitude == 35000.0
    assert problem.name == "upsetting_benchmark"
    assert solver_config.mode is FormulationMode.LAGRANGIAN
    assert solver_config.num_steps == 200


def test_build_custom_problem():
    problem, solver_config = build_problem(parse_config(CUSTOM))
    assert isinstance(problem.field, ZeroField)
    assert problem.ports.voltage_ports[0].amplitude == 0.5
    assert problem.name == "custom"
    assert solver_config.mode is FormulationMode.EULERIAN


def test_port_mismatch():
    cfg = parse_config(CUSTOM.replace("- k: 1", "- k: 2"))
    with pytest.raises(ConfigError) as info:
        build_problem(cfg)
    assert info.value.key_path == "ports"


def test_dirichlet_sides():
    cfg = parse_config(CUSTOM + "thermal:\n  dirichlet: 100.0\n  sides: {bottom: dirichlet}\n")
    problem, _ = build_problem(cfg)
    assert problem.bc.dirichlet == 100.0


# ============================================================================
# FILES
# ============================================================================

def test_load_config_with_output_override(tmp_path, monkeypatch):
    path = tmp_path / "scenario.yaml"
    path.write_text(CUSTOM)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "elsewhere"))
    assert load_config(path).output.directory == str(tmp_path / "elsewhere")
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert load_config(path).output.directory == "output"


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


@pytest.mark.parametrize("name", ["upsetting_benchmark.yaml", "skin_effect.yaml"])
def test_shipped_scenarios_parse(name, monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)
    cfg = load_config(CONFIG_DIR / name)
    problem, _ = build_problem(cfg)
    assert problem.mesh.num_triangles == 2 * cfg.geometry.nr * cfg.geometry.nz
