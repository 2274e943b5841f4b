"""
Scenario Configuration
======================

YAML scenario files for the simulator: parsing with defaults, validation
with line numbers or key paths in every error, printing back to YAML, and
construction of the solver objects.

Sections: scenario, geometry, motion, materials, ports, source, thermal,
solver, output, logging. ``scenario: upsetting_benchmark`` pre-fills every
section with the upsetting benchmark (35 kA at 500 Hz, 20 C start,
insulated boundaries, 20 s); keys given in the file override it.

Author: Simulation Team
Version: 1.0.0
"""

import copy
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from core.coupled_solver import Problem, SolverConfig, step_count
from core.em_assembly import Port, PortSpec
from core.exceptions import ConfigError, InvalidArgumentError
from core.kinematics import (DisplacementField, RadialStretchField, UpsettingBenchmarkField,
                             ZeroField, ramp_constant, ramp_linear)
from core.materials import MaterialModel
from core.mesh import MeridionalMesh, ThermalTag, generate_rectangle_mesh, read_mesh
from core.thermal_assembly import ThermalBC

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "AXISYM_OUTPUT_DIR"
BENCHMARK = "upsetting_benchmark"


# ============================================================================
# SECTIONS
# ============================================================================

@dataclass
class GeometryConfig:
    R: Optional[float] = None
    L: Optional[float] = None
    nr: int = 8
    nz: int = 16
    mesh_file: Optional[str] = None


@dataclass
class MotionConfig:
    field: str = "zero"
    stretch: float = 0.0
    ramp: str = "constant"
    ramp_duration: Optional[float] = None
    ramp_level: float = 1.0


@dataclass
class PortConfig:
    k: int = 1
    drive: str = "current"
    amplitude_re: float = 0.0
    amplitude_im: float = 0.0


@dataclass
class SourceConfig:
    frequency_hz: Optional[float] = None


@dataclass
class ThermalConfig:
    theta0: float = 20.0
    h: float = 0.0
    emissivity: float = 0.0
    theta_conv: float = 20.0
    theta_rad: float = 20.0
    dirichlet: Optional[float] = None
    sides: Dict[str, str] = field(default_factory=dict)


@dataclass
class SolverSection:
    dt: float = 0.1
    t_end: float = 20.0
    newton_tol: float = 1e-8
    newton_abs_tol: float = 1e-12
    newton_max_iter: int = 25
    damping: float = 0.5
    min_step: float = 1.0 / 64.0
    max_halvings: int = 3
    mode: str = "lagrangian"
    lumped_mass: bool = False


@dataclass
class OutputConfig:
    directory: str = "output"
    vtk_every_n_steps: int = 10
    csv: bool = True
    excel: bool = False


@dataclass
class LoggingConfig:
    level: str = "INFO"
    file: Optional[str] = "logs/simulation.log"
    max_file_size_mb: float = 10
    backup_count: int = 5


@dataclass
class ScenarioConfig:
    """Validated scenario with every default filled in"""
    scenario: Optional[str] = None
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)
    materials: Dict[str, Any] = field(default_factory=dict)
    ports: List[PortConfig] = field(default_factory=list)
    source: SourceConfig = field(default_factory=SourceConfig)
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputConfig = field(default_factory=OutputConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)

    def to_dict(self) -> Dict:
        return asdict(self)


SECTIONS = {
    'geometry': GeometryConfig,
    'motion': MotionConfig,
    'source': SourceConfig,
    'thermal': ThermalConfig,
    'solver': SolverSection,
    'output': OutputConfig,
    'logging': LoggingConfig,
}

BENCHMARK_DEFAULTS: Dict[str, Any] = {
    'geometry': {'R': 0.02875, 'L': 0.165, 'nr': 48, 'nz': 96, 'mesh_file': None},
    'motion': {'field': BENCHMARK, 'stretch': 0.0, 'ramp': 'linear',
               'ramp_duration': None, 'ramp_level': 1.0},
    'materials': {},
    'ports': [{'k': 1, 'drive': 'current', 'amplitude_re': 35000.0, 'amplitude_im': 0.0}],
    'source': {'frequency_hz': 500.0},
    'thermal': {'theta0': 20.0, 'h': 0.0, 'emissivity': 0.0, 'theta_conv': 20.0,
                'theta_rad': 20.0, 'dirichlet': None, 'sides': {}},
    'solver': {'dt': 0.1, 't_end': 20.0, 'mode': 'lagrangian'},
}

SCENARIOS = {BENCHMARK: BENCHMARK_DEFAULTS}

FIELDS = ('upsetting_benchmark', 'zero', 'radial_stretch')
RAMPS = ('linear', 'constant')
MODES = ('lagrangian', 'eulerian')
DRIVES = ('current', 'voltage')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')
SIDES = ('bottom', 'right', 'top')


# ============================================================================
# PARSING
# ============================================================================

def _load_yaml(text: str) -> Dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(e, 'problem', None) or str(e)
        raise ConfigError(f"YAML syntax error: {problem}", line=line) from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("Top level must be a mapping", line=1)
    return data


def _merge(defaults: Dict, user: Dict) -> Dict:
    merged = copy.deepcopy(defaults)
    for key, value in user.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _build_section(name: str, cls, raw) -> Any:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("Section must be a mapping", key_path=name)
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError("Unknown key", key_path=f"{name}.{key}")
    return cls(**raw)


def _number(value, path: str, integer: bool = False, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"Expected a number, got {value!r}", key_path=path)
    if integer and int(value) != value:
        raise ConfigError(f"Expected an integer, got {value!r}", key_path=path)
    return int(value) if integer else float(value)


def _choice(value, path: str, options) -> str:
    if value not in options:
        raise ConfigError(f"Expected one of {list(options)}, got {value!r}", key_path=path)
    return value


def _validate(cfg: ScenarioConfig) -> None:
    """Type coercion and range checks, reporting the offending key path"""
    g = cfg.geometry
    if g.mesh_file is None:
        g.R = _number(g.R, 'geometry.R')
        g.L = _number(g.L, 'geometry.L')
        if g.R <= 0:
            raise ConfigError("Must be positive", key_path='geometry.R')
        if g.L <= 0:
            raise ConfigError("Must be positive", key_path='geometry.L')
    else:
        g.R = _number(g.R, 'geometry.R', allow_none=True)
        g.L = _number(g.L, 'geometry.L', allow_none=True)
    g.nr = _number(g.nr, 'geometry.nr', integer=True)
    g.nz = _number(g.nz, 'geometry.nz', integer=True)
    if g.nr < 1:
        raise ConfigError("Must be >= 1", key_path='geometry.nr')
    if g.nz < 1:
        raise ConfigError("Must be >= 1", key_path='geometry.nz')

    m = cfg.motion
    _choice(m.field, 'motion.field', FIELDS)
    _choice(m.ramp, 'motion.ramp', RAMPS)
    m.stretch = _number(m.stretch, 'motion.stretch')
    if m.stretch <= -1.0:
        raise ConfigError("Must exceed -1", key_path='motion.stretch')
    m.ramp_duration = _number(m.ramp_duration, 'motion.ramp_duration', allow_none=True)
    if m.ramp_duration is not None and m.ramp_duration <= 0:
        raise ConfigError("Must be positive", key_path='motion.ramp_duration')
    m.ramp_level = _number(m.ramp_level, 'motion.ramp_level')
    if not 0.0 <= m.ramp_level <= 1.0:
        raise ConfigError("Must lie in [0, 1]", key_path='motion.ramp_level')

    if not isinstance(cfg.materials, dict):
        raise ConfigError("Section must be a mapping", key_path='materials')
    try:
        MaterialModel.from_dict(cfg.materials)
    except (InvalidArgumentError, TypeError) as e:
        raise ConfigError(str(e), key_path='materials') from e

    seen = set()
    for i, p in enumerate(cfg.ports):
        path = f'ports[{i}]'
        p.k = _number(p.k, f'{path}.k', integer=True)
        if p.k < 1 or p.k in seen:
            raise ConfigError("Port index must be >= 1 and unique", key_path=f'{path}.k')
        seen.add(p.k)
        _choice(p.drive, f'{path}.drive', DRIVES)
        p.amplitude_re = _number(p.amplitude_re, f'{path}.amplitude_re')
        p.amplitude_im = _number(p.amplitude_im, f'{path}.amplitude_im')

    f_hz = _number(cfg.source.frequency_hz, 'source.frequency_hz', allow_none=True)
    if f_hz is None and cfg.ports:
        raise ConfigError("Required when ports are driven", key_path='source.frequency_hz')
    if f_hz is not None and f_hz <= 0:
        raise ConfigError("Must be positive", key_path='source.frequency_hz')
    cfg.source.frequency_hz = f_hz

    th = cfg.thermal
    for name in ('theta0', 'h', 'emissivity', 'theta_conv', 'theta_rad'):
        setattr(th, name, _number(getattr(th, name), f'thermal.{name}'))
    th.dirichlet = _number(th.dirichlet, 'thermal.dirichlet', allow_none=True)
    if th.h < 0:
        raise ConfigError("Must be non-negative", key_path='thermal.h')
    if not 0.0 <= th.emissivity <= 1.0:
        raise ConfigError("Must lie in [0, 1]", key_path='thermal.emissivity')
    if not isinstance(th.sides, dict):
        raise ConfigError("Must be a mapping of side to thermal tag", key_path='thermal.sides')
    for side, tag in th.sides.items():
        _choice(side, 'thermal.sides', SIDES)
        _choice(tag, f'thermal.sides.{side}', ('dirichlet', 'convrad', 'none'))
        if tag == 'dirichlet' and th.dirichlet is None:
            raise ConfigError("Dirichlet sides need a temperature", key_path='thermal.dirichlet')

    s = cfg.solver
    for name in ('dt', 't_end', 'newton_tol', 'newton_abs_tol', 'damping', 'min_step'):
        setattr(s, name, _number(getattr(s, name), f'solver.{name}'))
    for name in ('newton_max_iter', 'max_halvings'):
        setattr(s, name, _number(getattr(s, name), f'solver.{name}', integer=True))
    if s.dt <= 0:
        raise ConfigError("Must be positive", key_path='solver.dt')
    if s.t_end < 0:
        raise ConfigError("Must be non-negative", key_path='solver.t_end')
    try:
        step_count(s.t_end, s.dt)
    except InvalidArgumentError as e:
        raise ConfigError(str(e), key_path='solver.t_end') from e
    if s.newton_tol <= 0 or s.newton_abs_tol <= 0:
        raise ConfigError("Tolerances must be positive", key_path='solver.newton_tol')
    if not 0.0 < s.damping < 1.0:
        raise ConfigError("Must lie in (0, 1)", key_path='solver.damping')
    if not 0.0 < s.min_step <= 1.0:
        raise ConfigError("Must lie in (0, 1]", key_path='solver.min_step')
    _choice(s.mode, 'solver.mode', MODES)
    if not isinstance(s.lumped_mass, bool):
        raise ConfigError("Expected true or false", key_path='solver.lumped_mass')

    o = cfg.output
    o.vtk_every_n_steps = _number(o.vtk_every_n_steps, 'output.vtk_every_n_steps', integer=True)
    if o.vtk_every_n_steps < 0:
        raise ConfigError("Must be >= 0 (0 disables VTK)", key_path='output.vtk_every_n_steps')
    for name in ('csv', 'excel'):
        if not isinstance(getattr(o, name), bool):
            raise ConfigError("Expected true or false", key_path=f'output.{name}')

    lg = cfg.logging
    lg.level = str(lg.level).upper()
    _choice(lg.level, 'logging.level', LOG_LEVELS)
    lg.max_file_size_mb = _number(lg.max_file_size_mb, 'logging.max_file_size_mb')
    lg.backup_count = _number(lg.backup_count, 'logging.backup_count', integer=True)


def parse_config(text: str) -> ScenarioConfig:
    """
    Parse and validate a YAML scenario

    Raises:
        ConfigError: syntax error (with line number) or invalid value (with key path)
    """
    data = _load_yaml(text)
    known = {'scenario', 'materials', 'ports'} | set(SECTIONS)
    for key in data:
        if key not in known:
            raise ConfigError("Unknown key", key_path=str(key))

    scenario = data.get('scenario')
    if scenario is not None:
        if scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario {scenario!r} (available: {sorted(SCENARIOS)})",
                              key_path='scenario')
        data = _merge(SCENARIOS[scenario], data)

    sections = {name: _build_section(name, cls, data.get(name)) for name, cls in SECTIONS.items()}

    raw_ports = data.get('ports') or []
    if not isinstance(raw_ports, list):
        raise ConfigError("Must be a list", key_path='ports')
    ports = [_build_section(f'ports[{i}]', PortConfig, p) for i, p in enumerate(raw_ports)]

    cfg = ScenarioConfig(scenario=scenario, materials=dict(data.get('materials') or {}),
                         ports=ports, **sections)
    _validate(cfg)
    return cfg


def print_config(cfg: ScenarioConfig) -> str:
    """YAML text that parses back to an equal configuration"""
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=False)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Read a scenario file and apply the output-directory environment override"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}") from e
    cfg = parse_config(text)
    if cfg.geometry.mesh_file and not Path(cfg.geometry.mesh_file).is_absolute():
        cfg.geometry.mesh_file = str(path.parent / cfg.geometry.mesh_file)
    override = os.getenv(OUTPUT_DIR_ENV)
    if override:
        logger.info(f"Output directory overridden by {OUTPUT_DIR_ENV}: {override}")
        cfg.output.directory = override
    logger.info(f"Configuration loaded from {path}")
    return cfg


# ============================================================================
# SCENARIO CONSTRUCTION
# ============================================================================

def build_mesh(cfg: ScenarioConfig) -> MeridionalMesh:
    if cfg.geometry.mesh_file:
        return read_mesh(cfg.geometry.mesh_file)
    sides = {side: ThermalTag(tag) for side, tag in cfg.thermal.sides.items()}
    g = cfg.geometry
    return generate_rectangle_mesh(g.R, g.L, g.nr, g.nz, thermal_sides=sides)


def build_field(cfg: ScenarioConfig) -> DisplacementField:
    m = cfg.motion
    if m.ramp == 'linear':
        duration = m.ramp_duration or cfg.solver.t_end
        if duration <= 0:
            raise ConfigError("Linear ramp needs a positive duration", key_path='motion.ramp_duration')
        ramp = ramp_linear(duration)
    else:
        ramp = ramp_constant(m.ramp_level)
    if m.field == 'upsetting_benchmark':
        return UpsettingBenchmarkField(ramp)
    if m.field == 'radial_stretch':
        return RadialStretchField(m.stretch, ramp)
    return ZeroField(ramp)


def build_ports(cfg: ScenarioConfig) -> PortSpec:
    ports = []
    for p in cfg.ports:
        amplitude = complex(p.amplitude_re, p.amplitude_im)
        ports.append(Port.current(p.k, amplitude) if p.drive == 'current'
                     else Port.voltage(p.k, amplitude))
    return PortSpec(tuple(ports))


def build_solver_config(cfg: ScenarioConfig) -> SolverConfig:
    return SolverConfig(**asdict(cfg.solver))


def build_problem(cfg: ScenarioConfig) -> Tuple[Problem, SolverConfig]:
    """
    Solver objects for a validated scenario

    Raises:
        ConfigError: inconsistencies only detectable against the mesh
    """
    mesh = build_mesh(cfg)
    ports = build_ports(cfg)
    try:
        ports.validate(mesh)
    except InvalidArgumentError as e:
        raise ConfigError(str(e), key_path='ports') from e
    th = cfg.thermal
    bc = ThermalBC(h=th.h, emissivity=th.emissivity, theta_conv=th.theta_conv,
                   theta_rad=th.theta_rad, dirichlet=th.dirichlet)
    if mesh.nodes_with(ThermalTag.DIRICHLET).size and th.dirichlet is None:
        raise ConfigError("Mesh has Dirichlet edges", key_path='thermal.dirichlet')
    frequency = cfg.source.frequency_hz or 0.0
    problem = Problem(mesh=mesh, field=build_field(cfg),
                      materials=MaterialModel.from_dict(cfg.materials), ports=ports,
                      omega=2.0 * np.pi * frequency, bc=bc, theta0=th.theta0,
                      name=cfg.scenario or 'custom')
    return problem, build_solver_config(cfg)
