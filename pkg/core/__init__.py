"""
Core Thermo-Electromagnetic Engine
===================================

Axisymmetric eddy-current and heat-transfer simulation of conductors under
prescribed large deformation.

Components:
- mesh.py: tagged meridional triangulations and the mesh file format
- kinematics.py: prescribed motion, deformation gradient and pull-back tensors
- materials.py: conductivity, heat capacity and saturating permeability laws
- geometry.py: quadrature-point geometric factors for both formulations
- em_assembly.py: eddy-current system with electric ports
- thermal_assembly.py: implicit-Euler heat equation with Joule source
- coupled_solver.py: monolithic Newton time marching
- oracles.py: analytic and ODE reference solutions
"""

__version__ = "1.0.0"
__author__ = "Simulation Team"

from .exceptions import (
    SimulationError,
    InvalidArgumentError,
    MeshTaggingError,
    DegenerateMotionError,
    MaterialRangeError,
    NonConvergenceError,
    OracleRangeError,
    ConfigError
)

from .mesh import (
    MeridionalMesh,
    BoundaryEdge,
    EMTag,
    EMTagKind,
    ThermalTag,
    generate_rectangle_mesh,
    boundary_runs,
    mesh_summary,
    read_mesh,
    write_mesh
)

from .kinematics import (
    DisplacementField,
    KinematicPoint,
    LinearRamp,
    ConstantRamp,
    eval_kinematics,
    full_deformation_gradient,
    push_forward,
    ramp_linear,
    ramp_constant,
    upsetting_benchmark_field,
    radial_stretch_field,
    zero_field
)

from .materials import MaterialModel, MU0

from .geometry import FormulationMode

from .em_assembly import (
    Port,
    PortSpec,
    DriveKind,
    EMSystem,
    EMSolution,
    EMPostFields,
    assemble_em_lagrangian,
    assemble_em_eulerian,
    port_and_multiplier_constraints,
    reconstruct_current_density,
    complex_port_power,
    solve_em_system,
    solve_em_nonlinear
)

from .thermal_assembly import (
    ThermalBC,
    ThermalSystem,
    assemble_thermal_lagrangian,
    assemble_thermal_eulerian
)

from .coupled_solver import (
    SolverConfig,
    Problem,
    CoupledState,
    CoupledSolver,
    SimulationResult,
    newton_solve,
    step_count,
    time_step,
    run_simulation,
    timeseries_frame
)

from . import oracles

__all__ = [
    # Errors
    'SimulationError',
    'InvalidArgumentError',
    'MeshTaggingError',
    'DegenerateMotionError',
    'MaterialRangeError',
    'NonConvergenceError',
    'OracleRangeError',
    'ConfigError',

    # Mesh
    'MeridionalMesh',
    'BoundaryEdge',
    'EMTag',
    'EMTagKind',
    'ThermalTag',
    'generate_rectangle_mesh',
    'boundary_runs',
    'mesh_summary',
    'read_mesh',
    'write_mesh',

    # Kinematics
    'DisplacementField',
    'KinematicPoint',
    'LinearRamp',
    'ConstantRamp',
    'eval_kinematics',
    'full_deformation_gradient',
    'push_forward',
    'ramp_linear',
    'ramp_constant',
    'upsetting_benchmark_field',
    'radial_stretch_field',
    'zero_field',

    # Materials
    'MaterialModel',
    'MU0',

    # Assembly
    'FormulationMode',
    'Port',
    'PortSpec',
    'DriveKind',
    'EMSystem',
    'EMSolution',
    'EMPostFields',
    'assemble_em_lagrangian',
    'assemble_em_eulerian',
    'port_and_multiplier_constraints',
    'reconstruct_current_density',
    'complex_port_power',
    'solve_em_system',
    'solve_em_nonlinear',
    'ThermalBC',
    'ThermalSystem',
    'assemble_thermal_lagrangian',
    'assemble_thermal_eulerian',

    # Solver
    'SolverConfig',
    'Problem',
    'CoupledState',
    'CoupledSolver',
    'SimulationResult',
    'newton_solve',
    'step_count',
    'time_step',
    'run_simulation',
    'timeseries_frame',

    # References
    'oracles'
]
