"""
Coupled Solver - Monolithic Thermo-Electromagnetic Time Marching
=================================================================

At each time step the electromagnetic unknowns (nodal H~, insulated-edge
multipliers, port voltages) and the nodal temperatures are solved together
by damped Newton-Raphson on a real system:

    x = [Re H~_free, Im H~_free, Re mult, Im mult, theta]

The Jacobian carries every coupling: temperature enters the
electromagnetic rows through sigma and mu, and the field enters the thermal
rows through the Joule source. Linear systems are solved with a sparse LU.

Features:
- Generic damped Newton with backtracking (``newton_solve``)
- Lagrangian or Eulerian (moved mesh) formulation per run
- Electromagnetic solve at t = 0 before the first thermal step
- Step halving on Newton failure
- SimulationResult with a pandas time series

Author: Simulation Team
Version: 1.0.0
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.sparse import bmat, diags, issparse
from scipy.sparse.linalg import splu

from .em_assembly import (EMPostFields, PortSpec, complex_port_power, em_tangent, joule_source,
                          make_solution, port_and_multiplier_constraints, post_fields)
from .exceptions import InvalidArgumentError, NonConvergenceError
from .geometry import (FormulationMode, BoundaryGeometry, VolumeGeometry,
                       eulerian_boundary_geometry, lagrangian_boundary_geometry, volume_geometry)
from .kinematics import DisplacementField, push_forward
from .materials import MaterialModel
from .mesh import MeridionalMesh, ThermalTag
from .thermal_assembly import ThermalBC, assemble_thermal, dirichlet_data

logger = logging.getLogger(__name__)


# ============================================================================
# NEWTON-RAPHSON
# ============================================================================

@dataclass
class NewtonResult:
    """Outcome of a Newton solve"""
    x: np.ndarray
    iterations: int
    history: List[float]

    @property
    def final_residual(self) -> float:
        return self.history[-1] if self.history else 0.0


def _linear_solve(J, rhs: np.ndarray) -> np.ndarray:
    if issparse(J):
        try:
            return splu(J.tocsc()).solve(rhs)
        except RuntimeError as e:
            raise NonConvergenceError(f"Singular Jacobian: {e}") from e
    J = np.atleast_2d(np.asarray(J, dtype=float))
    try:
        return np.linalg.solve(J, rhs)
    except np.linalg.LinAlgError as e:
        raise NonConvergenceError(f"Singular Jacobian: {e}") from e


def newton_solve(residual_fn: Callable[[np.ndarray], np.ndarray],
                 jacobian_fn: Callable[[np.ndarray], object],
                 x0, tol: float = 1e-8, max_iter: int = 25, damping: float = 0.5,
                 min_step: float = 1.0 / 64.0, abs_tol: float = 1e-12) -> NewtonResult:
    """
    Damped Newton-Raphson

    Stops when ||R(x)|| <= tol * ||R(x0)|| or ||R(x)|| <= abs_tol. Each step
    is multiplied by ``damping`` while the residual norm does not decrease,
    down to ``min_step``, where the step is taken regardless.

    Raises:
        NonConvergenceError: max_iter exceeded (carries the residual history)
    """
    if not (tol > 0 and abs_tol > 0 and 0 < damping < 1 and 0 < min_step <= 1):
        raise InvalidArgumentError("Invalid Newton parameters")
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    r = np.atleast_1d(residual_fn(x))
    norm = float(np.linalg.norm(r))
    target = max(tol * norm, abs_tol)
    history = [norm]
    if norm <= abs_tol:
        return NewtonResult(x=x, iterations=0, history=history)

    for iteration in range(1, max_iter + 1):
        dx = _linear_solve(jacobian_fn(x), -r)
        step = 1.0
        while True:
            x_new = x + step * dx
            r_new = np.atleast_1d(residual_fn(x_new))
            norm_new = float(np.linalg.norm(r_new))
            if norm_new < norm or step <= min_step:
                break
            step *= damping
        x, r, norm = x_new, r_new, norm_new
        history.append(norm)
        logger.debug(f"Newton {iteration}: |R| = {norm:.3e} (step {step:g})")
        if norm <= target:
            return NewtonResult(x=x, iterations=iteration, history=history)

    raise NonConvergenceError(f"Newton did not converge in {max_iter} iterations "
                              f"(|R| = {norm:.3e}, target {target:.3e})",
                              history=history, final_residual=norm)


# ============================================================================
# CONFIGURATION AND STATE
# ============================================================================

def step_count(t_end: float, dt: float, tolerance: float = 1e-9) -> int:
    """
    Number of steps of length dt that reach t_end exactly

    Raises:
        InvalidArgumentError: t_end is not an integer multiple of dt
    """
    ratio = t_end / dt
    steps = int(round(ratio))
    if abs(ratio - steps) > tolerance * max(1.0, abs(ratio)):
        raise InvalidArgumentError(
            f"t_end = {t_end:g} is not a multiple of dt = {dt:g} ({ratio:.6g} steps)")
    return steps


@dataclass
class SolverConfig:
    """Time stepping and Newton parameters"""
    dt: float = 0.1
    t_end: float = 20.0
    newton_tol: float = 1e-8
    newton_abs_tol: float = 1e-12
    newton_max_iter: int = 25
    damping: float = 0.5
    min_step: float = 1.0 / 64.0
    max_halvings: int = 3
    mode: FormulationMode = FormulationMode.LAGRANGIAN
    lumped_mass: bool = False

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = FormulationMode(self.mode)
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0:
            raise InvalidArgumentError(f"t_end must be non-negative, got {self.t_end}")
        if not (self.newton_tol > 0 and self.newton_abs_tol > 0):
            raise InvalidArgumentError("Newton tolerances must be positive")
        if self.newton_max_iter < 1 or self.max_halvings < 0:
            raise InvalidArgumentError("newton_max_iter must be >= 1 and max_halvings >= 0")
        step_count(self.t_end, self.dt)

    @property
    def num_steps(self) -> int:
        return step_count(self.t_end, self.dt)

    def to_dict(self) -> Dict:
        return {'dt': self.dt, 't_end': self.t_end, 'newton_tol': self.newton_tol,
                'newton_abs_tol': self.newton_abs_tol, 'newton_max_iter': self.newton_max_iter,
                'damping': self.damping, 'min_step': self.min_step,
                'max_halvings': self.max_halvings, 'mode': str(self.mode),
                'lumped_mass': self.lumped_mass}


@dataclass
class Problem:
    """Everything that defines a coupled run apart from the solver settings"""
    mesh: MeridionalMesh
    field: DisplacementField
    materials: MaterialModel
    ports: PortSpec
    omega: float
    bc: ThermalBC = ThermalBC()
    theta0: float = 20.0
    name: str = "scenario"

    @property
    def frequency_hz(self) -> float:
        return self.omega / (2.0 * np.pi)

    def initial_temperature(self) -> np.ndarray:
        return np.full(self.mesh.num_nodes, float(self.theta0))


@dataclass
class CoupledState:
    """Solution at one time level"""
    t: float
    H: np.ndarray
    multipliers: np.ndarray
    theta: np.ndarray
    port_voltages: Dict[int, complex]
    port_currents: Dict[int, complex]
    post: Optional[EMPostFields] = None
    newton_iterations: int = 0
    residual_history: List[float] = field(default_factory=list)

    @property
    def P_diss(self) -> float:
        return self.post.P_diss if self.post is not None else 0.0

    @property
    def port_power(self) -> complex:
        keys = sorted(self.port_voltages)
        return complex_port_power([self.port_voltages[k] for k in keys],
                                  [self.port_currents[k] for k in keys])

    @property
    def theta_max(self) -> float:
        return float(np.max(self.theta))

    @property
    def theta_min(self) -> float:
        return float(np.min(self.theta))

    def to_dict(self) -> Dict:
        data = {'t': self.t, 'P_diss': self.P_diss, 'theta_max': self.theta_max,
                'theta_min': self.theta_min, 'newton_iterations': self.newton_iterations}
        for k in sorted(self.port_voltages):
            data[f'V{k}'] = self.port_voltages[k]
        return data

    def __repr__(self) -> str:
        return (f"CoupledState(t={self.t:g}, theta=[{self.theta_min:.2f}, {self.theta_max:.2f}], "
                f"P_diss={self.P_diss:.4g})")


# ============================================================================
# UNKNOWN LAYOUT
# ============================================================================

@dataclass
class UnknownLayout:
    """Packing of the real Newton vector"""
    free: np.ndarray
    num_nodes: int
    num_multipliers: int

    @property
    def num_free(self) -> int:
        return len(self.free)

    @property
    def em_size(self) -> int:
        return 2 * self.num_free + 2 * self.num_multipliers

    def pack(self, H: np.ndarray, M: np.ndarray, theta: Optional[np.ndarray] = None) -> np.ndarray:
        Hf = H[self.free]
        parts = [Hf.real, Hf.imag, M.real, M.imag]
        if theta is not None:
            parts.append(theta)
        return np.concatenate(parts).astype(float)

    def unpack(self, x: np.ndarray):
        nf, m = self.num_free, self.num_multipliers
        H = np.zeros(self.num_nodes, dtype=complex)
        H[self.free] = x[:nf] + 1j * x[nf:2 * nf]
        M = x[2 * nf:2 * nf + m] + 1j * x[2 * nf + m:2 * nf + 2 * m]
        theta = x[self.em_size:] if len(x) > self.em_size else None
        return H, M, theta


@dataclass
class StepGeometry:
    """Geometric data frozen over one time level"""
    t: float
    volume: VolumeGeometry
    centroid: VolumeGeometry
    boundary: BoundaryGeometry
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray


# ============================================================================
# SOLVER
# ============================================================================

class CoupledSolver:
    """Time integrator for one Problem"""

    def __init__(self, problem: Problem, config: Optional[SolverConfig] = None):
        self.problem = problem
        self.config = config or SolverConfig()
        self.logger = logging.getLogger(f"{__name__}.CoupledSolver")
        if problem.omega < 0:
            raise InvalidArgumentError(f"Angular frequency must be non-negative, got {problem.omega}")
        self.constraints = port_and_multiplier_constraints(problem.mesh, problem.ports)
        self.layout = UnknownLayout(free=self.constraints.free_nodes,
                                    num_nodes=problem.mesh.num_nodes,
                                    num_multipliers=self.constraints.num_multipliers)
        self._volume_rhs = self.constraints.volume_rhs(problem.ports)
        self._constraint_rhs = self.constraints.constraint_rhs(problem.ports)
        pin = np.zeros(self.constraints.num_multipliers)
        pin[self.constraints.pinned_rows] = 1.0
        self._pin = diags(pin).tocsr()

    # ========================================================================
    # GEOMETRY
    # ========================================================================

    def step_geometry(self, t: float) -> StepGeometry:
        p = self.problem
        mode = self.config.mode
        volume = volume_geometry(p.mesh, p.field, t, mode)
        centroid = volume_geometry(p.mesh, p.field, t, mode, rule="centroid")
        edges = p.mesh.edges_with(ThermalTag.CONVRAD)
        if mode is FormulationMode.LAGRANGIAN:
            boundary = lagrangian_boundary_geometry(p.mesh, edges, p.field, t)
            spatial = push_forward(p.mesh, p.field, t).nodes
            nodes, values = dirichlet_data(p.mesh, p.bc, t, spatial)
        else:
            pushed = push_forward(p.mesh, p.field, t)
            boundary = eulerian_boundary_geometry(pushed, edges)
            nodes, values = dirichlet_data(pushed, p.bc, t)
        return StepGeometry(t=t, volume=volume, centroid=centroid, boundary=boundary,
                            dirichlet_nodes=nodes, dirichlet_values=values)

    # ========================================================================
    # RESIDUAL AND JACOBIAN
    # ========================================================================

    def _em_rows(self, sg: StepGeometry, H, M, theta):
        c = self.constraints
        f = c.free_nodes
        tangent = em_tangent(sg.volume, self.problem.materials, theta, H, self.problem.omega)
        r_vol = (tangent.residual + c.B.T @ M - self._volume_rhs)[f]
        r_con = c.B @ H - self._constraint_rhs
        r_con[c.pinned_rows] = M[c.pinned_rows]
        residual = [r_vol.real, r_vol.imag]
        if c.num_multipliers:
            residual += [r_con.real, r_con.imag]
        return np.concatenate(residual), tangent

    def _em_jacobian_blocks(self, tangent) -> List[list]:
        c = self.constraints
        f = c.free_nodes
        d_re = tangent.d_re[f][:, f]
        d_im = tangent.d_im[f][:, f]
        rows = [[d_re.real, d_im.real], [d_re.imag, d_im.imag]]
        if c.num_multipliers:
            Bf = c.B[:, f]
            rows[0] += [Bf.T, None]
            rows[1] += [None, Bf.T]
            rows.append([Bf, None, self._pin, None])
            rows.append([None, Bf, None, self._pin])
        return rows

    def residual_and_jacobian(self, x: np.ndarray, sg: StepGeometry, theta_old: np.ndarray,
                              dt: float):
        """Full coupled residual and Jacobian at the packed state x"""
        p = self.problem
        H, M, theta = self.layout.unpack(x)
        r_em, tangent = self._em_rows(sg, H, M, theta)
        joule = joule_source(sg.volume, p.materials, theta, H)
        thermal = assemble_thermal(sg.volume, sg.boundary, p.materials, theta_old, theta, dt,
                                   joule, p.bc, sg.dirichlet_nodes, sg.dirichlet_values,
                                   lumped=self.config.lumped_mass)
        f = self.constraints.free_nodes
        rows = self._em_jacobian_blocks(tangent)
        d_theta = tangent.d_theta[f]
        rows[0].append(d_theta.real)
        rows[1].append(d_theta.imag)
        for row in rows[2:]:
            row.append(None)
        thermal_row = [thermal.coupling_re[:, f], thermal.coupling_im[:, f]]
        if self.constraints.num_multipliers:
            thermal_row += [None, None]
        rows.append(thermal_row + [thermal.jacobian])
        residual = np.concatenate([r_em, thermal.residual])
        return residual, bmat(rows, format='csc')

    def em_residual_and_jacobian(self, x: np.ndarray, sg: StepGeometry, theta: np.ndarray):
        """Electromagnetic block alone at frozen temperature"""
        H, M, _ = self.layout.unpack(x)
        r_em, tangent = self._em_rows(sg, H, M, theta)
        return r_em, bmat(self._em_jacobian_blocks(tangent), format='csc')

    # ========================================================================
    # STATES
    # ========================================================================

    def _make_state(self, sg: StepGeometry, H, M, theta, newton: NewtonResult) -> CoupledState:
        p = self.problem
        solution = make_solution(self.constraints, p.ports, H, M)
        post = post_fields(sg.centroid, sg.volume, p.materials, theta, H)
        post.port_power = solution.port_power
        return CoupledState(t=sg.t, H=H, multipliers=np.asarray(M), theta=np.array(theta, dtype=float),
                            port_voltages=solution.port_voltages,
                            port_currents=solution.port_currents, post=post,
                            newton_iterations=newton.iterations,
                            residual_history=list(newton.history))

    def _newton(self, residual_fn, jacobian_fn, x0) -> NewtonResult:
        cfg = self.config
        return newton_solve(residual_fn, jacobian_fn, x0, tol=cfg.newton_tol,
                            max_iter=cfg.newton_max_iter, damping=cfg.damping,
                            min_step=cfg.min_step, abs_tol=cfg.newton_abs_tol)

    def initial_state(self) -> CoupledState:
        """Theta = theta0 everywhere and the electromagnetic solve on the t = 0 geometry"""
        theta = self.problem.initial_temperature()
        sg = self.step_geometry(0.0)
        x0 = self.layout.pack(np.zeros(self.layout.num_nodes, dtype=complex),
                              np.zeros(self.layout.num_multipliers, dtype=complex))
        cache = {}

        def evaluate(x):
            key = x.tobytes()
            if key not in cache:
                cache.clear()
                cache[key] = self.em_residual_and_jacobian(x, sg, theta)
            return cache[key]

        result = self._newton(lambda x: evaluate(x)[0], lambda x: evaluate(x)[1], x0)
        H, M, _ = self.layout.unpack(result.x)
        state = self._make_state(sg, H, M, theta, result)
        self.logger.info(f"t = 0: EM solved in {result.iterations} iterations, "
                         f"P_diss = {state.P_diss:.4g} W")
        return state

    def time_step(self, previous: CoupledState, t: float, dt: float) -> CoupledState:
        """
        Advance from ``previous`` to time t by one implicit-Euler step

        Raises:
            NonConvergenceError: Newton failed
            DegenerateMotionError: the motion is invalid at t
        """
        sg = self.step_geometry(t)
        theta_old = previous.theta
        x0 = self.layout.pack(previous.H, previous.multipliers, previous.theta)
        cache = {}

        def evaluate(x):
            key = x.tobytes()
            if key not in cache:
                cache.clear()
                cache[key] = self.residual_and_jacobian(x, sg, theta_old, dt)
            return cache[key]

        result = self._newton(lambda x: evaluate(x)[0], lambda x: evaluate(x)[1], x0)
        H, M, theta = self.layout.unpack(result.x)
        return self._make_state(sg, H, M, theta, result)

    def _advance(self, state: CoupledState, t: float, dt: float, depth: int = 0) -> CoupledState:
        try:
            return self.time_step(state, t, dt)
        except NonConvergenceError as e:
            if depth >= self.config.max_halvings:
                raise
            self.logger.warning(f"Step to t = {t:g} failed ({e}); retrying with dt = {dt / 2:g}")
            middle = self._advance(state, t - dt / 2, dt / 2, depth + 1)
            return self._advance(middle, t, dt / 2, depth + 1)

    def run(self, callback: Optional[Callable[[CoupledState], None]] = None) -> 'SimulationResult':
        """March from t = 0 to t_end; every macro step contributes one state"""
        cfg = self.config
        start = time.time()
        self.logger.info(f"Running '{self.problem.name}' in {cfg.mode} mode: "
                         f"{cfg.num_steps} steps of {cfg.dt:g} s")
        state = self.initial_state()
        states = [state]
        if callback:
            callback(state)
        for step in range(1, cfg.num_steps + 1):
            t = step * cfg.dt
            state = self._advance(state, t, cfg.dt)
            states.append(state)
            volts = ", ".join(f"|V{k}| = {abs(v):.4g}" for k, v in sorted(state.port_voltages.items()))
            self.logger.info(f"t = {t:.4g} s: {state.newton_iterations} it, "
                             f"|R| = {state.residual_history[-1]:.2e}, "
                             f"max theta = {state.theta_max:.2f} C, P = {state.P_diss:.4g} W, {volts}")
            if callback:
                callback(state)
        self.logger.info(f"Run finished in {time.time() - start:.1f} s")
        return SimulationResult(problem=self.problem, config=cfg, states=states)


def time_step(previous: CoupledState, t: float, config: SolverConfig, problem: Problem) -> CoupledState:
    """One coupled step from ``previous`` to time t with step config.dt"""
    return CoupledSolver(problem, config).time_step(previous, t, config.dt)


def run_simulation(config: SolverConfig, problem: Problem,
                   callback: Optional[Callable[[CoupledState], None]] = None) -> 'SimulationResult':
    return CoupledSolver(problem, config).run(callback)


# ============================================================================
# RESULTS
# ============================================================================

def timeseries_frame(states: List[CoupledState]) -> pd.DataFrame:
    """Columns t, V<k>_re, V<k>_im, V<k>_abs per port, P_diss, theta_max, theta_min"""
    ports = sorted({k for s in states for k in s.port_voltages})
    rows = []
    for s in states:
        row = {'t': s.t}
        for k in ports:
            v = s.port_voltages.get(k, 0j)
            row[f'V{k}_re'] = v.real
            row[f'V{k}_im'] = v.imag
            row[f'V{k}_abs'] = abs(v)
        row['P_diss'] = s.P_diss
        row['theta_max'] = s.theta_max
        row['theta_min'] = s.theta_min
        rows.append(row)
    columns = ['t'] + [f'V{k}_{part}' for k in ports for part in ('re', 'im', 'abs')]
    return pd.DataFrame(rows, columns=columns + ['P_diss', 'theta_max', 'theta_min'])


@dataclass
class SimulationResult:
    """States at t = 0 and after every step"""
    problem: Problem
    config: SolverConfig
    states: List[CoupledState]

    def timeseries(self) -> pd.DataFrame:
        return timeseries_frame(self.states)

    def state_at(self, t: float) -> CoupledState:
        return min(self.states, key=lambda s: abs(s.t - t))

    @property
    def final(self) -> CoupledState:
        return self.states[-1]

    def __len__(self) -> int:
        return len(self.states)
