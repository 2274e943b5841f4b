"""
test_coupled_solver.py - Newton iteration and coupled time marching
"""

import numpy as np
import pytest

from core.coupled_solver import (CoupledSolver, Problem, SolverConfig, newton_solve,
                                 run_simulation, step_count, timeseries_frame)
from core.em_assembly import Port, PortSpec
from core.exceptions import InvalidArgumentError, NonConvergenceError
from core.geometry import FormulationMode, lagrangian_geometry
from core.kinematics import zero_field
from core.materials import MU0, MaterialModel
from core.mesh import generate_rectangle_mesh
from core.thermal_assembly import ThermalBC, heat_content

R, L = 0.02875, 0.165
OMEGA = 2.0 * np.pi * 500.0


def make_problem(nr=3, nz=6, current=35000.0, materials=None, bc=None):
    return Problem(mesh=generate_rectangle_mesh(R, L, nr, nz), field=zero_field(),
                   materials=materials or MaterialModel(),
                   ports=PortSpec((Port.current(1, current),)), omega=OMEGA,
                   bc=bc or ThermalBC(), theta0=20.0, name="test")


@pytest.fixture
def linear_problem():
    mat = MaterialModel(constant_sigma=4.5e6, constant_mu=100 * MU0,
                        constant_k=40.0, constant_cp=460.0)
    return make_problem(materials=mat)


# ============================================================================
# NEWTON
# ============================================================================

def test_newton_finds_root():
    result = newton_solve(lambda x: x ** 2 - 4.0, lambda x: np.diag(2.0 * x), [1.0])
    assert result.x[0] == pytest.approx(2.0, rel=1e-10)
    assert result.iterations < 10
    assert result.history[0] == pytest.approx(3.0)
    assert result.final_residual < 1e-8 * 3.0


def test_newton_without_root_raises():
    with pytest.raises(NonConvergenceError) as info:
        newton_solve(lambda x: x ** 2 + 1.0, lambda x: np.diag(2.0 * x), [0.7], max_iter=5)
    assert info.value.history


def test_newton_rejects_bad_parameters():
    with pytest.raises(InvalidArgumentError):
        newton_solve(lambda x: x, lambda x: np.eye(1), [1.0], damping=1.5)


def test_newton_converged_start():
    result = newton_solve(lambda x: x * 0.0, lambda x: np.eye(1), [3.0])
    assert result.iterations == 0
    assert result.x[0] == 3.0


# ============================================================================
# CONFIGURATION
# ============================================================================

def test_solver_config():
    cfg = SolverConfig(dt=0.25, t_end=1.0, mode="eulerian")
    assert cfg.mode is FormulationMode.EULERIAN
    assert cfg.num_steps == 4
    assert cfg.to_dict()['mode'] == "eulerian"


@pytest.mark.parametrize("kwargs", [{"dt": 0.0}, {"t_end": -1.0}, {"newton_tol": 0.0},
                                    {"newton_max_iter": 0}, {"max_halvings": -1}])
def test_solver_config_rejects(kwargs):
    with pytest.raises(InvalidArgumentError):
        SolverConfig(**kwargs)


@pytest.mark.parametrize("dt, t_end", [(0.3, 1.0), (0.3, 20.0), (0.07, 0.2)])
def test_solver_config_rejects_partial_last_step(dt, t_end):
    with pytest.raises(InvalidArgumentError, match="multiple"):
        SolverConfig(dt=dt, t_end=t_end)


def test_step_count():
    assert step_count(0.3, 0.1) == 3
    assert step_count(20.0, 0.1) == 200
    assert step_count(0.0, 0.1) == 0


def test_negative_frequency_rejected():
    problem = make_problem()
    problem.omega = -1.0
    with pytest.raises(InvalidArgumentError):
        CoupledSolver(problem)


# ============================================================================
# TIME MARCHING
# ============================================================================

def test_zero_current_stays_at_rest():
    result = run_simulation(SolverConfig(dt=0.5, t_end=1.0), make_problem(current=0.0))
    assert len(result) == 3
    for state in result.states:
        assert np.all(state.H == 0.0)
        assert np.all(state.theta == 20.0)
        assert state.P_diss == 0.0
        assert state.port_voltages[1] == 0.0


def test_energy_balance(linear_problem):
    cfg = SolverConfig(dt=0.05, t_end=0.2)
    result = CoupledSolver(linear_problem, cfg).run()
    geom = lagrangian_geometry(linear_problem.mesh, zero_field(), 0.0)
    mat = linear_problem.materials
    for before, after in zip(result.states, result.states[1:]):
        gained = heat_content(geom, mat, after.theta) - heat_content(geom, mat, before.theta)
        assert gained == pytest.approx(cfg.dt * after.P_diss, rel=1e-8)
    assert result.final.theta_max > 20.0
    assert result.final.port_power.real == pytest.approx(result.final.P_diss, rel=1e-8)


def test_coupled_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    problem = make_problem(nr=2, nz=3, bc=ThermalBC(h=20.0, emissivity=0.7))
    solver = CoupledSolver(problem, SolverConfig(dt=0.1, t_end=0.1))
    sg = solver.step_geometry(0.0)
    layout = solver.layout
    H = np.zeros(layout.num_nodes, dtype=complex)
    H[layout.free] = rng.uniform(100.0, 5000.0, layout.num_free) * np.exp(1j * rng.uniform(0, 1, layout.num_free))
    M = rng.uniform(-1.0, 1.0, layout.num_multipliers) * (1 + 1j)
    theta = rng.uniform(100.0, 600.0, layout.num_nodes)
    theta_old = theta - 5.0
    x = layout.pack(H, M, theta)

    residual, jacobian = solver.residual_and_jacobian(x, sg, theta_old, 0.1)
    assert jacobian.shape == (len(x), len(x))
    assert residual.shape == (len(x),)

    d = np.abs(x) * rng.standard_normal(len(x)) + 1e-3
    eps = 1e-6
    plus, _ = solver.residual_and_jacobian(x + eps * d, sg, theta_old, 0.1)
    minus, _ = solver.residual_and_jacobian(x - eps * d, sg, theta_old, 0.1)
    fd = (plus - minus) / (2 * eps)
    exact = jacobian @ d
    assert np.linalg.norm(fd - exact) <= 1e-5 * np.linalg.norm(exact)


def test_non_convergence_is_reported():
    problem = make_problem()
    cfg = SolverConfig(dt=0.1, t_end=0.1, newton_max_iter=1, max_halvings=0)
    with pytest.raises(NonConvergenceError) as info:
        CoupledSolver(problem, cfg).run()
    assert len(info.value.history) == 2


def test_step_halving(linear_problem):
    solver = CoupledSolver(linear_problem, SolverConfig(dt=0.1, t_end=0.1))
    start = solver.initial_state()
    original = solver.time_step
    calls = []

    def flaky(previous, t, dt):
        calls.append(dt)
        if len(calls) == 1:
            raise NonConvergenceError("forced")
        return original(previous, t, dt)

    solver.time_step = flaky
    state = solver._advance(start, 0.1, 0.1)
    assert calls == [0.1, 0.05, 0.05]
    assert state.t == pytest.approx(0.1)


def test_formulations_agree_without_motion():
    problem = make_problem(bc=ThermalBC(h=10.0, emissivity=0.5))
    lag = run_simulation(SolverConfig(dt=0.1, t_end=0.2, mode="lagrangian"), problem)
    eul = run_simulation(SolverConfig(dt=0.1, t_end=0.2, mode="eulerian"), problem)
    assert np.allclose(lag.final.theta, eul.final.theta, rtol=1e-9)
    assert lag.final.port_voltages[1] == pytest.approx(eul.final.port_voltages[1], rel=1e-8)


def test_minimum_temperature_never_drops_under_pure_heating():
    problem = make_problem()
    result = run_simulation(SolverConfig(dt=0.1, t_end=0.5, lumped_mass=True), problem)
    theta_min = result.timeseries()['theta_min'].to_numpy()
    assert theta_min[0] == 20.0
    assert np.all(np.diff(theta_min) >= -1e-10)
    assert result.final.theta_max > theta_min[-1]


@pytest.mark.parametrize("mode", ["lagrangian", "eulerian"])
def test_identical_runs_are_bitwise_equal(mode):
    cfg = SolverConfig(dt=0.1, t_end=0.2, mode=mode)
    first = run_simulation(cfg, make_problem(bc=ThermalBC(h=10.0, emissivity=0.5)))
    second = run_simulation(cfg, make_problem(bc=ThermalBC(h=10.0, emissivity=0.5)))
    for a, b in zip(first.states, second.states):
        assert np.array_equal(a.theta, b.theta)
        assert np.array_equal(a.H, b.H)
        assert a.port_voltages == b.port_voltages


def test_callback_and_timeseries(linear_problem):
    seen = []
    result = run_simulation(SolverConfig(dt=0.1, t_end=0.3), linear_problem, seen.append)
    assert [s.t for s in seen] == pytest.approx([0.0, 0.1, 0.2, 0.3])
    frame = result.timeseries()
    assert list(frame.columns) == ['t', 'V1_re', 'V1_im', 'V1_abs', 'P_diss',
                                   'theta_max', 'theta_min']
    assert len(frame) == 4
    assert frame.equals(timeseries_frame(result.states))
    assert result.state_at(0.19).t == pytest.approx(0.2)
    assert np.all(np.diff(frame['theta_max']) > 0.0)
