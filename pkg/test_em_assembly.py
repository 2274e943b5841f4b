"""
test_em_assembly.py - Eddy-current system, ports and Joule source
"""

import numpy as np
import pytest
from scipy.sparse.linalg import norm as sparse_norm

from core import oracles
from core.em_assembly import (H_GUARD, Port, PortSpec, assemble_em_eulerian,
                              assemble_em_lagrangian, complex_port_power, em_tangent,
                              joule_source, port_and_multiplier_constraints,
                              reconstruct_current_density, solve_em_nonlinear, solve_em_system)
from core.exceptions import InvalidArgumentError
from core.geometry import FormulationMode, lagrangian_geometry
from core.kinematics import (RadialStretchField, push_forward, upsetting_benchmark_field,
                             zero_field)
from core.materials import MU0, MaterialModel
from core.mesh import EMTag, generate_rectangle_mesh

R, L = 0.02875, 0.165
OMEGA = 2.0 * np.pi * 500.0


@pytest.fixture
def mesh():
    return generate_rectangle_mesh(R, L, 4, 8)


@pytest.fixture
def linear_material():
    return MaterialModel(constant_sigma=4.5e6, constant_mu=200 * MU0)


@pytest.fixture
def current_drive():
    return PortSpec((Port.current(1, 35000.0),))


def uniform(mesh, value=20.0):
    return np.full(mesh.num_nodes, value)


# ============================================================================
# PORTS AND CONSTRAINTS
# ============================================================================

def test_constraint_layout(mesh, current_drive):
    layout = port_and_multiplier_constraints(mesh, current_drive)
    assert layout.insulated_edges == 8
    assert layout.current_ports == [1]
    assert layout.num_multipliers == 9
    assert len(layout.free_nodes) == mesh.num_nodes - len(mesh.axis_nodes())
    assert layout.multiplier_labels()[-1] == "V1"
    rows = np.asarray(layout.B.sum(axis=1)).ravel()
    assert np.allclose(rows, 0.0)


def test_port_spec_validation(mesh):
    with pytest.raises(InvalidArgumentError):
        PortSpec((Port.current(2, 1.0),)).validate(mesh)
    with pytest.raises(InvalidArgumentError):
        PortSpec((Port.current(1, 1.0), Port.voltage(1, 1.0)))
    with pytest.raises(InvalidArgumentError):
        PortSpec(()).validate(mesh)


def test_complex_port_power():
    assert complex_port_power([2 + 1j], [3.0]) == pytest.approx(3.0 + 1.5j)
    with pytest.raises(InvalidArgumentError):
        complex_port_power([1.0, 2.0], [1.0])


# ============================================================================
# SOLVES
# ============================================================================

def test_boundary_ampere_invariant(mesh, linear_material, current_drive):
    system = assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material, uniform(mesh),
                                    current_drive, OMEGA)
    solution = solve_em_system(system)
    insulated = mesh.nodes_with(EMTag.insulated())
    assert np.allclose(solution.H[insulated], 35000.0 / (2.0 * np.pi), rtol=1e-9, atol=0.0)
    assert np.all(solution.H[mesh.axis_nodes()] == 0.0)
    assert solution.port_currents[1] == 35000.0


def test_dc_voltage():
    mesh = generate_rectangle_mesh(R, L, 16, 32)
    sigma = float(MaterialModel().sigma(20.0))
    mat = MaterialModel(constant_sigma=sigma, constant_mu=MU0)
    ports = PortSpec((Port.current(1, 35000.0),))
    solution = solve_em_nonlinear(mesh, zero_field(), 0.0, FormulationMode.LAGRANGIAN, mat,
                                  uniform(mesh), ports, 2.0 * np.pi * 1e-3)
    expected = oracles.dc_voltage(35000.0, L, R, sigma)
    V = solution.port_voltages[1]
    assert V.real == pytest.approx(expected, rel=5e-3)
    assert abs(V.imag) < 1e-3 * expected


def test_power_identity(mesh, linear_material, current_drive):
    theta = uniform(mesh)
    system = assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material, theta,
                                    current_drive, OMEGA)
    solution = solve_em_system(system)
    post = reconstruct_current_density(mesh, zero_field(), 0.0, FormulationMode.LAGRANGIAN,
                                       linear_material, theta, solution.H)
    assert solution.port_power.real == pytest.approx(post.P_diss, rel=1e-9)
    assert solution.port_power.imag > 0.0
    assert post.J_mod.shape == (mesh.num_triangles,)
    assert np.all(post.Q >= 0.0)


def test_voltage_drive_recovers_current(mesh, linear_material, current_drive):
    theta = uniform(mesh)
    driven = solve_em_system(assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material,
                                                    theta, current_drive, OMEGA))
    V = driven.port_voltages[1]
    by_voltage = PortSpec((Port.voltage(1, V),))
    solution = solve_em_system(assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material,
                                                      theta, by_voltage, OMEGA))
    assert solution.port_currents[1] == pytest.approx(35000.0, rel=1e-8)
    assert np.allclose(solution.H, driven.H, rtol=1e-8, atol=1e-8)


def test_zero_current_gives_zero_field(mesh, linear_material):
    ports = PortSpec((Port.current(1, 0.0),))
    solution = solve_em_system(assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material,
                                                      uniform(mesh), ports, OMEGA))
    assert np.all(solution.H == 0.0)
    assert solution.port_voltages[1] == 0.0


def test_negative_frequency_rejected(mesh, linear_material, current_drive):
    with pytest.raises(InvalidArgumentError):
        assemble_em_lagrangian(mesh, zero_field(), 0.0, linear_material, uniform(mesh),
                               current_drive, -1.0)


# ============================================================================
# LAGRANGIAN / EULERIAN AGREEMENT
# ============================================================================

def test_zero_displacement_systems_identical(mesh, current_drive):
    rng = np.random.default_rng(7)
    mat = MaterialModel()
    theta = rng.uniform(20.0, 700.0, mesh.num_nodes)
    H = rng.uniform(0.0, 50.0, mesh.num_nodes) * (1 + 0.5j)
    lag = assemble_em_lagrangian(mesh, zero_field(), 0.0, mat, theta, current_drive, OMEGA, H)
    eul = assemble_em_eulerian(mesh, mat, theta, current_drive, OMEGA, H)
    assert sparse_norm(lag.A - eul.A) <= 1e-13 * sparse_norm(lag.A)
    h_lag = solve_em_system(lag).H
    h_eul = solve_em_system(eul).H
    assert np.linalg.norm(h_lag - h_eul) <= 1e-12 * np.linalg.norm(h_lag)


def test_radial_stretch_pull_back(mesh, linear_material, current_drive):
    field = RadialStretchField(0.25)
    theta = uniform(mesh)
    lag = assemble_em_lagrangian(mesh, field, 0.0, linear_material, theta, current_drive, OMEGA)
    eul = assemble_em_eulerian(push_forward(mesh, field, 0.0), linear_material, theta,
                               current_drive, OMEGA)
    assert sparse_norm(lag.A - eul.A) <= 1e-10 * sparse_norm(lag.A)


def test_system_matrix_is_complex_symmetric(mesh, current_drive):
    rng = np.random.default_rng(11)
    mat = MaterialModel()
    theta = rng.uniform(20.0, 900.0, mesh.num_nodes)
    H = rng.uniform(0.0, 2000.0, mesh.num_nodes) * np.exp(1j * rng.uniform(0.0, 1.0, mesh.num_nodes))
    systems = [
        assemble_em_lagrangian(mesh, upsetting_benchmark_field(), 0.0, mat, theta,
                               current_drive, OMEGA, H),
        assemble_em_eulerian(push_forward(mesh, RadialStretchField(0.25), 0.0), mat, theta,
                             current_drive, OMEGA, H),
    ]
    for system in systems:
        # complex symmetric, not Hermitian
        assert sparse_norm(system.A - system.A.T) <= 1e-13 * sparse_norm(system.A)
        assert sparse_norm(system.A - system.A.conj().T) > 1e-3 * sparse_norm(system.A)
        saddle = system.saddle_matrix()
        assert sparse_norm(saddle - saddle.T) <= 1e-13 * sparse_norm(saddle)


# ============================================================================
# DERIVATIVES
# ============================================================================

def test_tangent_matches_finite_differences(mesh):
    rng = np.random.default_rng(3)
    mat = MaterialModel()
    geom = lagrangian_geometry(mesh, zero_field(), 0.0)
    free = np.ones(mesh.num_nodes, dtype=bool)
    free[mesh.axis_nodes()] = False
    H = np.where(free, rng.uniform(50.0, 150.0, mesh.num_nodes)
                 + 1j * rng.uniform(-50.0, 50.0, mesh.num_nodes), 0.0)
    theta = rng.uniform(100.0, 600.0, mesh.num_nodes)
    tangent = em_tangent(geom, mat, theta, H, OMEGA)

    def residual(H_, theta_):
        return em_tangent(geom, mat, theta_, H_, OMEGA).residual

    d = np.where(free, rng.standard_normal(mesh.num_nodes), 0.0)
    for exact, shift in ((tangent.d_re @ d, d), (tangent.d_im @ d, 1j * d)):
        eps = 1e-6 * np.linalg.norm(H) / np.linalg.norm(d)
        fd = (residual(H + eps * shift, theta) - residual(H - eps * shift, theta)) / (2 * eps)
        assert np.linalg.norm(fd - exact) <= 1e-5 * np.linalg.norm(exact)

    dt = rng.standard_normal(mesh.num_nodes)
    eps = 1e-4
    fd = (residual(H, theta + eps * dt) - residual(H, theta - eps * dt)) / (2 * eps)
    exact = tangent.d_theta @ dt
    assert np.linalg.norm(fd - exact) <= 1e-5 * np.linalg.norm(exact)


def test_joule_source_derivatives(mesh):
    rng = np.random.default_rng(11)
    mat = MaterialModel()
    geom = lagrangian_geometry(mesh, zero_field(), 0.0)
    H = rng.uniform(0.0, 100.0, mesh.num_nodes) + 1j * rng.uniform(0.0, 100.0, mesh.num_nodes)
    theta = rng.uniform(50.0, 900.0, mesh.num_nodes)
    source = joule_source(geom, mat, theta, H)
    e, q, a = 5, 1, 2
    node = mesh.triangles[e, a]
    for derivative, step in ((source.dQ_dre, 1.0), (source.dQ_dim, 1j)):
        eps = 1e-4
        Hp, Hm = H.copy(), H.copy()
        Hp[node] += eps * step
        Hm[node] -= eps * step
        fd = (joule_source(geom, mat, theta, Hp, False).Q[e, q]
              - joule_source(geom, mat, theta, Hm, False).Q[e, q]) / (2 * eps)
        assert derivative[e, q, a] == pytest.approx(fd, rel=1e-6, abs=1e-9 * source.Q[e, q])
    tp, tm = theta.copy(), theta.copy()
    tp[node] += 1e-3
    tm[node] -= 1e-3
    fd = (joule_source(geom, mat, tp, H, False).Q[e, q]
          - joule_source(geom, mat, tm, H, False).Q[e, q]) / 2e-3
    assert source.dQ_dtheta[e, q, a] == pytest.approx(fd, rel=1e-5)


def test_guard_drops_field_derivative_at_zero(mesh):
    mat = MaterialModel()
    geom = lagrangian_geometry(mesh, zero_field(), 0.0)
    H = np.zeros(mesh.num_nodes, dtype=complex)
    tangent = em_tangent(geom, mat, uniform(mesh), H, OMEGA)
    assert np.all(np.isfinite(tangent.d_re.data))
    assert H_GUARD == 1e-12
