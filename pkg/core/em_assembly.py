"""
Electromagnetic Assembly - Time-Harmonic Eddy Currents with Electric Ports
===========================================================================

Discretizes the azimuthal eddy-current problem for the r-weighted field
H~ = r H_theta with P1 elements, in the Lagrangian form on the reference
mesh or the Eulerian form on the moved mesh (both through
``core.geometry.VolumeGeometry``).

Unknowns: nodal H~ (complex, A), one multiplier per insulated boundary edge
(complex, V) and one voltage per current-driven port (complex, V). Axis
nodes carry H~ = 0 and are eliminated.

Sign conventions:
- constraint row of an edge run: sum over its edges of H~(b) - H~(a)
- current port k: row * H~ = -I_k / (2 pi), multiplier = V_k
- voltage port k: contributes -V_k * row^T to the right-hand side
- recovered port current: I_k = -2 pi * row * H~
so that S = 1/2 sum V_k conj(I_k) has Re S equal to the Joule power.

Features:
- Complex-symmetric sparse assembly (scipy.sparse)
- Newton tangent blocks w.r.t. Re H~, Im H~ and temperature
- Joule source with derivatives for the thermal coupling
- Post-processed |J|, Joule density, dissipated power and port power

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.sparse import bmat, csr_matrix, diags
from scipy.sparse.linalg import splu

from .exceptions import DegenerateMotionError, InvalidArgumentError, NonConvergenceError
from .geometry import (FormulationMode, VolumeGeometry, eulerian_geometry, lagrangian_geometry,
                       scatter_matrix, volume_geometry)
from .kinematics import DisplacementField
from .materials import MaterialModel
from .mesh import EMTag, MeridionalMesh, boundary_runs

logger = logging.getLogger(__name__)

H_GUARD = 1e-12


# ============================================================================
# PORTS
# ============================================================================

class DriveKind(Enum):
    """How an electric port is driven"""
    CURRENT = "current"
    VOLTAGE = "voltage"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Port:
    """Electric port k with a complex current (A) or voltage (V) amplitude"""
    index: int
    drive: DriveKind
    amplitude: complex

    @classmethod
    def current(cls, index: int, I: complex) -> 'Port':
        return cls(index, DriveKind.CURRENT, complex(I))

    @classmethod
    def voltage(cls, index: int, V: complex) -> 'Port':
        return cls(index, DriveKind.VOLTAGE, complex(V))

    def to_dict(self) -> Dict:
        return {'k': self.index, 'drive': str(self.drive),
                'amplitude_re': self.amplitude.real, 'amplitude_im': self.amplitude.imag}


@dataclass(frozen=True)
class PortSpec:
    """Drives of all ports; the PortE edges are the grounded port (V = 0)"""
    ports: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'ports', tuple(sorted(self.ports, key=lambda p: p.index)))
        indices = [p.index for p in self.ports]
        if len(set(indices)) != len(indices):
            raise InvalidArgumentError(f"Port indices must be unique, got {indices}")

    @property
    def current_ports(self) -> List[Port]:
        return [p for p in self.ports if p.drive is DriveKind.CURRENT]

    @property
    def voltage_ports(self) -> List[Port]:
        return [p for p in self.ports if p.drive is DriveKind.VOLTAGE]

    def get(self, k: int) -> Port:
        for p in self.ports:
            if p.index == k:
                return p
        raise KeyError(k)

    def scaled(self, factor: float) -> 'PortSpec':
        return PortSpec(tuple(Port(p.index, p.drive, p.amplitude * factor) for p in self.ports))

    def validate(self, mesh: MeridionalMesh) -> None:
        """
        Each mesh port has exactly one drive and the potential is fixed somewhere

        Raises:
            InvalidArgumentError: missing or extra drives, or no gauge
        """
        mesh_ports = set(mesh.port_indices())
        given = {p.index for p in self.ports}
        if mesh_ports != given:
            raise InvalidArgumentError(
                f"Port drives {sorted(given)} do not match mesh ports {sorted(mesh_ports)}")
        has_ground = bool(mesh.edges_with(EMTag.port_e()))
        if not has_ground and not self.voltage_ports:
            raise InvalidArgumentError("Need a PortE boundary or a voltage-driven port to fix the potential")

    def to_dict(self) -> List[Dict]:
        return [p.to_dict() for p in self.ports]


# ============================================================================
# CONSTRAINTS
# ============================================================================

@dataclass
class ConstraintLayout:
    """
    Multiplier rows acting on nodal H~

    Rows are the insulated edges (in mesh order) followed by the
    current-driven ports (ascending k).
    """
    B: csr_matrix                        # (m, n) multiplier rows
    insulated_edges: int
    current_ports: List[int]
    port_rows: Dict[int, np.ndarray]     # every port k (current and voltage) -> dense row
    axis_nodes: np.ndarray
    free_nodes: np.ndarray
    pinned_rows: np.ndarray              # multiplier rows with no free column
    num_nodes: int

    @property
    def num_multipliers(self) -> int:
        return self.B.shape[0]

    def constraint_rhs(self, ports: PortSpec) -> np.ndarray:
        rhs = np.zeros(self.num_multipliers, dtype=complex)
        for i, k in enumerate(self.current_ports):
            rhs[self.insulated_edges + i] = -ports.get(k).amplitude / (2.0 * np.pi)
        rhs[self.pinned_rows] = 0.0
        return rhs

    def volume_rhs(self, ports: PortSpec) -> np.ndarray:
        rhs = np.zeros(self.num_nodes, dtype=complex)
        for p in ports.voltage_ports:
            rhs -= p.amplitude * self.port_rows[p.index]
        return rhs

    def port_currents(self, H: np.ndarray) -> Dict[int, complex]:
        return {k: complex(-2.0 * np.pi * (row @ H)) for k, row in self.port_rows.items()}

    def multiplier_labels(self) -> List[str]:
        return ([f"edge{i}" for i in range(self.insulated_edges)]
                + [f"V{k}" for k in self.current_ports])


def _run_row(runs, n: int) -> np.ndarray:
    row = np.zeros(n)
    for run in runs:
        for e in run:
            row[e.b] += 1.0
            row[e.a] -= 1.0
    return row


def port_and_multiplier_constraints(mesh: MeridionalMesh, ports: PortSpec) -> ConstraintLayout:
    """
    Constraint rows for insulated edges and current-driven ports

    Raises:
        MeshTaggingError: branching insulated runs or disconnected ports
        InvalidArgumentError: drives inconsistent with the mesh ports
    """
    ports.validate(mesh)
    n = mesh.num_nodes
    insulated = EMTag.insulated()
    # orientation and branching check
    boundary_runs(mesh, insulated)
    edges = mesh.edges_with(insulated)

    rows, cols, vals = [], [], []
    for i, e in enumerate(edges):
        rows += [i, i]
        cols += [e.b, e.a]
        vals += [1.0, -1.0]

    port_rows = {}
    for k in mesh.port_indices():
        runs = boundary_runs(mesh, EMTag.port_j(k))
        port_rows[k] = _run_row(runs, n)
    boundary_runs(mesh, EMTag.port_e())

    current = [p.index for p in ports.current_ports]
    for j, k in enumerate(current):
        nz = np.nonzero(port_rows[k])[0]
        rows += [len(edges) + j] * len(nz)
        cols += nz.tolist()
        vals += port_rows[k][nz].tolist()

    m = len(edges) + len(current)
    B = csr_matrix((vals, (rows, cols)), shape=(m, n))

    axis = mesh.axis_nodes()
    free_mask = np.ones(n, dtype=bool)
    free_mask[axis] = False
    free = np.nonzero(free_mask)[0]
    pinned = np.nonzero(np.asarray(abs(B[:, free]).sum(axis=1)).ravel() == 0.0)[0]
    if len(pinned):
        logger.debug(f"{len(pinned)} multiplier rows act only on axis nodes and are pinned to 0")

    return ConstraintLayout(B=B, insulated_edges=len(edges), current_ports=current,
                            port_rows=port_rows, axis_nodes=axis, free_nodes=free,
                            pinned_rows=pinned, num_nodes=n)


# ============================================================================
# SYSTEM
# ============================================================================

@dataclass
class EMSolution:
    """Solved nodal field, multipliers and port quantities"""
    H: np.ndarray
    multipliers: np.ndarray
    port_voltages: Dict[int, complex]
    port_currents: Dict[int, complex]

    @property
    def port_power(self) -> complex:
        keys = sorted(self.port_voltages)
        return complex_port_power([self.port_voltages[k] for k in keys],
                                  [self.port_currents[k] for k in keys])


@dataclass
class EMSystem:
    """
    Assembled complex system

    Attributes:
        A: (n, n) volume matrix with mu frozen at the linearization point
        constraints: multiplier rows and Dirichlet bookkeeping
        rhs: (n,) volume right-hand side from voltage-driven ports
        constraint_rhs: (m,) right-hand side of the multiplier rows
    """
    A: csr_matrix
    constraints: ConstraintLayout
    ports: PortSpec
    rhs: np.ndarray
    constraint_rhs: np.ndarray

    def saddle_matrix(self) -> csr_matrix:
        """[[A_ff, B_f^T], [B_f, P]] on free nodes; P pins empty multiplier rows"""
        c = self.constraints
        free = c.free_nodes
        A_ff = self.A[free][:, free]
        if c.num_multipliers == 0:
            return A_ff.tocsc()
        B_f = c.B[:, free]
        pin = np.zeros(c.num_multipliers)
        pin[c.pinned_rows] = 1.0
        return bmat([[A_ff, B_f.T], [B_f, diags(pin).astype(complex)]], format='csc')

    def saddle_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs[self.constraints.free_nodes], self.constraint_rhs])

    def residual(self, H: np.ndarray, multipliers: np.ndarray) -> np.ndarray:
        """Stacked residual of the volume and constraint equations (free rows only)"""
        c = self.constraints
        r_vol = self.A @ H + c.B.T @ multipliers - self.rhs
        r_con = c.B @ H - self.constraint_rhs
        r_con[c.pinned_rows] = multipliers[c.pinned_rows]
        return np.concatenate([r_vol[c.free_nodes], r_con])

    def expand(self, x: np.ndarray) -> EMSolution:
        c = self.constraints
        H = np.zeros(c.num_nodes, dtype=complex)
        H[c.free_nodes] = x[:len(c.free_nodes)]
        multipliers = x[len(c.free_nodes):]
        return make_solution(c, self.ports, H, multipliers)


def make_solution(constraints: ConstraintLayout, ports: PortSpec, H: np.ndarray,
                  multipliers: np.ndarray) -> EMSolution:
    """Collect port voltages and currents from a solved field"""
    voltages, currents = {}, {}
    recovered = constraints.port_currents(H)
    for i, k in enumerate(constraints.current_ports):
        voltages[k] = complex(multipliers[constraints.insulated_edges + i])
        currents[k] = ports.get(k).amplitude
    for p in ports.voltage_ports:
        voltages[p.index] = p.amplitude
        currents[p.index] = recovered[p.index]
    return EMSolution(H=H, multipliers=np.asarray(multipliers), port_voltages=voltages,
                      port_currents=currents)


# ============================================================================
# VOLUME KERNELS
# ============================================================================

def _point_values(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray, H: np.ndarray):
    theta_q = geom.interpolate(theta)
    H_q = geom.interpolate(H)
    mu, dmu_dh, dmu_dt = mat.mu_derivatives(np.abs(H_q) / geom.radius, theta_q)
    return theta_q, H_q, mu, dmu_dh, dmu_dt


def _stiffness_elements(geom: VolumeGeometry, sigma_q: np.ndarray) -> np.ndarray:
    C = geom.curl_vectors()
    s = geom.weights / (sigma_q * geom.radius * geom.jac2)
    return np.einsum('eq,eqai,eqbi->eab', s, C, C)


def _mass_elements(geom: VolumeGeometry, coef: np.ndarray) -> np.ndarray:
    return np.einsum('eq,qa,qb->eab', coef, geom.phi, geom.phi)


def assemble_em(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray, ports: PortSpec,
                omega: float, H_current: Optional[np.ndarray],
                constraints: ConstraintLayout) -> EMSystem:
    """Assemble on precomputed geometry; mu is evaluated at |H~_current| / r"""
    if omega < 0:
        raise InvalidArgumentError(f"Angular frequency must be non-negative, got {omega}")
    n = geom.num_nodes
    H_current = np.zeros(n, dtype=complex) if H_current is None else np.asarray(H_current, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    theta_q, _, mu, _, _ = _point_values(geom, mat, theta, H_current)
    sigma_q = mat.sigma(theta_q)

    local = _stiffness_elements(geom, sigma_q).astype(complex)
    local += _mass_elements(geom, 1j * omega * mu * geom.weights * geom.jac2 / geom.radius)
    A = scatter_matrix(geom.triangles, local, (n, n))
    return EMSystem(A=A, constraints=constraints, ports=ports,
                    rhs=constraints.volume_rhs(ports),
                    constraint_rhs=constraints.constraint_rhs(ports))


def assemble_em_lagrangian(mesh: MeridionalMesh, field: DisplacementField, t: float,
                           mat: MaterialModel, theta: np.ndarray, ports: PortSpec, omega: float,
                           H_current: Optional[np.ndarray] = None) -> EMSystem:
    """
    Lagrangian system on the reference mesh

    Volume terms: i omega mu / (r_m + u_r) det F2 and
    (N grad H~ . N grad G~) / (sigma (r_m + u_r) det F2).

    Raises:
        DegenerateMotionError: det F <= 0 at a quadrature point
    """
    geom = lagrangian_geometry(mesh, field, t)
    constraints = port_and_multiplier_constraints(mesh, ports)
    return assemble_em(geom, mat, theta, ports, omega, H_current, constraints)


def assemble_em_eulerian(pushed_mesh: MeridionalMesh, mat: MaterialModel, theta: np.ndarray,
                         ports: PortSpec, omega: float,
                         H_current: Optional[np.ndarray] = None) -> EMSystem:
    """
    Eulerian system on a mesh whose nodes follow the particles

    Raises:
        DegenerateMotionError: inverted triangle
    """
    if np.any(pushed_mesh.signed_areas() <= 0.0):
        raise DegenerateMotionError("Inverted triangle in the current configuration")
    geom = eulerian_geometry(pushed_mesh)
    constraints = port_and_multiplier_constraints(pushed_mesh, ports)
    return assemble_em(geom, mat, theta, ports, omega, H_current, constraints)


# ============================================================================
# NEWTON TANGENT
# ============================================================================

@dataclass
class EMTangent:
    """Volume residual A(H~) H~ and its derivatives (complex, n x n each)"""
    residual: np.ndarray
    d_re: csr_matrix
    d_im: csr_matrix
    d_theta: csr_matrix


def em_tangent(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray, H: np.ndarray,
               omega: float) -> EMTangent:
    """
    Linearization of the volume residual w.r.t. Re H~, Im H~ and nodal temperature

    The |H| derivative is dropped at points where |H~| < 1e-12 max|H~|.
    """
    n = geom.num_nodes
    H = np.asarray(H, dtype=complex)
    theta = np.asarray(theta, dtype=float)
    theta_q, H_q, mu, dmu_dh, dmu_dt = _point_values(geom, mat, theta, H)
    sigma_q = mat.sigma(theta_q)
    dsigma_q = mat.dsigma(theta_q)

    mass_w = omega * geom.weights * geom.jac2 / geom.radius
    K = _stiffness_elements(geom, sigma_q)

    H_abs = np.abs(H_q)
    scale = np.max(np.abs(H)) if H.size else 0.0
    active = H_abs > H_GUARD * scale if scale > 0 else np.zeros_like(H_abs, dtype=bool)
    safe = np.where(active, H_abs, 1.0)
    slope = np.where(active, H_q * dmu_dh / (safe * geom.radius), 0.0)

    d_re = K + _mass_elements(geom, 1j * mass_w * (mu + slope * H_q.real))
    d_im = 1j * K + _mass_elements(geom, 1j * mass_w * (1j * mu + slope * H_q.imag))

    v = np.einsum('eqij,ej->eqi', geom.N, geom.element_gradient(H))
    C = geom.curl_vectors()
    s = geom.weights / (sigma_q * geom.radius * geom.jac2)
    dot = np.einsum('eqi,eqai->eqa', v, C)
    d_theta = (np.einsum('eq,eqa,qb->eab', s * (-dsigma_q / sigma_q), dot, geom.phi)
               + _mass_elements(geom, 1j * mass_w * H_q * dmu_dt))

    A_local = K.astype(complex) + _mass_elements(geom, 1j * mass_w * mu)
    A = scatter_matrix(geom.triangles, A_local, (n, n))
    return EMTangent(residual=A @ H,
                     d_re=scatter_matrix(geom.triangles, d_re, (n, n)),
                     d_im=scatter_matrix(geom.triangles, d_im, (n, n)),
                     d_theta=scatter_matrix(geom.triangles, d_theta, (n, n)))


# ============================================================================
# JOULE SOURCE
# ============================================================================

@dataclass
class JouleSource:
    """
    Joule density |J|^2 / (2 sigma) at volume quadrature points

    Derivative arrays are (M, Q, 3) w.r.t. the local nodal Re H~, Im H~ and theta.
    """
    Q: np.ndarray
    dQ_dre: Optional[np.ndarray] = None
    dQ_dim: Optional[np.ndarray] = None
    dQ_dtheta: Optional[np.ndarray] = None


def current_density_squared(geom: VolumeGeometry, H: np.ndarray) -> np.ndarray:
    """|J|^2 = |N grad H~|^2 / ((r_m + u_r) det F2)^2 at the quadrature points"""
    v = np.einsum('eqij,ej->eqi', geom.N, geom.element_gradient(np.asarray(H, dtype=complex)))
    return np.sum(np.abs(v) ** 2, axis=-1) / (geom.radius * geom.jac2) ** 2


def joule_source(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray, H: np.ndarray,
                 derivatives: bool = True) -> JouleSource:
    H = np.asarray(H, dtype=complex)
    theta_q = geom.interpolate(np.asarray(theta, dtype=float))
    sigma_q = mat.sigma(theta_q)
    v = np.einsum('eqij,ej->eqi', geom.N, geom.element_gradient(H))
    denom = (geom.radius * geom.jac2) ** 2
    Q = np.sum(np.abs(v) ** 2, axis=-1) / (2.0 * sigma_q * denom)
    if not derivatives:
        return JouleSource(Q=Q)
    C = geom.curl_vectors()
    scale = 1.0 / (sigma_q * denom)
    dQ_dre = np.einsum('eqi,eqai->eqa', v.real, C) * scale[..., None]
    dQ_dim = np.einsum('eqi,eqai->eqa', v.imag, C) * scale[..., None]
    dQ_dtheta = (-mat.dsigma(theta_q) / sigma_q * Q)[..., None] * geom.phi[None, :, :]
    return JouleSource(Q=Q, dQ_dre=dQ_dre, dQ_dim=dQ_dim, dQ_dtheta=dQ_dtheta)


# ============================================================================
# POST-PROCESSING
# ============================================================================

@dataclass
class EMPostFields:
    """
    Per-triangle current density and Joule density plus global powers

    Attributes:
        J_mod: |J| at triangle centroids (A/m^2)
        Q: |J|^2 / (2 sigma) at triangle centroids (W/m^3)
        P_diss: Joule power in the current configuration (W)
        port_power: 1/2 sum V_k conj(I_k) (V A)
    """
    J_mod: np.ndarray
    Q: np.ndarray
    P_diss: float
    port_power: complex = 0j

    def to_dict(self) -> Dict:
        return {'P_diss': self.P_diss, 'port_power_re': self.port_power.real,
                'port_power_im': self.port_power.imag,
                'J_max': float(np.max(self.J_mod)) if self.J_mod.size else 0.0}


def dissipated_power(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray,
                     H: np.ndarray) -> float:
    """2 pi * integral of the Joule density over the current meridional section"""
    Q = joule_source(geom, mat, theta, H, derivatives=False).Q
    return float(2.0 * np.pi * np.sum(Q * geom.measure()))


def post_fields(centroid_geom: VolumeGeometry, quad_geom: VolumeGeometry, mat: MaterialModel,
                theta: np.ndarray, H: np.ndarray) -> EMPostFields:
    J2 = current_density_squared(centroid_geom, H)[:, 0]
    sigma_c = mat.sigma(centroid_geom.interpolate(np.asarray(theta, dtype=float))[:, 0])
    return EMPostFields(J_mod=np.sqrt(J2), Q=J2 / (2.0 * sigma_c),
                        P_diss=dissipated_power(quad_geom, mat, theta, H))


def reconstruct_current_density(mesh: MeridionalMesh, field: DisplacementField, t: float,
                                mode: FormulationMode, mat: MaterialModel, theta: np.ndarray,
                                H: np.ndarray) -> EMPostFields:
    """
    Current density, Joule density and dissipated power from a solved H~

    |J| and Q are evaluated at triangle centroids; P_diss integrates the
    Joule density with the assembly quadrature, which makes it equal to the
    real port power of the discrete solution.
    """
    centroid_geom = volume_geometry(mesh, field, t, mode, rule="centroid")
    quad_geom = volume_geometry(mesh, field, t, mode)
    return post_fields(centroid_geom, quad_geom, mat, theta, H)


def complex_port_power(V: Sequence[complex], I: Sequence[complex]) -> complex:
    """S = 1/2 sum V_k conj(I_k)"""
    V = np.asarray(V, dtype=complex)
    I = np.asarray(I, dtype=complex)
    if V.shape != I.shape:
        raise InvalidArgumentError("Voltage and current lists must have the same length")
    return complex(0.5 * np.sum(V * np.conj(I)))


# ============================================================================
# STAND-ALONE SOLVES
# ============================================================================

def solve_em_system(system: EMSystem) -> EMSolution:
    """Direct sparse solve of the (linearized) saddle-point system"""
    lu = splu(system.saddle_matrix())
    return system.expand(lu.solve(system.saddle_rhs()))


def solve_em_nonlinear(mesh: MeridionalMesh, field: DisplacementField, t: float,
                       mode: FormulationMode, mat: MaterialModel, theta: np.ndarray,
                       ports: PortSpec, omega: float, tol: float = 1e-10,
                       max_iter: int = 50, H0: Optional[np.ndarray] = None) -> EMSolution:
    """
    Fixed-point iteration on mu(|H|) at frozen temperature

    Converges in one pass for a field-independent permeability.

    Raises:
        NonConvergenceError: relative update above ``tol`` after ``max_iter`` passes
    """
    geom = volume_geometry(mesh, field, t, mode)
    constraints = port_and_multiplier_constraints(mesh, ports)
    H = np.zeros(mesh.num_nodes, dtype=complex) if H0 is None else np.asarray(H0, dtype=complex)
    history = []
    for iteration in range(1, max_iter + 1):
        solution = solve_em_system(assemble_em(geom, mat, theta, ports, omega, H, constraints))
        norm = np.linalg.norm(solution.H)
        change = np.linalg.norm(solution.H - H) / norm if norm > 0 else 0.0
        history.append(float(change))
        H = solution.H
        logger.debug(f"EM fixed point {iteration}: relative change {change:.3e}")
        if change <= tol or mat.constant_mu is not None:
            return solution
    raise NonConvergenceError(f"EM fixed point did not converge in {max_iter} iterations",
                              history=history, final_residual=history[-1])
