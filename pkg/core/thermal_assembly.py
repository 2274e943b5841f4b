"""
Thermal Assembly - Transient Heat Transfer with Joule Source
=============================================================

Implicit-Euler residual and Jacobian of the heat equation on nodal
temperatures, in Lagrangian form (reference mesh) or Eulerian form (moved
mesh). Nodes follow the particles in both modes, so (theta - theta_old)/dt
is the material derivative and no advection term appears.

Features:
- Consistent or lumped heat-capacity term with cp at the Newton iterate
- Temperature-dependent conduction with its derivative
- Convection-radiation boundaries (radiation in Kelvin)
- Dirichlet temperatures on tagged edges
- Joule source and its derivatives w.r.t. the electromagnetic unknowns

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.sparse import csr_matrix, diags

from .em_assembly import JouleSource
from .exceptions import DegenerateMotionError, InvalidArgumentError
from .geometry import (BoundaryGeometry, VolumeGeometry, eulerian_boundary_geometry,
                       eulerian_geometry, lagrangian_boundary_geometry, lagrangian_geometry,
                       scatter_matrix, scatter_vector)
from .kinematics import DisplacementField, push_forward
from .materials import KELVIN_OFFSET, MaterialModel
from .mesh import MeridionalMesh, ThermalTag

logger = logging.getLogger(__name__)

SIGMA_SB = 5.670374419e-8

DirichletValue = Union[float, Callable[[np.ndarray, np.ndarray, float], np.ndarray]]


# ============================================================================
# BOUNDARY CONDITIONS
# ============================================================================

@dataclass(frozen=True)
class ThermalBC:
    """
    Boundary data shared by every edge of a thermal tag

    Attributes:
        h: convection coefficient on ConvRad edges (W/(m^2 K))
        emissivity: in [0, 1]
        theta_conv: convection ambient temperature (C)
        theta_rad: radiation ambient temperature (C)
        dirichlet: temperature on Dirichlet edges, constant or f(r, z, t)
    """
    h: float = 0.0
    emissivity: float = 0.0
    theta_conv: float = 20.0
    theta_rad: float = 20.0
    dirichlet: Optional[DirichletValue] = None

    def __post_init__(self):
        if self.h < 0:
            raise InvalidArgumentError(f"h must be non-negative, got {self.h}")
        if not 0.0 <= self.emissivity <= 1.0:
            raise InvalidArgumentError(f"Emissivity must lie in [0, 1], got {self.emissivity}")

    @property
    def is_insulating(self) -> bool:
        return self.h == 0.0 and self.emissivity == 0.0

    def flux(self, theta) -> np.ndarray:
        """Heat flux into the body h (Tc - T) + sigma eps (Tr^4 - T^4)"""
        theta = np.asarray(theta, dtype=float)
        tk = theta + KELVIN_OFFSET
        trk = self.theta_rad + KELVIN_OFFSET
        return self.h * (self.theta_conv - theta) + SIGMA_SB * self.emissivity * (trk ** 4 - tk ** 4)

    def dflux(self, theta) -> np.ndarray:
        tk = np.asarray(theta, dtype=float) + KELVIN_OFFSET
        return -self.h - 4.0 * SIGMA_SB * self.emissivity * tk ** 3

    def dirichlet_values(self, points: np.ndarray, t: float) -> np.ndarray:
        if self.dirichlet is None:
            raise InvalidArgumentError("Mesh has Dirichlet edges but no Dirichlet temperature is set")
        if callable(self.dirichlet):
            return np.asarray(self.dirichlet(points[:, 0], points[:, 1], t), dtype=float) * np.ones(len(points))
        return np.full(len(points), float(self.dirichlet))

    def to_dict(self) -> dict:
        return {'h': self.h, 'emissivity': self.emissivity, 'theta_conv': self.theta_conv,
                'theta_rad': self.theta_rad,
                'dirichlet': None if callable(self.dirichlet) else self.dirichlet}


# ============================================================================
# SYSTEM
# ============================================================================

@dataclass
class ThermalSystem:
    """
    Residual and Jacobian over nodal temperatures

    ``coupling_re``/``coupling_im`` are the derivatives of the residual with
    respect to Re H~ and Im H~ through the Joule source. Dirichlet rows are
    replaced by theta_i - theta_D,i with an identity Jacobian row.
    """
    residual: np.ndarray
    jacobian: csr_matrix
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    coupling_re: Optional[csr_matrix] = None
    coupling_im: Optional[csr_matrix] = None


def _as_point_source(source, geom: VolumeGeometry) -> JouleSource:
    if source is None:
        return JouleSource(Q=np.zeros((geom.num_elements, geom.num_points)))
    if isinstance(source, JouleSource):
        return source
    Q = np.asarray(source, dtype=float)
    if Q.ndim == 0:
        Q = np.full(geom.num_elements, float(Q))
    if Q.ndim == 1:
        Q = np.repeat(Q[:, None], geom.num_points, axis=1)
    return JouleSource(Q=Q)


def _zero_rows(matrix: csr_matrix, rows: np.ndarray) -> csr_matrix:
    keep = np.ones(matrix.shape[0])
    keep[rows] = 0.0
    return (diags(keep) @ matrix).tocsr()


def assemble_thermal(geom: VolumeGeometry, boundary: BoundaryGeometry, mat: MaterialModel,
                     theta_old: np.ndarray, theta: np.ndarray, dt: float,
                     source, bc: ThermalBC, dirichlet_nodes: np.ndarray,
                     dirichlet_values: np.ndarray, lumped: bool = False) -> ThermalSystem:
    """
    Implicit-Euler residual R(theta) and Jacobian on precomputed geometry

    Args:
        source: None, a constant, per-triangle or per-point Joule density (W/m^3),
            or a JouleSource carrying derivatives
    """
    if not dt > 0:
        raise InvalidArgumentError(f"Time step must be positive, got {dt}")
    n = geom.num_nodes
    theta = np.asarray(theta, dtype=float)
    theta_old = np.asarray(theta_old, dtype=float)
    tri = geom.triangles
    phi = geom.phi

    # capacity
    if lumped:
        cap_w = scatter_vector(tri, np.einsum('eq,qa->ea', geom.capacity * geom.weights, phi), n)
        cp_n = mat.cp(theta)
        residual = mat.rho0 * cp_n * (theta - theta_old) / dt * cap_w
        jac = diags(mat.rho0 / dt * cap_w * (mat.dcp(theta) * (theta - theta_old) + cp_n)).tocsr()
    else:
        t_q = geom.interpolate(theta)
        rate_q = (t_q - geom.interpolate(theta_old)) / dt
        cw = mat.rho0 * geom.capacity * geom.weights
        residual = scatter_vector(tri, np.einsum('eq,qa->ea', cw * mat.cp(t_q) * rate_q, phi), n)
        coef = cw * (mat.dcp(t_q) * rate_q + mat.cp(t_q) / dt)
        jac = scatter_matrix(tri, np.einsum('eq,qa,qb->eab', coef, phi, phi), (n, n))

    # conduction
    t_q = geom.interpolate(theta)
    vw = geom.weights * geom.radius * geom.jac2
    grads = geom.mapped_gradients()
    g_theta = np.einsum('eqij,ej->eqi', geom.G, geom.element_gradient(theta))
    flux_dot = np.einsum('eqi,eqai->eqa', g_theta, grads)
    k_q = mat.k(t_q)
    residual = residual + scatter_vector(tri, np.einsum('eq,eqa->ea', k_q * vw, flux_dot), n)
    local = np.einsum('eq,eqai,eqbi->eab', k_q * vw, grads, grads)
    local += np.einsum('eq,eqa,qb->eab', mat.dk(t_q) * vw, flux_dot, phi)
    jac = jac + scatter_matrix(tri, local, (n, n))

    # Joule source
    joule = _as_point_source(source, geom)
    residual = residual - scatter_vector(tri, np.einsum('eq,qa->ea', joule.Q * vw, phi), n)
    coupling_re = coupling_im = None
    if joule.dQ_dtheta is not None:
        jac = jac - scatter_matrix(tri, np.einsum('eq,qa,eqb->eab', vw, phi, joule.dQ_dtheta), (n, n))
        coupling_re = -scatter_matrix(tri, np.einsum('eq,qa,eqb->eab', vw, phi, joule.dQ_dre), (n, n))
        coupling_im = -scatter_matrix(tri, np.einsum('eq,qa,eqb->eab', vw, phi, joule.dQ_dim), (n, n))

    # convection-radiation
    if boundary.num_edges and not bc.is_insulating:
        tb = boundary.interpolate(theta)
        bw = boundary.weights
        residual = residual - scatter_vector(
            boundary.nodes, np.einsum('kp,pa->ka', bc.flux(tb) * bw, boundary.phi), n)
        jac = jac - scatter_matrix(
            boundary.nodes,
            np.einsum('kp,pa,pb->kab', bc.dflux(tb) * bw, boundary.phi, boundary.phi), (n, n))

    jac = csr_matrix(jac)
    if len(dirichlet_nodes):
        residual[dirichlet_nodes] = theta[dirichlet_nodes] - dirichlet_values
        jac = _zero_rows(jac, dirichlet_nodes)
        jac = (jac + csr_matrix((np.ones(len(dirichlet_nodes)), (dirichlet_nodes, dirichlet_nodes)),
                                shape=(n, n))).tocsr()
        if coupling_re is not None:
            coupling_re = _zero_rows(coupling_re, dirichlet_nodes)
            coupling_im = _zero_rows(coupling_im, dirichlet_nodes)

    return ThermalSystem(residual=residual, jacobian=jac, dirichlet_nodes=dirichlet_nodes,
                         dirichlet_values=dirichlet_values, coupling_re=coupling_re,
                         coupling_im=coupling_im)


def dirichlet_data(mesh: MeridionalMesh, bc: ThermalBC, t: float,
                   points: Optional[np.ndarray] = None):
    """
    Nodes on Dirichlet edges and their prescribed temperatures

    Args:
        points: spatial (r, z) of every node; the mesh nodes when omitted.
            Lagrangian callers pass the pushed-forward positions so that a
            callable f(r, z, t) always sees current coordinates.
    """
    nodes = mesh.nodes_with(ThermalTag.DIRICHLET)
    if not len(nodes):
        return nodes, np.zeros(0)
    coords = mesh.nodes if points is None else np.asarray(points, dtype=float)
    return nodes, bc.dirichlet_values(coords[nodes], t)


def assemble_thermal_lagrangian(mesh: MeridionalMesh, field: DisplacementField, t: float,
                                mat: MaterialModel, theta_old: np.ndarray, theta: np.ndarray,
                                dt: float, source, bc: ThermalBC,
                                lumped: bool = False) -> ThermalSystem:
    """
    Thermal system on the reference mesh at time t

    Capacity weight rho0 r_m; conduction with F2^{-T} gradients weighted by
    (r_m + u_r) det F2; boundary measure |F2^{-T} n| det F2 (r_m + u_r) dl_m.
    """
    geom = lagrangian_geometry(mesh, field, t)
    boundary = lagrangian_boundary_geometry(mesh, mesh.edges_with(ThermalTag.CONVRAD), field, t)
    nodes, values = dirichlet_data(mesh, bc, t, push_forward(mesh, field, t).nodes)
    return assemble_thermal(geom, boundary, mat, theta_old, theta, dt, source, bc,
                            nodes, values, lumped)


def assemble_thermal_eulerian(pushed_mesh: MeridionalMesh, mat: MaterialModel,
                              theta_old: np.ndarray, theta: np.ndarray, dt: float, source,
                              bc: ThermalBC, t: float = 0.0,
                              density_ratio: Optional[np.ndarray] = None,
                              lumped: bool = False) -> ThermalSystem:
    """
    Thermal system on the moved mesh; spatial density rho0 / det F per triangle

    Args:
        density_ratio: per-triangle det F (ones for an undeformed body)
    """
    if np.any(pushed_mesh.signed_areas() <= 0.0):
        raise DegenerateMotionError("Inverted triangle in the current configuration", t=t)
    geom = eulerian_geometry(pushed_mesh, density_ratio)
    boundary = eulerian_boundary_geometry(pushed_mesh, pushed_mesh.edges_with(ThermalTag.CONVRAD))
    nodes, values = dirichlet_data(pushed_mesh, bc, t)
    return assemble_thermal(geom, boundary, mat, theta_old, theta, dt, source, bc,
                            nodes, values, lumped)


def heat_content(geom: VolumeGeometry, mat: MaterialModel, theta: np.ndarray,
                 frozen_cp: Optional[float] = None) -> float:
    """
    Stored sensible heat 2 pi * integral of rho0 e(theta) over the body (J relative to 0 C)

    e is the integral of cp from 0 to theta; with frozen_cp it is frozen_cp * theta.
    """
    t_q = geom.interpolate(np.asarray(theta, dtype=float))
    e = mat.enthalpy(t_q) if frozen_cp is None else frozen_cp * t_q
    return float(2.0 * np.pi * np.sum(mat.rho0 * e * geom.capacity * geom.weights))
