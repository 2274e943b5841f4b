"""
Quadrature Geometry - Geometric Factors for Both Formulations
==============================================================

Precomputes, per triangle and quadrature point, every geometric factor the
weak forms need, so the electromagnetic and thermal assembly run the same
kernels in Lagrangian and Eulerian mode:

    quantity        Lagrangian (reference mesh)      Eulerian (moved mesh)
    radius          r_m + u_r                         r
    jac2            det F2                            1
    N               pull-back tensor                  [[0, -1], [1, 0]]
    G               F2^{-T}                           I
    capacity        r_m                               r / det F

Volume integrals use the symmetric 3-point interior rule (degree 2), which
keeps every point off the axis. Boundary integrals use 2-point Gauss.

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .kinematics import DisplacementField, eval_kinematics, push_forward
from .mesh import BoundaryEdge, MeridionalMesh, edge_frames

logger = logging.getLogger(__name__)


class FormulationMode(Enum):
    """Configuration on which the weak forms are posed"""
    LAGRANGIAN = "lagrangian"
    EULERIAN = "eulerian"

    def __str__(self) -> str:
        return self.value


INTERIOR_RULE = np.array([[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                          [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                          [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]])
INTERIOR_WEIGHTS = np.full(3, 1.0 / 3.0)

CENTROID_RULE = np.array([[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]])
CENTROID_WEIGHTS = np.ones(1)

GAUSS2_POINTS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS2_WEIGHTS = np.array([0.5, 0.5])

ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def p1_gradients(mesh: MeridionalMesh) -> np.ndarray:
    """(M, 3, 2) constant gradients of the three P1 basis functions per triangle"""
    p = mesh.nodes[mesh.triangles]
    area2 = 2.0 * mesh.signed_areas()
    # grad phi_i = rot(p_k - p_j) / 2A for (i, j, k) cyclic
    grads = np.empty((mesh.num_triangles, 3, 2))
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        d = p[:, k] - p[:, j]
        grads[:, i, 0] = -d[:, 1]
        grads[:, i, 1] = d[:, 0]
    return grads / area2[:, None, None]


@dataclass
class VolumeGeometry:
    """
    Geometric factors at the volume quadrature points of every triangle

    Arrays are indexed (element, quadrature point, ...).
    """
    mode: FormulationMode
    triangles: np.ndarray       # (M, 3)
    phi: np.ndarray             # (Q, 3) basis values
    weights: np.ndarray         # (M, Q) area * rule weight on the assembly mesh
    grads: np.ndarray           # (M, 3, 2) P1 gradients on the assembly mesh
    N: np.ndarray               # (M, Q, 2, 2)
    G: np.ndarray               # (M, Q, 2, 2)
    jac2: np.ndarray            # (M, Q)
    radius: np.ndarray          # (M, Q) current radius
    capacity: np.ndarray        # (M, Q) weight of the heat-capacity term before rho0
    num_nodes: int

    @property
    def num_elements(self) -> int:
        return len(self.triangles)

    @property
    def num_points(self) -> int:
        return self.phi.shape[0]

    def interpolate(self, nodal: np.ndarray) -> np.ndarray:
        """(M, Q) values of a P1 field at the quadrature points"""
        return np.asarray(nodal)[self.triangles] @ self.phi.T

    def element_gradient(self, nodal: np.ndarray) -> np.ndarray:
        """(M, 2) constant gradient of a P1 field on each triangle"""
        return np.einsum('ea,eak->ek', np.asarray(nodal)[self.triangles], self.grads)

    def curl_vectors(self) -> np.ndarray:
        """(M, Q, 3, 2) N grad(phi_a) for each local basis function"""
        return np.einsum('eqij,eaj->eqai', self.N, self.grads)

    def mapped_gradients(self) -> np.ndarray:
        """(M, Q, 3, 2) G grad(phi_a), the current-configuration basis gradients"""
        return np.einsum('eqij,eaj->eqai', self.G, self.grads)

    def measure(self) -> np.ndarray:
        """(M, Q) current-configuration meridional measure times radius"""
        return self.weights * self.radius * self.jac2


@dataclass
class BoundaryGeometry:
    """Geometric factors at the 2-point Gauss points of a set of boundary edges"""
    edges: List[BoundaryEdge]
    nodes: np.ndarray           # (K, 2) end node indices (a, b)
    phi: np.ndarray             # (P, 2) values of the a/b trace basis
    weights: np.ndarray         # (K, P) full measure r dl of the current boundary

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def interpolate(self, nodal: np.ndarray) -> np.ndarray:
        return np.asarray(nodal)[self.nodes] @ self.phi.T


# ============================================================================
# BUILDERS
# ============================================================================

def _rule(name: str):
    if name == "interior":
        return INTERIOR_RULE, INTERIOR_WEIGHTS
    if name == "centroid":
        return CENTROID_RULE, CENTROID_WEIGHTS
    raise ValueError(f"Unknown quadrature rule '{name}'")


def lagrangian_geometry(mesh: MeridionalMesh, field: DisplacementField, t: float,
                        rule: str = "interior") -> VolumeGeometry:
    """Factors on the reference mesh from the kinematics at time t"""
    bary, w = _rule(rule)
    points = np.einsum('qa,eak->eqk', bary, mesh.nodes[mesh.triangles])
    kin = eval_kinematics(field, points, t)
    area = mesh.triangle_areas()
    return VolumeGeometry(
        mode=FormulationMode.LAGRANGIAN,
        triangles=mesh.triangles,
        phi=bary,
        weights=area[:, None] * w[None, :],
        grads=p1_gradients(mesh),
        N=kin.N,
        G=kin.finv_t(),
        jac2=kin.detF2,
        radius=kin.r_current,
        capacity=points[..., 0],
        num_nodes=mesh.num_nodes,
    )


def eulerian_geometry(pushed_mesh: MeridionalMesh, density_ratio: Optional[np.ndarray] = None,
                      rule: str = "interior") -> VolumeGeometry:
    """
    Factors on the moved mesh

    Args:
        pushed_mesh: mesh whose nodes follow the particles
        density_ratio: per-triangle det F, so that the spatial density is rho0 / det F
            (ones when omitted)
        rule: 'interior' or 'centroid'
    """
    bary, w = _rule(rule)
    M = pushed_mesh.num_triangles
    Q = len(w)
    points = np.einsum('qa,eak->eqk', bary, pushed_mesh.nodes[pushed_mesh.triangles])
    detF = np.ones(M) if density_ratio is None else np.asarray(density_ratio, dtype=float)
    r = points[..., 0]
    return VolumeGeometry(
        mode=FormulationMode.EULERIAN,
        triangles=pushed_mesh.triangles,
        phi=bary,
        weights=pushed_mesh.triangle_areas()[:, None] * w[None, :],
        grads=p1_gradients(pushed_mesh),
        N=np.broadcast_to(ROTATION, (M, Q, 2, 2)).copy(),
        G=np.broadcast_to(np.eye(2), (M, Q, 2, 2)).copy(),
        jac2=np.ones((M, Q)),
        radius=r,
        capacity=r / detF[:, None],
        num_nodes=pushed_mesh.num_nodes,
    )


def element_density_ratio(mesh: MeridionalMesh, field: DisplacementField, t: float) -> np.ndarray:
    """det F at the reference centroid of every triangle"""
    return eval_kinematics(field, mesh.centroids(), t).detF3


def volume_geometry(mesh: MeridionalMesh, field: DisplacementField, t: float,
                    mode: FormulationMode, rule: str = "interior") -> VolumeGeometry:
    """Dispatch on the formulation; Eulerian mode pushes the reference mesh forward first"""
    if mode is FormulationMode.LAGRANGIAN:
        return lagrangian_geometry(mesh, field, t, rule)
    pushed = push_forward(mesh, field, t)
    return eulerian_geometry(pushed, element_density_ratio(mesh, field, t), rule)


def lagrangian_boundary_geometry(mesh: MeridionalMesh, edges: List[BoundaryEdge],
                                 field: DisplacementField, t: float) -> BoundaryGeometry:
    """
    Boundary measure |F2^{-T} n| det F2 (r_m + u_r) dl on the reference edges

    The factor |F2^{-T} n| det F2 is taken at the edge midpoint.
    """
    lengths, normals, mids = edge_frames(mesh, edges)
    nodes = np.array([[e.a, e.b] for e in edges], dtype=np.int64).reshape(-1, 2)
    phi = np.column_stack([1.0 - GAUSS2_POINTS, GAUSS2_POINTS])
    if not edges:
        return BoundaryGeometry(edges=[], nodes=nodes, phi=phi, weights=np.zeros((0, 2)))

    kin_mid = eval_kinematics(field, mids, t)
    stretched = np.einsum('kij,kj->ki', kin_mid.finv_t(), normals)
    factor = np.hypot(stretched[:, 0], stretched[:, 1]) * kin_mid.detF2

    points = np.einsum('pa,kac->kpc', phi, mesh.nodes[nodes])
    radius = eval_kinematics(field, points, t).r_current
    weights = (lengths * factor)[:, None] * GAUSS2_WEIGHTS[None, :] * radius
    return BoundaryGeometry(edges=list(edges), nodes=nodes, phi=phi, weights=weights)


def eulerian_boundary_geometry(pushed_mesh: MeridionalMesh, edges: List[BoundaryEdge]
                               ) -> BoundaryGeometry:
    """Boundary measure r dl on the moved edges"""
    lengths, _, _ = edge_frames(pushed_mesh, edges)
    nodes = np.array([[e.a, e.b] for e in edges], dtype=np.int64).reshape(-1, 2)
    phi = np.column_stack([1.0 - GAUSS2_POINTS, GAUSS2_POINTS])
    if not edges:
        return BoundaryGeometry(edges=[], nodes=nodes, phi=phi, weights=np.zeros((0, 2)))
    radius = np.einsum('pa,ka->kp', phi, pushed_mesh.nodes[nodes][..., 0])
    weights = lengths[:, None] * GAUSS2_WEIGHTS[None, :] * radius
    return BoundaryGeometry(edges=list(edges), nodes=nodes, phi=phi, weights=weights)


# ============================================================================
# SCATTER
# ============================================================================

def scatter_matrix(connectivity: np.ndarray, local: np.ndarray, shape) -> csr_matrix:
    """
    Sum element matrices into a global sparse matrix

    Args:
        connectivity: (E, a) node indices per element, or a tuple
            (row_conn, col_conn) for rectangular element blocks
        local: (E, a, b) element matrices
        shape: global (rows, cols)
    """
    if isinstance(connectivity, tuple):
        rows_conn, cols_conn = connectivity
    else:
        rows_conn = cols_conn = connectivity
    rows = np.broadcast_to(rows_conn[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(cols_conn[:, None, :], local.shape).ravel()
    return coo_matrix((local.ravel(), (rows, cols)), shape=shape).tocsr()


def scatter_vector(connectivity: np.ndarray, local: np.ndarray, size: int) -> np.ndarray:
    """Sum element vectors (E, a) into a global vector"""
    out = np.zeros(size, dtype=np.result_type(local.dtype, float))
    np.add.at(out, connectivity.ravel(), local.ravel())
    return out
