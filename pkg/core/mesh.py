"""
Meridional Mesh - Reference Configuration Triangulation
========================================================

Triangulated meridional section (r, z) of an axisymmetric conductor with
tagged boundary edges. Two independent tag maps live on the same edges:
the electromagnetic one (axis, current ports, ground port, insulated) and
the thermal one (Dirichlet, convection-radiation, none on the axis).

Features:
- Structured rectangle generator for cylinder sections
- Plain-text mesh format (``axisim-mesh v1``) reader and writer
- Connected boundary runs for port and multiplier constraints
- Invariant validation (positive areas, closed oriented boundary loops)

Author: Simulation Team
Version: 1.0.0
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError, MeshTaggingError

logger = logging.getLogger(__name__)

MESH_HEADER = "axisim-mesh v1"


# ============================================================================
# BOUNDARY TAGS
# ============================================================================

class EMTagKind(Enum):
    """Electromagnetic boundary classification"""
    AXIS = "axis"
    PORT_J = "portJ"
    PORT_E = "portE"
    INSULATED = "insulated"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class EMTag:
    """Electromagnetic tag; ``port`` is the port index k for PORT_J edges"""
    kind: EMTagKind
    port: Optional[int] = None

    @classmethod
    def axis(cls) -> 'EMTag':
        return cls(EMTagKind.AXIS)

    @classmethod
    def port_j(cls, k: int) -> 'EMTag':
        if k < 1:
            raise InvalidArgumentError(f"Port index must be >= 1, got {k}")
        return cls(EMTagKind.PORT_J, k)

    @classmethod
    def port_e(cls) -> 'EMTag':
        return cls(EMTagKind.PORT_E)

    @classmethod
    def insulated(cls) -> 'EMTag':
        return cls(EMTagKind.INSULATED)

    @classmethod
    def parse(cls, text: str) -> 'EMTag':
        """Parse ``axis``, ``portJ:<k>``, ``portE`` or ``insulated``"""
        text = text.strip()
        if text.startswith("portJ:"):
            try:
                return cls.port_j(int(text.split(":", 1)[1]))
            except ValueError as e:
                raise InvalidArgumentError(f"Bad port tag '{text}'") from e
        for kind in (EMTagKind.AXIS, EMTagKind.PORT_E, EMTagKind.INSULATED):
            if text == kind.value:
                return cls(kind)
        raise InvalidArgumentError(f"Unknown electromagnetic tag '{text}'")

    def __str__(self) -> str:
        if self.kind is EMTagKind.PORT_J:
            return f"portJ:{self.port}"
        return self.kind.value


class ThermalTag(Enum):
    """Thermal boundary classification (axis edges carry NONE: zero flux)"""
    DIRICHLET = "dirichlet"
    CONVRAD = "convrad"
    NONE = "none"

    def __str__(self) -> str:
        return self.value


BoundaryTag = Union[EMTag, ThermalTag]


@dataclass(frozen=True)
class BoundaryEdge:
    """Boundary edge (a -> b), oriented counter-clockwise around the domain"""
    a: int
    b: int
    em_tag: EMTag
    thermal_tag: ThermalTag

    def has_tag(self, tag: BoundaryTag) -> bool:
        if isinstance(tag, ThermalTag):
            return self.thermal_tag is tag
        return self.em_tag == tag

    def __repr__(self) -> str:
        return f"BoundaryEdge({self.a}->{self.b}, {self.em_tag}, {self.thermal_tag})"


# ============================================================================
# MESH
# ============================================================================

@dataclass(frozen=True, eq=False)
class MeridionalMesh:
    """
    Immutable triangulation of the meridional section

    Attributes:
        nodes: (N, 2) array of (r_m, z_m) in meters
        triangles: (M, 3) array of counter-clockwise node indices
        boundary_edges: counter-clockwise oriented tagged boundary edges
    """
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: Tuple[BoundaryEdge, ...]

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        nodes.flags.writeable = False
        triangles.flags.writeable = False
        object.__setattr__(self, 'nodes', nodes)
        object.__setattr__(self, 'triangles', triangles)
        object.__setattr__(self, 'boundary_edges', tuple(self.boundary_edges))

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        """Signed area of every triangle (positive for counter-clockwise)"""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def triangle_areas(self) -> np.ndarray:
        return np.abs(self.signed_areas())

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def edges_with(self, tag: BoundaryTag) -> List[BoundaryEdge]:
        return [e for e in self.boundary_edges if e.has_tag(tag)]

    def nodes_with(self, tag: BoundaryTag) -> np.ndarray:
        """Sorted unique node indices lying on edges carrying ``tag``"""
        idx = {n for e in self.edges_with(tag) for n in (e.a, e.b)}
        return np.array(sorted(idx), dtype=np.int64)

    def axis_nodes(self) -> np.ndarray:
        return self.nodes_with(EMTag.axis())

    def port_indices(self) -> List[int]:
        """Sorted indices k of all current/voltage ports present in the mesh"""
        return sorted({e.em_tag.port for e in self.boundary_edges
                       if e.em_tag.kind is EMTagKind.PORT_J})

    def with_nodes(self, nodes: np.ndarray) -> 'MeridionalMesh':
        """Same connectivity and tags on moved node positions"""
        return MeridionalMesh(nodes=nodes, triangles=self.triangles,
                              boundary_edges=self.boundary_edges)

    def validate(self) -> None:
        """
        Check the mesh invariants

        Raises:
            InvalidArgumentError: negative radii or inverted triangles
            MeshTaggingError: boundary edges not forming closed oriented loops
        """
        if np.any(self.nodes[:, 0] < 0.0):
            raise InvalidArgumentError("Mesh nodes must have r >= 0")

        areas = self.signed_areas()
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise InvalidArgumentError(
                f"Triangle {bad} has non-positive signed area {areas[bad]:.3e}")

        # Triangle edges seen once form the boundary, with the interior on the left
        counts: Dict[Tuple[int, int], int] = {}
        directed = set()
        for tri in self.triangles:
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                key = (min(a, b), max(a, b))
                counts[key] = counts.get(key, 0) + 1
                directed.add((a, b))
        geometric = {k for k, c in counts.items() if c == 1}

        tagged = set()
        outgoing: Dict[int, int] = {}
        incoming: Dict[int, int] = {}
        for e in self.boundary_edges:
            key = (min(e.a, e.b), max(e.a, e.b))
            if key in tagged:
                raise MeshTaggingError(f"Boundary edge {e.a}-{e.b} tagged twice")
            tagged.add(key)
            if (e.a, e.b) not in directed:
                raise MeshTaggingError(f"Boundary edge {e.a}->{e.b} is not counter-clockwise")
            outgoing[e.a] = outgoing.get(e.a, 0) + 1
            incoming[e.b] = incoming.get(e.b, 0) + 1

        if tagged != geometric:
            missing = len(geometric - tagged)
            extra = len(tagged - geometric)
            raise MeshTaggingError(
                f"Boundary tags do not cover the boundary exactly once "
                f"({missing} untagged, {extra} interior edges tagged)")

        for n in set(outgoing) | set(incoming):
            if outgoing.get(n, 0) != 1 or incoming.get(n, 0) != 1:
                raise MeshTaggingError(f"Boundary node {n} is not on a closed loop")

        on_axis = set(np.flatnonzero(self.nodes[:, 0] == 0.0).tolist())
        axis_tagged = set(self.axis_nodes().tolist())
        stray = on_axis - axis_tagged
        if stray:
            raise MeshTaggingError(f"Nodes {sorted(stray)[:5]} have r = 0 but no Axis edge")

        for k in self.port_indices():
            boundary_runs(self, EMTag.port_j(k))
        boundary_runs(self, EMTag.port_e())

    def to_dict(self) -> dict:
        return mesh_summary(self)

    def __repr__(self) -> str:
        return (f"MeridionalMesh(nodes={self.num_nodes}, triangles={self.num_triangles}, "
                f"boundary_edges={len(self.boundary_edges)})")


# ============================================================================
# GENERATION
# ============================================================================

DEFAULT_THERMAL_SIDES = {
    'bottom': ThermalTag.CONVRAD,
    'right': ThermalTag.CONVRAD,
    'top': ThermalTag.CONVRAD,
}


def generate_rectangle_mesh(R: float, L: float, nr: int, nz: int,
                            thermal_sides: Optional[Dict[str, ThermalTag]] = None
                            ) -> MeridionalMesh:
    """
    Structured triangulation of [0, R] x [0, L]

    Each quad is split along its lower-left to upper-right diagonal. The
    left side is the axis, the top the current port PortJ(1), the bottom the
    ground port and the right side is insulated.

    Args:
        R: radius (m)
        L: length (m)
        nr: cells along r
        nz: cells along z
        thermal_sides: optional thermal tag per side ('bottom', 'right', 'top');
            unspecified sides are convection-radiation

    Returns:
        MeridionalMesh with (nr+1)(nz+1) nodes and 2*nr*nz triangles
    """
    if not (R > 0 and L > 0):
        raise InvalidArgumentError(f"Dimensions must be positive, got R={R}, L={L}")
    if int(nr) != nr or int(nz) != nz or nr < 1 or nz < 1:
        raise InvalidArgumentError(f"Cell counts must be positive integers, got nr={nr}, nz={nz}")
    nr, nz = int(nr), int(nz)

    sides = dict(DEFAULT_THERMAL_SIDES)
    for side, tag in (thermal_sides or {}).items():
        if side not in sides:
            raise InvalidArgumentError(f"Unknown side '{side}' (expected bottom, right or top)")
        sides[side] = tag

    r = np.linspace(0.0, R, nr + 1)
    z = np.linspace(0.0, L, nz + 1)
    rr, zz = np.meshgrid(r, z)
    nodes = np.column_stack([rr.ravel(), zz.ravel()])

    def nid(i: int, j: int) -> int:
        return j * (nr + 1) + i

    i, j = np.meshgrid(np.arange(nr), np.arange(nz))
    i, j = i.ravel(), j.ravel()
    n00 = j * (nr + 1) + i
    n10 = n00 + 1
    n01 = n00 + (nr + 1)
    n11 = n01 + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.empty((2 * nr * nz, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    edges: List[BoundaryEdge] = []
    for ii in range(nr):
        edges.append(BoundaryEdge(nid(ii, 0), nid(ii + 1, 0), EMTag.port_e(), sides['bottom']))
    for jj in range(nz):
        edges.append(BoundaryEdge(nid(nr, jj), nid(nr, jj + 1), EMTag.insulated(), sides['right']))
    for ii in range(nr, 0, -1):
        edges.append(BoundaryEdge(nid(ii, nz), nid(ii - 1, nz), EMTag.port_j(1), sides['top']))
    for jj in range(nz, 0, -1):
        edges.append(BoundaryEdge(nid(0, jj), nid(0, jj - 1), EMTag.axis(), ThermalTag.NONE))

    mesh = MeridionalMesh(nodes=nodes, triangles=triangles, boundary_edges=tuple(edges))
    logger.debug(f"Generated {mesh!r} for R={R}, L={L}")
    return mesh


# ============================================================================
# BOUNDARY RUNS
# ============================================================================

def boundary_runs(mesh: MeridionalMesh, tag: BoundaryTag) -> List[List[BoundaryEdge]]:
    """
    Connected components of the edges carrying ``tag``

    Each run is returned in consecutive orientation-consistent order. A tag
    absent from the mesh yields an empty list.

    Raises:
        MeshTaggingError: branching runs, or a port split into several components
    """
    edges = mesh.edges_with(tag)
    if not edges:
        return []

    by_start: Dict[int, BoundaryEdge] = {}
    ends = set()
    for e in edges:
        if e.a in by_start:
            raise MeshTaggingError(f"Edges tagged {tag} branch at node {e.a}")
        by_start[e.a] = e
        ends.add(e.b)

    unvisited = {(e.a, e.b) for e in edges}
    runs: List[List[BoundaryEdge]] = []
    # open runs first, starting where no tagged edge ends
    starts = [e.a for e in edges if e.a not in ends]
    for start in starts + [e.a for e in edges]:
        if start not in by_start or (by_start[start].a, by_start[start].b) not in unvisited:
            continue
        run = []
        node = start
        while node in by_start and (by_start[node].a, by_start[node].b) in unvisited:
            e = by_start[node]
            unvisited.discard((e.a, e.b))
            run.append(e)
            node = e.b
        runs.append(run)

    is_port = isinstance(tag, EMTag) and tag.kind in (EMTagKind.PORT_J, EMTagKind.PORT_E)
    if is_port and len(runs) > 1:
        raise MeshTaggingError(f"Port {tag} must be connected, found {len(runs)} components")
    return runs


def edge_frames(mesh: MeridionalMesh, edges: List[BoundaryEdge]
                ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Lengths, outward unit normals and midpoints of boundary edges

    The outward normal is the counter-clockwise tangent rotated by -90 degrees.
    """
    if not edges:
        return np.zeros(0), np.zeros((0, 2)), np.zeros((0, 2))
    a = mesh.nodes[[e.a for e in edges]]
    b = mesh.nodes[[e.b for e in edges]]
    d = b - a
    length = np.hypot(d[:, 0], d[:, 1])
    tangent = d / length[:, None]
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]])
    return length, normal, 0.5 * (a + b)


def mesh_summary(mesh: MeridionalMesh) -> dict:
    """Counts and extents used by the ``mesh-info`` command"""
    summary = {
        'nodes': mesh.num_nodes,
        'triangles': mesh.num_triangles,
        'boundary_edges': len(mesh.boundary_edges),
        'r_range': [float(mesh.nodes[:, 0].min()), float(mesh.nodes[:, 0].max())],
        'z_range': [float(mesh.nodes[:, 1].min()), float(mesh.nodes[:, 1].max())],
        'area': float(mesh.triangle_areas().sum()),
        'em_tags': {},
        'thermal_tags': {},
    }
    for e in mesh.boundary_edges:
        key = str(e.em_tag)
        summary['em_tags'][key] = summary['em_tags'].get(key, 0) + 1
        key = str(e.thermal_tag)
        summary['thermal_tags'][key] = summary['thermal_tags'].get(key, 0) + 1
    return summary


# ============================================================================
# FILE FORMAT
# ============================================================================

def format_mesh(mesh: MeridionalMesh) -> str:
    """Serialize to the ``axisim-mesh v1`` text format"""
    lines = [MESH_HEADER, str(mesh.num_nodes)]
    lines.extend(f"{r!r} {z!r}" for r, z in mesh.nodes.tolist())
    lines.append(str(mesh.num_triangles))
    lines.extend(f"{i} {j} {k}" for i, j, k in mesh.triangles.tolist())
    lines.append(str(len(mesh.boundary_edges)))
    lines.extend(f"{e.a} {e.b} {e.em_tag} {e.thermal_tag}" for e in mesh.boundary_edges)
    return "\n".join(lines) + "\n"


def parse_mesh_text(text: str) -> MeridionalMesh:
    """
    Parse the ``axisim-mesh v1`` text format and validate the result

    Raises:
        InvalidArgumentError: malformed content
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith('#')]
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise InvalidArgumentError("Unexpected end of mesh file")
        pos += 1
        return lines[pos - 1]

    try:
        if take() != MESH_HEADER:
            raise InvalidArgumentError(f"Missing '{MESH_HEADER}' header")
        n_nodes = int(take())
        nodes = [tuple(float(v) for v in take().split()) for _ in range(n_nodes)]
        n_tris = int(take())
        tris = [tuple(int(v) for v in take().split()) for _ in range(n_tris)]
        n_edges = int(take())
        edges = []
        for _ in range(n_edges):
            a, b, em, th = take().split()
            edges.append(BoundaryEdge(int(a), int(b), EMTag.parse(em), ThermalTag(th)))
    except ValueError as e:
        raise InvalidArgumentError(f"Malformed mesh file: {e}") from e

    if any(len(p) != 2 for p in nodes) or any(len(t) != 3 for t in tris):
        raise InvalidArgumentError("Node lines need 2 values and triangle lines 3")
    n = len(nodes)
    for t in tris:
        if any(not 0 <= i < n for i in t):
            raise InvalidArgumentError(f"Triangle {t} has a node index out of range [0, {n})")
    for e in edges:
        if not (0 <= e.a < n and 0 <= e.b < n):
            raise InvalidArgumentError(
                f"Boundary edge ({e.a}, {e.b}) has a node index out of range [0, {n})")

    mesh = MeridionalMesh(nodes=np.array(nodes, dtype=float),
                          triangles=np.array(tris, dtype=np.int64),
                          boundary_edges=tuple(edges))
    mesh.validate()
    return mesh


def read_mesh(path: Union[str, Path]) -> MeridionalMesh:
    mesh = parse_mesh_text(Path(path).read_text(encoding="utf-8"))
    logger.info(f"Loaded {mesh!r} from {path}")
    return mesh


def write_mesh(mesh: MeridionalMesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_mesh(mesh), encoding="utf-8")
    return path
