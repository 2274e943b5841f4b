"""
test_mesh.py - Meridional mesh generation, tagging and file format
"""

import numpy as np
import pytest

from core.exceptions import InvalidArgumentError, MeshTaggingError
from core.mesh import (BoundaryEdge, EMTag, EMTagKind, MeridionalMesh, ThermalTag,
                       boundary_runs, edge_frames, format_mesh, generate_rectangle_mesh,
                       mesh_summary, parse_mesh_text, read_mesh, write_mesh)


@pytest.fixture
def small_mesh():
    return generate_rectangle_mesh(0.02, 0.05, 3, 4)


# ============================================================================
# GENERATION
# ============================================================================

def test_single_cell_mesh():
    mesh = generate_rectangle_mesh(1.0, 1.0, 1, 1)
    assert mesh.num_nodes == 4
    assert mesh.num_triangles == 2
    assert len(mesh.boundary_edges) == 4
    mesh.validate()


def test_benchmark_mesh_counts():
    mesh = generate_rectangle_mesh(0.02875, 0.165, 48, 96)
    assert mesh.num_nodes == 49 * 97
    assert mesh.num_triangles == 2 * 48 * 96
    assert np.all(mesh.signed_areas() > 0)
    assert mesh.triangle_areas().sum() == pytest.approx(0.02875 * 0.165, rel=1e-12)


def test_generated_tags(small_mesh):
    kinds = [e.em_tag.kind for e in small_mesh.boundary_edges]
    assert kinds.count(EMTagKind.PORT_E) == 3
    assert kinds.count(EMTagKind.INSULATED) == 4
    assert kinds.count(EMTagKind.PORT_J) == 3
    assert kinds.count(EMTagKind.AXIS) == 4
    assert small_mesh.port_indices() == [1]
    axis = small_mesh.axis_nodes()
    assert np.all(small_mesh.nodes[axis, 0] == 0.0)
    assert len(axis) == 5
    for e in small_mesh.edges_with(EMTag.axis()):
        assert e.thermal_tag is ThermalTag.NONE


def test_thermal_sides_override():
    mesh = generate_rectangle_mesh(1.0, 2.0, 2, 2, thermal_sides={'top': ThermalTag.DIRICHLET})
    top = mesh.edges_with(EMTag.port_j(1))
    assert all(e.thermal_tag is ThermalTag.DIRICHLET for e in top)
    right = mesh.edges_with(EMTag.insulated())
    assert all(e.thermal_tag is ThermalTag.CONVRAD for e in right)


@pytest.mark.parametrize("R, L, nr, nz", [
    (0.0, 1.0, 2, 2),
    (1.0, -1.0, 2, 2),
    (1.0, 1.0, 0, 2),
    (1.0, 1.0, 2, 1.5),
])
def test_generator_rejects_bad_arguments(R, L, nr, nz):
    with pytest.raises(InvalidArgumentError):
        generate_rectangle_mesh(R, L, nr, nz)


def test_unknown_side_rejected():
    with pytest.raises(InvalidArgumentError):
        generate_rectangle_mesh(1.0, 1.0, 1, 1, thermal_sides={'left': ThermalTag.CONVRAD})


# ============================================================================
# BOUNDARY RUNS
# ============================================================================

def test_port_is_single_ordered_run(small_mesh):
    runs = boundary_runs(small_mesh, EMTag.port_j(1))
    assert len(runs) == 1
    run = runs[0]
    assert len(run) == 3
    for first, second in zip(run, run[1:]):
        assert first.b == second.a


def test_absent_tag_gives_no_runs(small_mesh):
    assert boundary_runs(small_mesh, EMTag.port_j(7)) == []


def test_disconnected_port_rejected(small_mesh):
    edges = list(small_mesh.boundary_edges)
    top = [i for i, e in enumerate(edges) if e.em_tag == EMTag.port_j(1)]
    middle = top[1]
    e = edges[middle]
    edges[middle] = BoundaryEdge(e.a, e.b, EMTag.insulated(), e.thermal_tag)
    mesh = MeridionalMesh(small_mesh.nodes, small_mesh.triangles, tuple(edges))
    with pytest.raises(MeshTaggingError):
        boundary_runs(mesh, EMTag.port_j(1))


def test_outward_normals(small_mesh):
    lengths, normals, mids = edge_frames(small_mesh, small_mesh.edges_with(EMTag.insulated()))
    assert np.allclose(normals, [1.0, 0.0])
    assert lengths.sum() == pytest.approx(0.05)
    _, normals, _ = edge_frames(small_mesh, small_mesh.edges_with(EMTag.port_e()))
    assert np.allclose(normals, [0.0, -1.0])
    _, normals, _ = edge_frames(small_mesh, small_mesh.edges_with(EMTag.axis()))
    assert np.allclose(normals, [-1.0, 0.0])


# ============================================================================
# VALIDATION
# ============================================================================

def test_untagged_boundary_edge_rejected(small_mesh):
    mesh = MeridionalMesh(small_mesh.nodes, small_mesh.triangles, small_mesh.boundary_edges[1:])
    with pytest.raises(MeshTaggingError):
        mesh.validate()


def test_clockwise_edge_rejected(small_mesh):
    edges = list(small_mesh.boundary_edges)
    e = edges[0]
    edges[0] = BoundaryEdge(e.b, e.a, e.em_tag, e.thermal_tag)
    mesh = MeridionalMesh(small_mesh.nodes, small_mesh.triangles, tuple(edges))
    with pytest.raises(MeshTaggingError):
        mesh.validate()


def test_inverted_triangle_rejected(small_mesh):
    triangles = small_mesh.triangles.copy()
    triangles[0] = triangles[0][::-1]
    mesh = MeridionalMesh(small_mesh.nodes, triangles, small_mesh.boundary_edges)
    with pytest.raises(InvalidArgumentError):
        mesh.validate()


def test_mesh_is_immutable(small_mesh):
    with pytest.raises(ValueError):
        small_mesh.nodes[0, 0] = 1.0


# ============================================================================
# FILE FORMAT
# ============================================================================

def test_text_format_round_trip(small_mesh):
    parsed = parse_mesh_text(format_mesh(small_mesh))
    assert np.array_equal(parsed.nodes, small_mesh.nodes)
    assert np.array_equal(parsed.triangles, small_mesh.triangles)
    assert parsed.boundary_edges == small_mesh.boundary_edges


def test_read_write(tmp_path, small_mesh):
    path = write_mesh(small_mesh, tmp_path / "bar.mesh")
    loaded = read_mesh(path)
    assert loaded.num_nodes == small_mesh.num_nodes
    assert str(loaded.boundary_edges[-1].em_tag) == "axis"


def test_bad_header_rejected(small_mesh):
    text = format_mesh(small_mesh).replace("axisim-mesh v1", "some-mesh v2")
    with pytest.raises(InvalidArgumentError):
        parse_mesh_text(text)


def test_truncated_file_rejected(small_mesh):
    text = "\n".join(format_mesh(small_mesh).splitlines()[:10])
    with pytest.raises(InvalidArgumentError):
        parse_mesh_text(text)


@pytest.mark.parametrize("bad_index", [7, -1])
@pytest.mark.parametrize("line", [7, 10])
def test_node_index_out_of_range_rejected(bad_index, line):
    # lines 7-8 hold the triangles and 10-13 the edges of a single-cell mesh
    lines = format_mesh(generate_rectangle_mesh(1.0, 1.0, 1, 1)).splitlines()
    fields = lines[line].split()
    fields[0] = str(bad_index)
    lines[line] = " ".join(fields)
    with pytest.raises(InvalidArgumentError, match="out of range"):
        parse_mesh_text("\n".join(lines))


def test_tag_parsing():
    assert EMTag.parse("portJ:3") == EMTag.port_j(3)
    assert str(EMTag.port_j(3)) == "portJ:3"
    assert EMTag.parse("portE").kind is EMTagKind.PORT_E
    with pytest.raises(InvalidArgumentError):
        EMTag.parse("ground")
    with pytest.raises(InvalidArgumentError):
        EMTag.port_j(0)


def test_summary(small_mesh):
    summary = mesh_summary(small_mesh)
    assert summary['nodes'] == 20
    assert summary['triangles'] == 24
    assert summary['em_tags'] == {'portE': 3, 'insulated': 4, 'portJ:1': 3, 'axis': 4}
    assert summary['thermal_tags'] == {'convrad': 10, 'none': 4}
    assert summary['area'] == pytest.approx(0.001)
