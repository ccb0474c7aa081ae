import numpy as np
import pytest

from orientalign.meshio import (
    MeshError,
    TriMesh,
    normalize_mesh,
    parse_obj,
    parse_ply,
    write_obj,
    write_ply,
)

from conftest import asymmetric_mesh, box_mesh


MINIMAL_OBJ = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"


def test_parse_obj_minimal():
    mesh = parse_obj(MINIMAL_OBJ)
    assert mesh.n_vertices == 3
    assert mesh.n_faces == 1


def test_parse_obj_quad_fan_triangulation():
    data = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n"
    mesh = parse_obj(data)
    assert mesh.n_faces == 2
    assert mesh.faces.tolist() == [[0, 1, 2], [0, 2, 3]]


def test_parse_obj_index_out_of_range():
    with pytest.raises(MeshError):
        parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")


def test_parse_obj_negative_indices():
    data = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"
    mesh = parse_obj(data)
    assert mesh.faces.tolist() == [[0, 1, 2]]


def test_parse_obj_zero_faces():
    with pytest.raises(MeshError):
        parse_obj(b"v 0 0 0\nv 1 0 0\nv 0 1 0\n")


def test_parse_obj_malformed_vertex():
    with pytest.raises(MeshError):
        parse_obj(b"v 0 zero 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n")


def test_parse_obj_vertex_colors():
    data = b"v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n"
    mesh = parse_obj(data)
    assert mesh.vertex_colors is not None
    np.testing.assert_allclose(mesh.vertex_colors[0], [1, 0, 0])


def test_write_obj_single_triangle():
    mesh = parse_obj(MINIMAL_OBJ)
    text = write_obj(mesh).decode()
    assert sum(1 for line in text.splitlines() if line.startswith("v ")) == 3
    assert sum(1 for line in text.splitlines() if line.startswith("f ")) == 1


def test_write_obj_colors_extended_vertex_lines():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]],
                   vertex_colors=[[0.1, 0.2, 0.3]] * 3)
    first = write_obj(mesh).decode().splitlines()[0]
    assert len(first.split()) == 7


def test_obj_roundtrip_random_mesh():
    rng = np.random.default_rng(7)
    verts = rng.normal(size=(100, 3))
    faces = rng.integers(0, 100, size=(60, 3))
    mesh = TriMesh(verts, faces)
    back = parse_obj(write_obj(mesh))
    assert back.faces.tolist() == mesh.faces.tolist()
    np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-6)


TETRA_ASCII = b"""ply
format ascii 1.0
element vertex 4
property float x
property float y
property float z
element face 4
property list uchar int vertex_indices
end_header
0 0 0
1 0 0
0 1 0
0 0 1
3 0 1 2
3 0 1 3
3 0 2 3
3 1 2 3
"""


def test_parse_ply_ascii_tetrahedron():
    mesh = parse_ply(TETRA_ASCII)
    assert mesh.n_vertices == 4
    assert mesh.n_faces == 4


def test_ply_binary_roundtrip_matches_ascii():
    mesh = parse_ply(TETRA_ASCII)
    back = parse_ply(write_ply(mesh, binary=True))
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    assert back.faces.tolist() == mesh.faces.tolist()


def test_ply_ascii_roundtrip():
    mesh = asymmetric_mesh(3)
    back = parse_ply(write_ply(mesh, binary=False))
    assert back.faces.tolist() == mesh.faces.tolist()
    np.testing.assert_allclose(back.vertices, mesh.vertices, atol=1e-6)


def test_parse_ply_truncated():
    truncated = TETRA_ASCII.replace(b"element vertex 4", b"element vertex 10")
    with pytest.raises(MeshError):
        parse_ply(truncated)


def test_parse_ply_big_endian_rejected():
    data = TETRA_ASCII.replace(b"format ascii", b"format binary_big_endian")
    with pytest.raises(MeshError):
        parse_ply(data)


def test_parse_ply_missing_axis():
    data = TETRA_ASCII.replace(b"property float z\n", b"")
    with pytest.raises(MeshError):
        parse_ply(data)


def test_ply_colors_uchar():
    mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]],
                   vertex_colors=[[1.0, 0.5, 0.0]] * 3)
    back = parse_ply(write_ply(mesh))
    assert back.vertex_colors is not None
    np.testing.assert_allclose(back.vertex_colors[0], [1.0, 0.5, 0.0], atol=1 / 255)


def test_normalize_cube():
    mesh = box_mesh((1.0, 1.0, 1.0), (2.0, 2.0, 2.0))
    out = normalize_mesh(mesh)
    lo, hi = out.bbox()
    np.testing.assert_allclose(lo, [-0.5, -0.5, -0.5], atol=1e-12)
    np.testing.assert_allclose(hi, [0.5, 0.5, 0.5], atol=1e-12)


def test_normalize_anisotropic_box():
    mesh = box_mesh((2.0, 1.0, 0.5), (4.0, 2.0, 1.0))
    out = normalize_mesh(mesh)
    lo, hi = out.bbox()
    np.testing.assert_allclose(hi - lo, [1.0, 0.5, 0.25], atol=1e-12)
    np.testing.assert_allclose((lo + hi) / 2, 0.0, atol=1e-12)


def test_normalize_idempotent():
    mesh = asymmetric_mesh(1)
    once = normalize_mesh(mesh)
    twice = normalize_mesh(once)
    np.testing.assert_allclose(twice.vertices, once.vertices, atol=1e-12)


def test_normalize_degenerate():
    mesh = TriMesh([[1, 1, 1]] * 3, [[0, 1, 2]])
    with pytest.raises(MeshError):
        normalize_mesh(mesh)


def test_normalize_rotation_scale_invariance():
    # normalizing a rotated mesh gives the same result whether or not the
    # mesh was normalized first: the scale factor is isometry-invariant
    from orientalign.geometry import rotation_from_axis_angle

    mesh = asymmetric_mesh(2).transformed(scale=3.7, translation=[1.0, -2.0, 0.5])
    rot = rotation_from_axis_angle(np.array([0.0, 0.0, 1.0]), 0.7)
    a = normalize_mesh(mesh.transformed(rotation=rot))
    b = normalize_mesh(normalize_mesh(mesh).transformed(rotation=rot))
    diag_a = np.linalg.norm(np.subtract(*a.bbox()))
    diag_b = np.linalg.norm(np.subtract(*b.bbox()))
    assert diag_a == pytest.approx(diag_b, abs=1e-9)
    np.testing.assert_allclose(a.vertices, b.vertices, atol=1e-9)
