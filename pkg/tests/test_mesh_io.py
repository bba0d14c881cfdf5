import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eip import primitives
from eip.mesh_io import (
    DegenerateTriangleError,
    EmptyMeshError,
    MeshIndexError,
    MeshParseError,
    TriangleMesh,
    is_watertight,
    load_mesh,
    save_obj,
    save_stl,
)

CUBE_OBJ = """\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
"""


def write(tmp_path, text, name="m.obj"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_unit_cube_obj_counts(tmp_path):
    mesh = load_mesh(write(tmp_path, CUBE_OBJ))
    assert mesh.n_vertices == 8
    assert mesh.n_triangles == 12
    assert is_watertight(mesh)
    assert mesh.volume() == pytest.approx(1.0)


def test_bbox_contains_vertices_exactly(tmp_path):
    mesh = load_mesh(write(tmp_path, CUBE_OBJ))
    np.testing.assert_array_equal(mesh.bbox[0], [0, 0, 0])
    np.testing.assert_array_equal(mesh.bbox[1], [1, 1, 1])


def test_face_index_out_of_range(tmp_path):
    with pytest.raises(MeshIndexError) as info:
        load_mesh(write(tmp_path, CUBE_OBJ + "f 1 2 9\n"))
    assert info.value.code == "index_out_of_range"


def test_error_codes_are_distinct(tmp_path):
    codes = set()
    for text, err in [
        ("v 0 0 x\n", MeshParseError),
        ("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n", MeshIndexError),
        ("# nothing here\n", EmptyMeshError),
    ]:
        with pytest.raises(err) as info:
            load_mesh(write(tmp_path, text))
        codes.add(info.value.code)
    assert len(codes) == 3


def test_zero_index_is_rejected(tmp_path):
    with pytest.raises(MeshIndexError):
        load_mesh(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n"))


def test_slash_faces_and_polygon_fan(tmp_path):
    text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n"
    mesh = load_mesh(write(tmp_path, text))
    np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2], [0, 2, 3]])


def test_negative_indices_are_relative(tmp_path):
    mesh = load_mesh(write(tmp_path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"))
    np.testing.assert_array_equal(mesh.triangles, [[0, 1, 2]])


def test_degenerate_triangle_rejected():
    with pytest.raises(DegenerateTriangleError):
        TriangleMesh(np.eye(3), np.array([[0, 1, 1]]))


def test_arrays_are_read_only():
    mesh = primitives.unit_cube()
    with pytest.raises(ValueError):
        mesh.vertices[0, 0] = 5.0


def test_stl_round_trip_cube(tmp_path):
    mesh = load_mesh(write(tmp_path, CUBE_OBJ))
    path = tmp_path / "cube.stl"
    save_stl(mesh, path)
    back = load_mesh(path)
    assert back.n_vertices == 8  # 36 corners deduplicated
    assert back.n_triangles == 12
    # the same corner of each triangle maps to the same position
    np.testing.assert_allclose(back.vertices[back.triangles], mesh.vertices[mesh.triangles], atol=1e-6)
    assert is_watertight(back)


def test_stl_truncated(tmp_path):
    path = tmp_path / "bad.stl"
    path.write_bytes(b"\0" * 80 + (3).to_bytes(4, "little") + b"\0" * 10)
    with pytest.raises(MeshParseError):
        load_mesh(path)


def test_obj_round_trip_is_exact(tmp_path):
    mesh = primitives.icosphere(0.37, 2)
    save_obj(mesh, tmp_path / "s.obj")
    back = load_mesh(tmp_path / "s.obj")
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.triangles, mesh.triangles)


def test_watertight_closed_cube():
    assert is_watertight(primitives.unit_cube())


def test_watertight_missing_triangle():
    cube = primitives.unit_cube()
    assert not is_watertight(TriangleMesh(cube.vertices, cube.triangles[1:]))


def test_watertight_two_disjoint_cubes():
    a = primitives.unit_cube()
    b = a.transformed(1.0, (3.0, 0.0, 0.0))
    both = TriangleMesh(np.vstack([a.vertices, b.vertices]), np.vstack([a.triangles, b.triangles + 8]))
    assert is_watertight(both)


def test_watertight_rejects_flipped_triangle():
    cube = primitives.unit_cube()
    tris = cube.triangles.copy()
    tris[0] = tris[0, ::-1]
    assert not is_watertight(TriangleMesh(cube.vertices, tris))


def test_watertight_rejects_doubled_face():
    cube = primitives.unit_cube()
    tris = np.vstack([cube.triangles, cube.triangles[:1]])
    assert not is_watertight(TriangleMesh(cube.vertices, tris))


@given(st.permutations(range(12)), st.integers(0, 2))
def test_watertight_invariant_under_triangle_order_and_rotation(perm, shift):
    cube = primitives.unit_cube()
    tris = np.roll(cube.triangles[list(perm)], shift, axis=1)
    assert is_watertight(TriangleMesh(cube.vertices, tris))
