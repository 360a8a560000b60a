import numpy as np
import pytest

from curlspec.errors import GmshFormatError, NoTetrahedraError, NonConformingMeshError
from curlspec.readers import GmshReader, JSONMeshReader, read_gmsh, read_mesh, reader_for, write_gmsh, write_mesh

V41_SINGLE_TET = """$MeshFormat
4.1 0 8
$EndMeshFormat
$Entities
0 0 1 1
1 0 0 0 1 1 0 1 7 0
1 0 0 0 1 1 1 0 1 1
$EndEntities
$Nodes
1 4 1 4
3 1 0 4
1
2
3
4
0 0 0
1 0 0
0 1 0
0 0 1
$EndNodes
$Elements
2 2 1 2
2 1 2 1
1 1 2 3
3 1 4 1
2 1 2 3 4
$EndElements
"""


def _v22(elements, nodes=None):
    nodes = nodes or ["1 0 0 0", "2 1 0 0", "3 0 1 0", "4 0 0 1"]
    return "\n".join(
        ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(nodes))] + nodes
        + ["$EndNodes", "$Elements", str(len(elements))] + elements + ["$EndElements", ""]
    )


def test_v22_roundtrip_keeps_tags(tmp_path, cube2):
    path = write_gmsh(cube2, tmp_path / "cube2.msh", comment="config 1234abcd")
    text = path.read_text()
    assert "$Comments\nconfig 1234abcd\n$EndComments" in text
    mesh = read_gmsh(path)
    assert mesh.name == "cube2"
    assert mesh.summary() == cube2.summary()
    np.testing.assert_allclose(mesh.vertices, cube2.vertices, rtol=0, atol=0)
    assert np.array_equal(mesh.boundary_faces, cube2.boundary_faces)
    assert np.array_equal(mesh.boundary_tags, cube2.boundary_tags)


def test_v41_single_tet_with_physical_tag(tmp_path):
    path = tmp_path / "tet.msh"
    path.write_text(V41_SINGLE_TET)
    mesh = read_gmsh(path)
    assert mesh.n_tets == 1 and mesh.n_vertices == 4
    assert mesh.volumes.sum() == pytest.approx(1.0 / 6.0)
    tags = {tuple(sorted(f)): t for f, _, t in mesh.boundary_face_records()}
    assert tags[(0, 1, 2)] == 7
    assert sorted(tags.values()) == [0, 0, 0, 7]


def test_v22_negative_tet_is_reoriented(tmp_path):
    path = tmp_path / "neg.msh"
    path.write_text(_v22(["1 4 2 1 1 1 2 4 3"]))
    mesh = read_gmsh(path)
    assert mesh.volumes[0] > 0


@pytest.mark.parametrize("header", ["4.1 1 8", "3.0 0 8", "2.2"])
def test_rejected_headers(tmp_path, header):
    path = tmp_path / "bad.msh"
    path.write_text(f"$MeshFormat\n{header}\n$EndMeshFormat\n")
    with pytest.raises(GmshFormatError):
        read_gmsh(path)


def test_binary_bytes_rejected(tmp_path):
    path = tmp_path / "bin.msh"
    path.write_bytes(b"$MeshFormat\n4.1 1 8\n\xff\xfe\x00\x01")
    with pytest.raises(GmshFormatError, match="binary"):
        read_gmsh(path)


def test_unterminated_section(tmp_path):
    path = tmp_path / "cut.msh"
    path.write_text("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n1\n1 0 0 0\n")
    with pytest.raises(GmshFormatError, match="unterminated"):
        read_gmsh(path)


def test_no_tetrahedra(tmp_path):
    path = tmp_path / "tri.msh"
    path.write_text(_v22(["1 2 2 1 1 1 2 3"]))
    with pytest.raises(NoTetrahedraError):
        read_gmsh(path)


def test_dangling_triangle(tmp_path):
    nodes = ["1 0 0 0", "2 1 0 0", "3 0 1 0", "4 0 0 1", "5 1 1 1"]
    path = tmp_path / "dangling.msh"
    path.write_text(_v22(["1 4 2 1 1 1 2 3 4", "2 2 2 3 3 1 2 5"], nodes))
    with pytest.raises(NonConformingMeshError, match="dangling face"):
        read_gmsh(path)


def test_reader_dispatch(tmp_path, cube2):
    assert isinstance(reader_for("a/b/mesh.MSH"), GmshReader)
    assert isinstance(reader_for("mesh.json"), JSONMeshReader)
    with pytest.raises(GmshFormatError, match="no mesh reader"):
        reader_for("mesh.vtk")
    path = write_mesh(cube2, tmp_path / "cube2.json")
    assert read_mesh(path).summary() == cube2.summary()
