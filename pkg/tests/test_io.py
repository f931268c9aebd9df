import numpy as np
import pytest

from fracocp import io
from fracocp.cylinder import build_tensor
from fracocp.mesh import BaseMesh, make_lshape, make_unit_interval


def test_fmt_17_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert float(io.fmt(np.pi)) == np.pi
    assert io.fmt(3) == "3" and io.fmt(np.int64(7)) == "7" and io.fmt(True) == "1"


@pytest.mark.parametrize("base", [make_lshape(3), make_unit_interval(4)], ids=["2d", "1d"])
def test_mesh_round_trip(tmp_path, base):
    io.write_mesh(tmp_path / "m.txt", base)
    back = io.read_mesh(tmp_path / "m.txt")
    assert np.array_equal(back.vertices, base.vertices)
    assert np.array_equal(back.cells, base.cells)


def test_mesh_file_layout(tmp_path):
    io.write_mesh(tmp_path / "m.txt", make_lshape(0))
    lines = (tmp_path / "m.txt").read_text().splitlines()
    assert lines[0] == "vertices 8 2"
    assert lines[9] == "cells 6"
    assert all(len(ln.split()) == 5 and ln.endswith(" 0") for ln in lines[10:])


def test_refinement_edge_rotation(tmp_path):
    # the same triangle with its refinement edge recorded at local index 1
    (tmp_path / "m.txt").write_text(
        "vertices 3 2\n0 0 0\n1 1 0\n2 0 1\ncells 1\n0 2 0 1 1\n")
    base = io.read_mesh(tmp_path / "m.txt")
    assert list(base.cells[0]) == [0, 1, 2]
    ref = BaseMesh(np.array([[0, 0], [1, 0], [0, 1.0]]), [[0, 1, 2]])
    assert np.array_equal(base.bisect([0]).vertices, ref.bisect([0]).vertices)


@pytest.mark.parametrize("text", ["cells 1\n", "vertices 3 2\n0 0 0\n", "vertices 2 2\n1 0 0\n0 1 1\ncells 0\n"])
def test_malformed_mesh(tmp_path, text):
    (tmp_path / "m.txt").write_text(text)
    with pytest.raises(ValueError):
        io.read_mesh(tmp_path / "m.txt")


def _sections(text):
    return {ln.split()[0]: i for i, ln in enumerate(text.splitlines())
            if ln and ln.split()[0] in ("POINTS", "CELLS", "CELL_TYPES", "CELL_DATA", "POINT_DATA")}


def test_vtk_base(tmp_path):
    base = make_lshape(1)
    io.write_vtk_base(tmp_path / "b.vtk", base, {"u": np.arange(base.n_vertices)},
                      {"z": np.ones(base.n_cells)})
    text = (tmp_path / "b.vtk").read_text()
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and lines[2] == "ASCII"
    sec = _sections(text)
    assert lines[sec["POINTS"]] == f"POINTS {base.n_vertices} double"
    assert lines[sec["CELLS"]] == f"CELLS {base.n_cells} {4 * base.n_cells}"
    types = lines[sec["CELL_TYPES"] + 1: sec["CELL_TYPES"] + 1 + base.n_cells]
    assert set(types) == {"5"}
    assert lines[sec["CELL_DATA"]] == f"CELL_DATA {base.n_cells}"
    assert "SCALARS z double 1" in lines and "SCALARS u double 1" in lines


def test_vtk_field_size_checked(tmp_path):
    base = make_lshape(0)
    with pytest.raises(ValueError):
        io.write_vtk_base(tmp_path / "b.vtk", base, cell_data={"z": [1.0]})


def test_vtk_cylinder_wedges(tmp_path):
    mesh = build_tensor(make_lshape(0), 0.5)
    io.write_vtk_cylinder(tmp_path / "c.vtk", mesh, {"v": np.zeros(mesh.n_nodes)})
    lines = (tmp_path / "c.vtk").read_text().splitlines()
    sec = _sections("\n".join(lines))
    assert lines[sec["POINTS"]] == f"POINTS {mesh.n_nodes} double"
    assert lines[sec["CELLS"]] == f"CELLS {mesh.n_cells} {7 * mesh.n_cells}"
    first = [int(t) for t in lines[sec["CELLS"] + 1].split()]
    nv = mesh.base.n_vertices
    assert first[0] == 6 and first[4:] == [k + nv for k in first[1:4]]
    assert lines[sec["CELL_TYPES"] + 1] == "13"


def test_csv_round_trip(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["i", "x"], [(0, 1 / 3), (1, -2 / 3 * 1e-300)])
    text = (tmp_path / "t.csv").read_text()
    assert text == "i,x\n0,0.33333333333333331\n1,-6.6666666666666668e-301\n"
    rows = io.read_csv(tmp_path / "t.csv")
    assert float(rows[0]["x"]) == 1 / 3
