"""Plain-text mesh files, legacy ASCII VTK output and CSV tables.

Mesh text format::

    vertices <N> <dim>
    <index> <x> [<y>]
    ...
    cells <T>
    <index> <v0> <v1> [<v2>] <refEdge>

``refEdge`` is the local index of the refinement edge; it is always 0 for
meshes written here because the refinement edge is stored opposite the first
vertex. Reading accepts any local index and rotates the cell accordingly.
"""
import csv
from pathlib import Path

import numpy as np

from .mesh import BaseMesh

VTK_LINE, VTK_TRIANGLE, VTK_WEDGE, VTK_QUAD = 3, 5, 13, 9


def fmt(x):
    """Floats with 17 significant digits; integers unchanged."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


# -- mesh text format -------------------------------------------------------------

def write_mesh(path, base):
    lines = [f"vertices {base.n_vertices} {base.dim}"]
    for i, v in enumerate(base.vertices):
        lines.append(" ".join([str(i)] + [fmt(c) for c in v]))
    lines.append(f"cells {base.n_cells}")
    for i, c in enumerate(base.cells):
        lines.append(" ".join(str(int(k)) for k in (i, *c, 0)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    """Inverse of :func:`write_mesh`; raises ``ValueError`` on malformed input."""
    tokens = [ln.split() for ln in Path(path).read_text().splitlines()
              if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        head = tokens[0]
        if head[0] != "vertices":
            raise ValueError("expected a 'vertices' header")
        nv, dim = int(head[1]), int(head[2])
        verts = np.array([[float(t) for t in row[1:1 + dim]] for row in tokens[1:1 + nv]])
        ids = [int(row[0]) for row in tokens[1:1 + nv]]
        chead = tokens[1 + nv]
        if chead[0] != "cells":
            raise ValueError("expected a 'cells' header")
        nc = int(chead[1])
        rows = tokens[2 + nv:2 + nv + nc]
        if len(rows) != nc or verts.shape != (nv, dim):
            raise ValueError("truncated mesh file")
        cells = []
        for row in rows:
            c = [int(t) for t in row[1:2 + dim]]
            ref = int(row[2 + dim]) if len(row) > 2 + dim else 0
            if dim == 2:
                c = c[ref:] + c[:ref]
            cells.append(c)
    except (IndexError, TypeError) as exc:
        raise ValueError(f"malformed mesh file {path}: {exc}") from None
    if ids != list(range(nv)):
        raise ValueError("vertex indices must run 0..N-1 in order")
    return BaseMesh(verts, cells)


# -- legacy VTK ----------------------------------------------------------------------

def _points3(vertices, y=None):
    pts = np.zeros((len(vertices), 3))
    pts[:, :vertices.shape[1]] = vertices
    if y is not None:
        pts[:, vertices.shape[1]] = y
    return pts


def _write_vtk(path, title, points, cells, cell_type, point_data=None, cell_data=None):
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {len(points)} double"]
    out += [" ".join(fmt(c) for c in p) for p in points]
    n = cells.shape[1]
    out.append(f"CELLS {len(cells)} {len(cells) * (n + 1)}")
    out += [" ".join(str(int(k)) for k in (n, *c)) for c in cells]
    out.append(f"CELL_TYPES {len(cells)}")
    out += [str(cell_type)] * len(cells)
    for kind, data, count in (("CELL_DATA", cell_data, len(cells)),
                              ("POINT_DATA", point_data, len(points))):
        if not data:
            continue
        out.append(f"{kind} {count}")
        for name, values in data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (count,):
                raise ValueError(f"field {name!r} has {values.size} values, expected {count}")
            out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            out += [fmt(v) for v in values]
    Path(path).write_text("\n".join(out) + "\n")


def write_vtk_base(path, base, point_data=None, cell_data=None, title="base mesh"):
    """Triangles (or lines for 1D meshes) with optional scalar fields."""
    kind = VTK_TRIANGLE if base.dim == 2 else VTK_LINE
    _write_vtk(path, title, _points3(base.vertices), base.cells, kind, point_data, cell_data)


def write_vtk_cylinder(path, mesh, point_data=None, title="cylinder mesh"):
    """Wedges ``K x I`` (quads for 1D base meshes); ``y`` is the last coordinate."""
    base = mesh.base
    nv = base.n_vertices
    y = mesh.interval.nodes
    pts = np.vstack([_points3(base.vertices, yk) for yk in y])
    lower = (np.arange(mesh.M)[:, None, None] * nv + base.cells[None]).reshape(-1, base.dim + 1)
    upper = lower + nv
    if base.dim == 2:
        cells, kind = np.hstack([lower, upper]), VTK_WEDGE
    else:
        cells, kind = np.column_stack([lower[:, 0], lower[:, 1], upper[:, 1], upper[:, 0]]), VTK_QUAD
    _write_vtk(path, title, pts, cells, kind, point_data)


# -- CSV -----------------------------------------------------------------------------

def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """Rows as dicts of strings, in file order."""
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_control_csv(path, values):
    write_csv(path, ["cell", "value"], enumerate(np.asarray(values, dtype=float)))


def write_estimator_csv(path, report):
    rows = zip(report.nodes, report.E_V, report.E_P, report.E_Z, report.osc, report.total)
    write_csv(path, ["node", "E_V", "E_P", "E_Z", "osc", "total"], rows)


def write_element_csv(path, base, report):
    rows = zip(range(base.n_cells), report.to_elementwise(base), report.cell_osc2)
    write_csv(path, ["cell", "E2", "osc2"], rows)


def write_nodal_csv(path, columns):
    """One row per node with the given named columns (equal lengths)."""
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    write_csv(path, ["node"] + names, zip(range(len(cols[0])), *cols))
