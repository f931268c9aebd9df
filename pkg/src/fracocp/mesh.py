"""Conforming simplicial base meshes with newest-vertex bisection.

Two-dimensional meshes store each triangle as ``(newest, b, c)``: the
refinement edge is ``(b, c)``, opposite local vertex 0, and vertices are
ordered counter-clockwise. One-dimensional meshes (intervals) share the same
interface so that the tensor-product machinery works for ``n = 1`` and
``n = 2`` alike.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Star:
    """Triangles (or intervals) incident to a node."""

    center: int
    cells: np.ndarray
    h: float

    def __len__(self):
        return len(self.cells)


class BaseMesh:
    """Simplicial mesh of a polytopal domain in one or two dimensions.

    Parameters
    ----------
    vertices : array_like, shape (N, d)
    cells : array_like of int, shape (T, d + 1)
        For ``d = 2`` the refinement edge of each triangle is the edge
        opposite its first vertex.
    generation : array_like of int, optional
        Number of bisections separating each cell from the initial mesh.
    parent : array_like of int, optional
        Index of the cell in the previous mesh each cell was produced from.
    """

    def __init__(self, vertices, cells, generation=None, parent=None):
        vertices = np.array(vertices, dtype=float)
        if vertices.ndim == 1:
            vertices = vertices[:, None]
        cells = np.array(cells, dtype=np.int64)
        dim = vertices.shape[1]
        if dim not in (1, 2) or cells.shape[1] != dim + 1:
            raise ValueError("only interval and triangle meshes are supported")
        if dim == 1:
            # orient intervals left to right
            swap = vertices[cells[:, 0], 0] > vertices[cells[:, 1], 0]
            cells[swap] = cells[swap][:, ::-1]
        self.vertices = vertices
        self.cells = cells
        n = len(cells)
        self.generation = (np.zeros(n, dtype=np.int64) if generation is None
                           else np.asarray(generation, dtype=np.int64))
        self.parent = (np.arange(n, dtype=np.int64) if parent is None
                       else np.asarray(parent, dtype=np.int64))
        for arr in (self.vertices, self.cells, self.generation, self.parent):
            arr.setflags(write=False)
        if np.any(self.signed_measures <= 0):
            raise ValueError("cells must have positive signed measure")

    def __repr__(self):
        kind = "Triangle" if self.dim == 2 else "Interval"
        return f"{kind}Mesh({self.n_vertices} vertices, {self.n_cells} cells)"

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    # geometry ---------------------------------------------------------------

    @cached_property
    def signed_measures(self):
        p = self.vertices[self.cells]
        if self.dim == 1:
            return p[:, 1, 0] - p[:, 0, 0]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def measures(self):
        """Cell areas (lengths in 1D)."""
        return self.signed_measures

    @cached_property
    def diameters(self):
        """``h_K``: the longest edge of each cell."""
        if self.dim == 1:
            return self.measures.copy()
        p = self.vertices[self.cells]
        lengths = np.stack([np.linalg.norm(p[:, (i + 1) % 3] - p[:, (i + 2) % 3], axis=1)
                            for i in range(3)], axis=1)
        return lengths.max(axis=1)

    @cached_property
    def barycenters(self):
        return self.vertices[self.cells].mean(axis=1)

    @cached_property
    def gradients(self):
        """Gradients of the barycentric coordinates, shape ``(T, d+1, d)``."""
        p = self.vertices[self.cells]
        if self.dim == 1:
            inv = 1.0 / self.measures
            return np.stack([-inv, inv], axis=1)[:, :, None]
        x, y = p[..., 0], p[..., 1]
        two_area = 2.0 * self.measures
        g = np.empty((self.n_cells, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            g[:, i, 0] = (y[:, j] - y[:, k]) / two_area
            g[:, i, 1] = (x[:, k] - x[:, j]) / two_area
        return g

    # topology ---------------------------------------------------------------

    @cached_property
    def _edge_data(self):
        # edge i of a triangle is opposite local vertex i
        c = self.cells
        local = np.stack([c[:, [1, 2]], c[:, [2, 0]], c[:, [0, 1]]], axis=1)
        flat = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(flat, axis=0, return_inverse=True,
                                           return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self):
        """Unique edges as sorted vertex pairs (2D only)."""
        return self._edge_data[0]

    @property
    def cell_edges(self):
        """Edge ids per triangle; entry ``i`` is the edge opposite vertex ``i``."""
        return self._edge_data[1]

    @property
    def edge_cell_counts(self):
        return self._edge_data[2]

    @cached_property
    def boundary_vertices(self):
        """Boolean mask of vertices lying on the domain boundary."""
        mask = np.zeros(self.n_vertices, dtype=bool)
        if self.dim == 1:
            counts = np.bincount(self.cells.ravel(), minlength=self.n_vertices)
            mask[counts == 1] = True
        else:
            mask[self.edges[self.edge_cell_counts == 1].ravel()] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def interior_nodes(self):
        return np.flatnonzero(~self.boundary_vertices)

    @cached_property
    def vertex_cells(self):
        """CSR-style incidence ``(indptr, cells)`` sorted by vertex then cell."""
        flat = self.cells.ravel()
        owner = np.repeat(np.arange(self.n_cells), self.cells.shape[1])
        order = np.lexsort((owner, flat))
        indptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        np.cumsum(np.bincount(flat, minlength=self.n_vertices), out=indptr[1:])
        return indptr, owner[order]

    @cached_property
    def node_h(self):
        """``h_z' = min{h_K : K contains z'}`` for every vertex."""
        h = np.full(self.n_vertices, np.inf)
        np.minimum.at(h, self.cells.ravel(), np.repeat(self.diameters, self.cells.shape[1]))
        return h

    @cached_property
    def star_sizes(self):
        return np.diff(self.vertex_cells[0])

    def star_of(self, node):
        """Return the star (incident cells and ``h_z'``) of a vertex."""
        node = int(node)
        if not 0 <= node < self.n_vertices:
            raise IndexError(f"node {node} is not a vertex of this mesh")
        indptr, cells = self.vertex_cells
        members = cells[indptr[node]:indptr[node + 1]]
        return Star(node, members, float(self.diameters[members].min()))

    @cached_property
    def boundary_length(self):
        """Measure of the domain boundary (number of endpoints in 1D)."""
        if self.dim == 1:
            return float(self.boundary_vertices.sum())
        e = self.edges[self.edge_cell_counts == 1]
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).sum())

    def is_conforming(self, boundary_length=None):
        """Audit: every edge has one or two triangles and no hanging nodes.

        A hanging node splits a would-be interior edge into boundary-like
        edges, which shows up as excess boundary length, so the audit
        compares against ``boundary_length`` when given.
        """
        if self.dim == 1:
            return bool(self.boundary_vertices.sum() == 2)
        if np.any(self.edge_cell_counts > 2):
            return False
        if boundary_length is not None:
            return bool(abs(self.boundary_length - boundary_length) <= 1e-10 * boundary_length)
        return True

    # refinement -------------------------------------------------------------

    def bisect(self, marked):
        """Refine by newest-vertex bisection with conforming closure.

        Every marked cell is bisected at least once; further bisections are
        added until no hanging node remains. ``parent`` of the returned mesh
        points into this mesh.
        """
        marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset))
                                      else marked, dtype=np.int64))
        if marked.size and (marked[0] < 0 or marked[-1] >= self.n_cells):
            raise IndexError("marked cell index out of range")
        if marked.size == 0:
            return self
        if self.dim == 1:
            return self._bisect_intervals(marked)
        return self._bisect_triangles(marked)

    def refine_uniform(self, levels=1):
        mesh = self
        for _ in range(levels):
            mesh = mesh.bisect(np.arange(mesh.n_cells))
        return mesh

    def _bisect_intervals(self, marked):
        split = np.zeros(self.n_cells, dtype=bool)
        split[marked] = True
        c = self.cells
        new_ids = self.n_vertices + np.arange(split.sum())
        mids = 0.5 * (self.vertices[c[split, 0]] + self.vertices[c[split, 1]])
        mid_of = np.full(self.n_cells, -1)
        mid_of[split] = new_ids
        out, par, gen = [], [], []
        for k in range(self.n_cells):
            if split[k]:
                m = mid_of[k]
                out += [(c[k, 0], m), (m, c[k, 1])]
                par += [k, k]
                gen += [self.generation[k] + 1] * 2
            else:
                out.append(tuple(c[k]))
                par.append(k)
                gen.append(self.generation[k])
        return BaseMesh(np.vstack([self.vertices, mids]), out, gen, par)

    def _bisect_triangles(self, marked):
        ce = self.cell_edges
        ref = ce[:, 0]
        edge_marked = np.zeros(len(self.edges), dtype=bool)
        edge_marked[ref[marked]] = True
        # closure: a triangle with any marked edge must bisect its refinement edge
        while True:
            need = edge_marked[ce].any(axis=1) & ~edge_marked[ref]
            if not need.any():
                break
            edge_marked[ref[need]] = True

        mid = np.full(len(self.edges), -1, dtype=np.int64)
        new_edges = np.flatnonzero(edge_marked)
        mid[new_edges] = self.n_vertices + np.arange(new_edges.size)
        e = self.edges[new_edges]
        new_vertices = 0.5 * (self.vertices[e[:, 0]] + self.vertices[e[:, 1]])

        c = self.cells
        a, b, cc = c[:, 0], c[:, 1], c[:, 2]
        idx = np.arange(self.n_cells)
        keep = ~edge_marked[ref]
        pieces = [(idx[keep], np.zeros(keep.sum(), dtype=np.int64), c[keep],
                   self.generation[keep])]
        s = ~keep
        m = mid[ref[s]]
        g1 = self.generation[s] + 1
        # first child (m, a, b) with refinement edge ab (= edge 2 of parent)
        e2 = ce[s, 2]
        split_a = edge_marked[e2]
        child_a = np.column_stack([m, a[s], b[s]])
        m2 = mid[e2]
        pieces.append((idx[s][~split_a], np.full((~split_a).sum(), 1), child_a[~split_a], g1[~split_a]))
        pieces.append((idx[s][split_a], np.full(split_a.sum(), 1),
                       np.column_stack([m2, m, a[s]])[split_a], g1[split_a] + 1))
        pieces.append((idx[s][split_a], np.full(split_a.sum(), 2),
                       np.column_stack([m2, b[s], m])[split_a], g1[split_a] + 1))
        # second child (m, c, a) with refinement edge ca (= edge 1 of parent)
        e1 = ce[s, 1]
        split_b = edge_marked[e1]
        child_b = np.column_stack([m, cc[s], a[s]])
        m3 = mid[e1]
        pieces.append((idx[s][~split_b], np.full((~split_b).sum(), 3), child_b[~split_b], g1[~split_b]))
        pieces.append((idx[s][split_b], np.full(split_b.sum(), 3),
                       np.column_stack([m3, m, cc[s]])[split_b], g1[split_b] + 1))
        pieces.append((idx[s][split_b], np.full(split_b.sum(), 4),
                       np.column_stack([m3, a[s], m])[split_b], g1[split_b] + 1))

        par = np.concatenate([p[0] for p in pieces])
        order_key = np.concatenate([p[1] for p in pieces])
        cells = np.concatenate([p[2].reshape(-1, 3) for p in pieces])
        gen = np.concatenate([p[3] for p in pieces])
        order = np.lexsort((order_key, par))
        return BaseMesh(np.vstack([self.vertices, new_vertices]), cells[order],
                        gen[order], par[order])


def make_lshape(refine_level=0):
    """L-shaped domain ``(-1,1)^2 minus (0,1)x(-1,0)``.

    The initial mesh has 6 right triangles whose hypotenuses (the refinement
    edges) all end at the reentrant corner.
    """
    vertices = [(-1, -1), (0, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
    cells = [(1, 3, 0), (2, 0, 3), (2, 3, 5), (6, 5, 3), (4, 7, 3), (6, 3, 7)]
    return BaseMesh(vertices, cells).refine_uniform(refine_level)


def make_unit_square(refine_level=0):
    """Unit square split along the diagonal from (0,0) to (1,1)."""
    vertices = [(0, 0), (1, 0), (1, 1), (0, 1)]
    cells = [(1, 2, 0), (3, 0, 2)]
    return BaseMesh(vertices, cells).refine_uniform(refine_level)


def make_unit_interval(refine_level=0):
    return BaseMesh([[0.0], [1.0]], [(0, 1)]).refine_uniform(refine_level)


def make_domain(name, refine_level=0):
    builders = {"lshape": make_lshape, "unit-square": make_unit_square,
                "unit-interval": make_unit_interval}
    try:
        return builders[name](refine_level)
    except KeyError:
        raise ValueError(f"unknown domain {name!r}; expected one of {sorted(builders)}") from None


def compose_parents(chain):
    """Compose ``parent`` arrays of a refinement chain ``[m0, m1, ..., mk]``.

    Returns, for every cell of ``mk``, the index of its ancestor in ``m0``.
    """
    anc = np.arange(chain[-1].n_cells)
    for mesh in chain[:0:-1]:
        anc = mesh.parent[anc]
    return anc
