"""Assembly of the weighted form ``a_Y`` and trace loads on ``P1 x P1``.

The stiffness matrix factorizes over the tensor structure,

    A = (1/d_s) * (kron(My, Kx) + kron(Ky, Mx)),

with ``Kx, Mx`` the P1 stiffness/mass matrices of the base mesh and
``My, Ky`` the weighted 1D mass/stiffness matrices of the graded partition.
Every y-integral goes through :func:`~fracocp.quadrature.shifted_moments`, so
assembly is exact up to roundoff.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .control import ControlField
from .quadrature import shifted_moments, triangle_rule, interval_rule


def base_quadrature(base, degree):
    """Physical quadrature on every base cell.

    Returns ``(bary, points, weights)`` with shapes ``(q, d+1)``,
    ``(T, q, d)`` and ``(T, q)``; ``weights`` already include cell measures.
    """
    if base.dim == 2:
        bary, w = triangle_rule(degree)
    else:
        t, w = interval_rule(degree)
        bary = np.column_stack([1.0 - t, t])
    p = base.vertices[base.cells]                       # (T, d+1, d)
    points = np.einsum("qi,tid->tqd", bary, p)
    weights = base.measures[:, None] * w[None, :]
    return bary, points, weights


def evaluate_data(data, points):
    """Evaluate scalar data (constant or vectorized callable) at ``points``."""
    if callable(data):
        shape = points.shape[:-1]
        vals = np.asarray(data(points.reshape(-1, points.shape[-1])), dtype=float)
        return np.broadcast_to(vals, (int(np.prod(shape)),)).reshape(shape)
    return np.full(points.shape[:-1], float(data))


def p1_matrices(base):
    """P1 stiffness and mass matrices ``(Kx, Mx)`` of the base mesh (CSR)."""
    T, nloc = base.cells.shape
    g = base.gradients
    area = base.measures
    k_loc = np.einsum("tid,tjd->tij", g, g) * area[:, None, None]
    d = base.dim
    # int_K lambda_i lambda_j = |K| (1 + delta_ij) / ((d+1)(d+2))
    m_ref = (np.ones((nloc, nloc)) + np.eye(nloc)) / ((d + 1) * (d + 2))
    m_loc = area[:, None, None] * m_ref[None]
    rows = np.repeat(base.cells, nloc, axis=1).ravel()
    cols = np.tile(base.cells, (1, nloc)).ravel()
    n = base.n_vertices
    Kx = sp.csr_matrix((k_loc.ravel(), (rows, cols)), shape=(n, n))
    Mx = sp.csr_matrix((m_loc.ravel(), (rows, cols)), shape=(n, n))
    return Kx, Mx


# Lagrange bases on [0, 1] as coefficient rows in powers of t
P1_BASIS = np.array([[1.0, -1.0], [0.0, 1.0]])
P2_BASIS = np.array([[1.0, -3.0, 2.0], [0.0, 4.0, -4.0], [0.0, -1.0, 2.0]])


def _derivative(coef):
    n = coef.shape[1]
    return coef[:, 1:] * np.arange(1, n)[None, :]


def _product_moments(ca, cb, nu):
    # int y^alpha p_a(t) p_b(t) dy for coefficient rows ca, cb
    prod = np.zeros((ca.shape[0], cb.shape[0], ca.shape[1] + cb.shape[1] - 1))
    for i in range(ca.shape[1]):
        for j in range(cb.shape[1]):
            prod[:, :, i + j] += np.outer(ca[:, i], cb[:, j])
    return np.einsum("abj,nj->nab", prod, nu[:, :prod.shape[2]])


def local_y_matrices(nodes, alpha, test=P1_BASIS, trial=P1_BASIS):
    """Per-interval weighted mass and stiffness blocks.

    Returns arrays of shape ``(M, n_test, n_trial)``:
    ``int_I y**alpha phi_a phi_b`` and ``int_I y**alpha phi_a' phi_b'``.
    """
    y0, y1 = nodes[:-1], nodes[1:]
    h = y1 - y0
    deg = test.shape[1] + trial.shape[1] - 2
    nu = shifted_moments(alpha, y0, y1, deg)
    mass = _product_moments(test, trial, nu)
    stiff = _product_moments(_derivative(test), _derivative(trial), nu) / (h**2)[:, None, None]
    return mass, stiff


def y_matrices(interval, alpha):
    """Global weighted P1 mass/stiffness on the graded partition (CSR, M+1)."""
    mass, stiff = local_y_matrices(interval.nodes, alpha)
    M = interval.M
    k = np.arange(M)
    rows = np.stack([k, k, k + 1, k + 1], axis=1).ravel()
    cols = np.stack([k, k + 1, k, k + 1], axis=1).ravel()
    My = sp.csr_matrix((mass.reshape(M, 4).ravel(), (rows, cols)), shape=(M + 1, M + 1))
    Ky = sp.csr_matrix((stiff.reshape(M, 4).ravel(), (rows, cols)), shape=(M + 1, M + 1))
    return My, Ky


@dataclass
class SparseSystem:
    """Stiffness matrix of ``a_Y`` restricted to free nodes.

    ``matrix[i, j] = a_Y(phi_free[j], phi_free[i])``; vectors over all
    nodes are mapped with :meth:`restrict` and :meth:`extend`.
    """

    mesh: object
    matrix: sp.csr_matrix
    free: np.ndarray
    Kx: sp.csr_matrix
    Mx: sp.csr_matrix
    My: sp.csr_matrix
    Ky: sp.csr_matrix

    @property
    def dimension(self):
        return len(self.free)

    def restrict(self, full):
        return np.asarray(full)[self.free]

    def extend(self, reduced):
        out = np.zeros(self.mesh.n_nodes)
        out[self.free] = reduced
        return out

    @cached_property
    def full_matrix(self):
        d = self.mesh.d_s
        return ((sp.kron(self.My, self.Kx) + sp.kron(self.Ky, self.Mx)) / d).tocsr()

    def energy(self, full):
        """``a_Y(w, w)`` for a nodal vector over all nodes."""
        w = np.asarray(full)
        return float(w @ (self.full_matrix @ w))


def assemble_stiffness(mesh):
    """Assemble ``a_Y`` on the free nodes of ``mesh`` (a TensorMesh)."""
    Kx, Mx = p1_matrices(mesh.base)
    My, Ky = y_matrices(mesh.interval, mesh.alpha)
    free = mesh.free_nodes
    A = ((sp.kron(My, Kx, format="csr") + sp.kron(Ky, Mx, format="csr")) / mesh.d_s)
    A = A[free][:, free].tocsr()
    A.sort_indices()
    return SparseSystem(mesh, A, free, Kx, Mx, My, Ky)


def trace_load_base(base, g, degree=4):
    """``(g, phi_z')_{L2(Omega)}`` for every base vertex.

    ``g`` may be a :class:`ControlField` (piecewise constant, exact), a
    nodal P1 vector (exact), a constant, or a vectorized callable
    (quadrature exact for polynomials of ``degree``).
    """
    n = base.n_vertices
    nloc = base.cells.shape[1]
    if isinstance(g, ControlField):
        vals = np.asarray(g.values, dtype=float)
        contrib = np.repeat(vals * base.measures / nloc, nloc)
        return np.bincount(base.cells.ravel(), contrib, minlength=n)
    if callable(g):
        bary, pts, w = base_quadrature(base, degree)
        f = evaluate_data(g, pts)                          # (T, q)
        contrib = np.einsum("tq,qi->ti", f * w, bary)
        return np.bincount(base.cells.ravel(), contrib.ravel(), minlength=n)
    arr = np.asarray(g, dtype=float)
    if arr.ndim == 0:
        return trace_load_base(base, ControlField(np.full(base.n_cells, float(arr))))
    if arr.shape != (n,):
        raise ValueError("nodal trace data must have one value per base vertex")
    _, Mx = p1_matrices(base)
    return Mx @ arr


def assemble_trace_load(mesh, g, degree=4):
    """Load vector ``F_i = (g, tr phi_i)`` over all nodes of ``mesh``."""
    F = np.zeros(mesh.n_nodes)
    F[:mesh.base.n_vertices] = trace_load_base(mesh.base, g, degree)
    return F


def trace_of(mesh, field):
    """Restriction of a nodal field on ``T_Y`` to the plane ``y = 0``."""
    field = np.asarray(field)
    if field.shape != (mesh.n_nodes,):
        raise ValueError("field does not match the tensor mesh")
    return field[:mesh.base.n_vertices].copy()


def write_coo(path, matrix):
    """Dump a sparse matrix as ``row col value`` lines."""
    coo = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
