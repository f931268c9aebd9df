"""Star-based a posteriori estimator for the discrete optimality system.

For every interior base node ``z'`` two local problems are solved on the
cylindrical star ``C_z' = S_z' x (0, Y)`` in the enriched space

    W(C_z') = {P2 + cubic bubble on each triangle} x {P2 on each subinterval},

with zero values on the lateral and top boundary of the star. The local
stiffness keeps the tensor structure ``(1/d_s)(kron(My, Kx) + kron(Ky, Mx))``;
a generalized eigendecomposition of the small pair ``(Kx, Mx)`` turns each
local solve into a set of pentadiagonal systems in ``y``, which are handed to
a single banded Cholesky call.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .assembly import P1_BASIS, P2_BASIS, evaluate_data, local_y_matrices
from .control import ControlField
from .cylinder import normalization_constant
from .quadrature import interval_rule, triangle_rule


# -- local bases ---------------------------------------------------------------

def _local_basis(dim, enrich):
    """Values and barycentric derivatives of the local x-basis.

    Returns ``(kinds, values, derivs)`` where ``kinds[n]`` is ``("v", i)`` for
    the function attached to local vertex ``i``, ``("e", i)`` for the edge
    opposite vertex ``i`` and ``("c", 0)`` for the cell-interior function.
    ``values(lam)`` has shape ``(q, n)``; ``derivs(lam)`` has shape
    ``(q, n, dim + 1)``.
    """
    nv = dim + 1
    if not enrich:
        def values(lam):
            return lam.copy()

        def derivs(lam):
            return np.broadcast_to(np.eye(nv), (len(lam), nv, nv)).copy()

        return [("v", i) for i in range(nv)], values, derivs
    if dim == 1:
        kinds = [("v", 0), ("v", 1), ("c", 0)]

        def values(lam):
            l0, l1 = lam[:, 0], lam[:, 1]
            return np.column_stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), 4 * l0 * l1])

        def derivs(lam):
            l0, l1 = lam[:, 0], lam[:, 1]
            d = np.zeros((len(lam), 3, 2))
            d[:, 0, 0] = 4 * l0 - 1
            d[:, 1, 1] = 4 * l1 - 1
            d[:, 2, 0] = 4 * l1
            d[:, 2, 1] = 4 * l0
            return d

        return kinds, values, derivs
    kinds = [("v", 0), ("v", 1), ("v", 2), ("e", 0), ("e", 1), ("e", 2), ("c", 0)]

    def values(lam):
        out = np.empty((len(lam), 7))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            out[:, i] = lam[:, i] * (2 * lam[:, i] - 1)
            out[:, 3 + i] = 4 * lam[:, j] * lam[:, k]
        out[:, 6] = 27 * lam[:, 0] * lam[:, 1] * lam[:, 2]
        return out

    def derivs(lam):
        d = np.zeros((len(lam), 7, 3))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            d[:, i, i] = 4 * lam[:, i] - 1
            d[:, 3 + i, j] = 4 * lam[:, k]
            d[:, 3 + i, k] = 4 * lam[:, j]
            d[:, 6, i] = 27 * lam[:, j] * lam[:, k]
        return d

    return kinds, values, derivs


def _reference_points(dim, degree):
    if dim == 2:
        return triangle_rule(degree)
    t, w = interval_rule(degree)
    return np.column_stack([1.0 - t, t]), w


@dataclass
class _CellBlocks:
    """Per-cell x-matrices of the local space (``n`` functions per cell)."""

    kinds: list
    K: np.ndarray          # (T, n, n) stiffness
    M: np.ndarray          # (T, n, n) mass
    K_p1: np.ndarray       # (T, n, d+1) stiffness against P1 hats
    M_p1: np.ndarray       # (T, n, d+1) mass against P1 hats
    ones: np.ndarray       # (T, n) integral of each function


def _cell_blocks(base, enrich):
    dim = base.dim
    kinds, values, derivs = _local_basis(dim, enrich)
    lam, w = _reference_points(dim, 6)
    phi = values(lam)                                   # (q, n)
    dphi = derivs(lam)                                  # (q, n, d+1)
    grad = np.einsum("qnl,tld->tqnd", dphi, base.gradients)
    wq = base.measures[:, None] * w[None, :]            # (T, q)
    K = np.einsum("tq,tqnd,tqmd->tnm", wq, grad, grad)
    M = np.einsum("tq,qn,qm->tnm", wq, phi, phi)
    K_p1 = np.einsum("tq,tqnd,tld->tnl", wq, grad, base.gradients)
    M_p1 = np.einsum("tq,qn,ql->tnl", wq, phi, lam)
    ones = np.einsum("tq,qn->tn", wq, phi)
    return _CellBlocks(kinds, K, M, K_p1, M_p1, ones)


def _data_moments(base, kinds_values, data, degree=7):
    """``int_K f psi_n`` for scalar data by a rule exact to ``degree``."""
    values = kinds_values
    lam, w = _reference_points(base.dim, degree)
    pts = np.einsum("ql,tld->tqd", lam, base.vertices[base.cells])
    f = evaluate_data(data, pts)                        # (T, q)
    wq = base.measures[:, None] * w[None, :]
    return np.einsum("tq,qn->tn", wq * f, values(lam))


# -- y direction ------------------------------------------------------------------

def _p2_y_matrices(mesh):
    """Weighted P2 mass/stiffness (dense, ``2M x 2M``) and P2-vs-P1 blocks.

    P2 unknowns are ordered vertex ``y_k -> 2k``, midpoint ``-> 2k+1``; the
    vertex ``y_M = Y`` carries the Dirichlet condition and is dropped.
    """
    M = mesh.M
    nodes = mesh.interval.nodes
    m22, k22 = local_y_matrices(nodes, mesh.alpha, P2_BASIS, P2_BASIS)
    m21, k21 = local_y_matrices(nodes, mesh.alpha, P2_BASIS, P1_BASIS)
    n = 2 * M + 1
    My = np.zeros((n, n))
    Ky = np.zeros((n, n))
    My_mix = np.zeros((n, M + 1))
    Ky_mix = np.zeros((n, M + 1))
    # local P2 order is (left vertex, midpoint, right vertex)
    for k in range(M):
        idx = np.array([2 * k, 2 * k + 1, 2 * k + 2])
        My[np.ix_(idx, idx)] += m22[k]
        Ky[np.ix_(idx, idx)] += k22[k]
        My_mix[np.ix_(idx, [k, k + 1])] += m21[k]
        Ky_mix[np.ix_(idx, [k, k + 1])] += k21[k]
    return My[:-1, :-1], Ky[:-1, :-1], My_mix[:-1], Ky_mix[:-1]


def _p1_y_matrices(mesh):
    M = mesh.M
    m11, k11 = local_y_matrices(mesh.interval.nodes, mesh.alpha)
    My = np.zeros((M + 1, M + 1))
    Ky = np.zeros((M + 1, M + 1))
    for k in range(M):
        idx = [k, k + 1]
        My[np.ix_(idx, idx)] += m11[k]
        Ky[np.ix_(idx, idx)] += k11[k]
    return My[:-1, :-1], Ky[:-1, :-1], My[:-1].copy(), Ky[:-1].copy()


def _upper_bands(A, u):
    n = A.shape[0]
    ab = np.zeros((u + 1, n))
    for k in range(u + 1):
        ab[u - k, k:] = np.diagonal(A, k)
    return ab


# -- local problems --------------------------------------------------------------

class StarSpaces:
    """Local enriched spaces on the cylindrical stars of a tensor mesh.

    Parameters
    ----------
    mesh : TensorMesh
    enrich : bool
        ``True`` uses P2 + bubble (x) times P2 (y); ``False`` falls back to
        the P1 x P1 trial space restricted to the star, for which the local
        residuals of a Galerkin solution vanish.
    """

    def __init__(self, mesh, enrich=True):
        self.mesh = mesh
        self.enrich = enrich
        self.base = mesh.base
        self.d_s = normalization_constant(mesh.s)
        self.cells = _cell_blocks(self.base, enrich)
        ymats = _p2_y_matrices(mesh) if enrich else _p1_y_matrices(mesh)
        self.My, self.Ky, self.My_mix, self.Ky_mix = ymats
        self.u = 2 if enrich else 1
        self.my_band = _upper_bands(self.My, self.u)
        self.ky_band = _upper_bands(self.Ky, self.u)
        _, values, _ = _local_basis(self.base.dim, enrich)
        self._values = values

    @property
    def ny(self):
        return self.My.shape[0]

    def dof_map(self, node):
        """Local-space DOF of every (star cell, local function); ``-1`` if fixed."""
        base = self.base
        star = base.star_of(node)
        C = base.cells[star.cells]
        kinds = self.cells.kinds
        dmap = np.full((len(C), len(kinds)), -1, dtype=np.int64)
        outer = np.unique(C[C != node])
        spoke = {int(v): 1 + i for i, v in enumerate(outer)}
        n_edges = len(outer) if base.dim == 2 else 0
        for n, (kind, i) in enumerate(kinds):
            if kind == "v":
                dmap[C[:, i] == node, n] = 0
            elif kind == "e":
                j, k = (i + 1) % 3, (i + 2) % 3
                for r in range(len(C)):
                    if C[r, j] == node:
                        dmap[r, n] = spoke[int(C[r, k])]
                    elif C[r, k] == node:
                        dmap[r, n] = spoke[int(C[r, j])]
            else:
                dmap[:, n] = 1 + n_edges + np.arange(len(C))
        return star, C, dmap

    def _gather(self, dmap, block, nx):
        keep = dmap >= 0
        out = np.zeros((nx, nx))
        r = np.broadcast_to(dmap[:, :, None], block.shape)
        c = np.broadcast_to(dmap[:, None, :], block.shape)
        mask = keep[:, :, None] & keep[:, None, :]
        np.add.at(out, (r[mask], c[mask]), block[mask])
        return out

    def _gather_mixed(self, dmap, C, block, verts, nx):
        col = np.searchsorted(verts, C)                 # (m, d+1)
        out = np.zeros((nx, len(verts)))
        keep = dmap >= 0
        r = np.broadcast_to(dmap[:, :, None], block.shape)
        c = np.broadcast_to(col[:, None, :], block.shape)
        mask = np.broadcast_to(keep[:, :, None], block.shape)
        np.add.at(out, (r[mask], c[mask]), block[mask])
        return out

    def _gather_vector(self, dmap, vals, nx):
        out = np.zeros(nx)
        keep = dmap >= 0
        np.add.at(out, dmap[keep], vals[keep])
        return out

    def local_energies(self, node, fields, loads):
        """Solve ``a_z'(eta, W) = <load, tr W> - a_z'(field, W)`` for each pair.

        ``fields`` are nodal vectors on the tensor mesh and ``loads`` per-cell
        arrays ``(T, n)`` of the x-moments of the trace data. Returns the
        squared weighted energies ``||grad eta||^2_{L2(y^alpha, C_z')}``.
        """
        mesh = self.mesh
        star, C, dmap = self.dof_map(node)
        cb = self.cells
        nx = int(dmap.max()) + 1
        Kx = self._gather(dmap, cb.K[star.cells], nx)
        Mx = self._gather(dmap, cb.M[star.cells], nx)
        verts = np.unique(C)
        Kmix = self._gather_mixed(dmap, C, cb.K_p1[star.cells], verts, nx)
        Mmix = self._gather_mixed(dmap, C, cb.M_p1[star.cells], verts, nx)
        ny = self.ny
        nv_all = self.base.n_vertices
        G = []
        for f, load in zip(fields, loads):
            V = np.asarray(f).reshape(mesh.M + 1, nv_all)[:, verts]
            R = -(self.My_mix @ V @ Kmix.T + self.Ky_mix @ V @ Mmix.T) / self.d_s
            R[0] += self._gather_vector(dmap, load[star.cells], nx)
            G.append(R)
        lam, Q = sla.eigh(Kx, Mx)
        # (1/d)(My H Kx + Ky H Mx) = R with H = W Q^T  <=>  (lam_j My + Ky) w_j = d (R Q)_j
        rhs = np.stack([(self.d_s * (R @ Q)).T.ravel() for R in G], axis=1)
        ab = (lam[None, :, None] * self.my_band[:, None, :]
              + self.ky_band[:, None, :]).reshape(self.u + 1, -1)
        # decouple consecutive eigen-blocks
        for k in range(1, self.u + 1):
            ab[self.u - k].reshape(nx, ny)[:, :k] = 0.0
        W = sla.solveh_banded(ab, rhs, check_finite=False)
        # ||grad eta||^2 = d_s a(eta, eta) = d_s <R, H> = <d_s R Q, W>
        return np.maximum(np.einsum("ij,ij->j", rhs, W), 0.0)


# -- control indicator and oscillation -----------------------------------------

def _p1_square_integral(area, g):
    # int_T g^2 for linear g with vertex values g (last axis)
    return area / ((g.shape[-1]) * (g.shape[-1] + 1)) * (np.sum(g**2, axis=-1)
                                                          + np.sum(g, axis=-1) ** 2)


def _clip_polygon(points, f, level, above):
    """Part of a convex polygon where the linear ``f`` is ``>= level`` (or ``<=``)."""
    sgn = 1.0 if above else -1.0
    out_p, out_f = [], []
    n = len(points)
    for i in range(n):
        p, q = points[i], points[(i + 1) % n]
        fp, fq = f[i], f[(i + 1) % n]
        inside_p = sgn * (fp - level) >= 0
        inside_q = sgn * (fq - level) >= 0
        if inside_p:
            out_p.append(p)
            out_f.append(fp)
        if inside_p != inside_q:
            t = (level - fp) / (fq - fp)
            out_p.append(p + t * (q - p))
            out_f.append(level)
    return out_p, out_f


def _fan_integral(points, g):
    # sum over a fan triangulation of int g^2 (g linear on the polygon)
    total = 0.0
    area_sum = 0.0
    for i in range(1, len(points) - 1):
        a, b, c = points[0], points[i], points[i + 1]
        area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        gv = np.array([g[0], g[i], g[i + 1]])
        total += _p1_square_integral(area, gv)
        area_sum += area
    return total, area_sum


def control_indicator_cells(base, Z, adjoint_trace, mu, a=None, b=None):
    """``E_Z(K)^2 = ||Z - Pi(-tr P / mu)||^2_{L2(K)}`` for every cell, exactly.

    Cells where ``-tr P / mu`` crosses a bound are split along the crossing
    lines; on each piece the integrand is a polynomial of degree two.
    """
    if isinstance(Z, ControlField):
        a = Z.a if a is None else a
        b = Z.b if b is None else b
        z = Z.values
    else:
        z = np.asarray(Z, dtype=float)
    a = -np.inf if a is None else a
    b = np.inf if b is None else b
    f = -np.asarray(adjoint_trace, dtype=float)[base.cells] / mu      # (T, d+1)
    area = base.measures
    below = np.all(f <= a, axis=1)
    above = np.all(f >= b, axis=1)
    inside = np.all((f >= a) & (f <= b), axis=1)
    out = np.empty(base.n_cells)
    out[below] = area[below] * (z[below] - a) ** 2
    out[above] = area[above] * (z[above] - b) ** 2
    mid = inside & ~below & ~above
    out[mid] = _p1_square_integral(area[mid], z[mid, None] - f[mid])
    rest = np.flatnonzero(~(below | above | mid))
    pts = base.vertices[base.cells]
    for t in rest:
        out[t] = _split_cell_integral(pts[t], f[t], z[t], a, b, base.dim)
    return out


def _split_cell_integral(points, f, z, a, b, dim):
    if dim == 1:
        x0, x1 = points[0, 0], points[1, 0]
        f0, f1 = f
        cuts = sorted({0.0, 1.0, *[(lv - f0) / (f1 - f0) for lv in (a, b)
                                   if np.isfinite(lv) and f1 != f0
                                   and 0.0 < (lv - f0) / (f1 - f0) < 1.0]})
        total = 0.0
        for t0, t1 in zip(cuts[:-1], cuts[1:]):
            g0 = z - np.clip(f0 + t0 * (f1 - f0), a, b)
            g1 = z - np.clip(f0 + t1 * (f1 - f0), a, b)
            total += (t1 - t0) * (x1 - x0) / 3.0 * (g0 * g0 + g0 * g1 + g1 * g1)
        return total
    poly = list(points)
    fv = list(f)
    total = 0.0
    # piece below a, piece above b, and the middle piece
    if np.isfinite(a):
        p, _ = _clip_polygon(poly, fv, a, above=False)
        if len(p) >= 3:
            _, area = _fan_integral(p, np.zeros(len(p)))
            total += area * (z - a) ** 2
        poly, fv = _clip_polygon(poly, fv, a, above=True)
    if np.isfinite(b) and len(poly) >= 3:
        p, _ = _clip_polygon(poly, fv, b, above=True)
        if len(p) >= 3:
            _, area = _fan_integral(p, np.zeros(len(p)))
            total += area * (z - b) ** 2
        poly, fv = _clip_polygon(poly, fv, b, above=False)
    if len(poly) >= 3:
        val, _ = _fan_integral(poly, z - np.asarray(fv))
        total += val
    return total


def cell_oscillation(base, data, degree=7):
    """``||f - mean_K f||^2_{L2(K)}`` per cell; ``data`` scalar, callable or nodal."""
    lam, w = _reference_points(base.dim, degree)
    wq = base.measures[:, None] * w[None, :]
    if isinstance(data, np.ndarray) and data.ndim == 1 and len(data) == base.n_vertices:
        fq = data[base.cells] @ lam.T
    else:
        pts = np.einsum("ql,tld->tqd", lam, base.vertices[base.cells])
        fq = evaluate_data(data, pts)
    mean = np.sum(wq * fq, axis=1) / base.measures
    return np.sum(wq * (fq - mean[:, None]) ** 2, axis=1)


# -- report ---------------------------------------------------------------------

@dataclass
class EstimatorReport:
    """Per-star indicators on the interior base nodes (sorted by node id)."""

    nodes: np.ndarray
    E_V: np.ndarray
    E_P: np.ndarray
    E_Z: np.ndarray
    osc: np.ndarray
    cell_E_Z2: np.ndarray = field(repr=False)
    cell_osc2: np.ndarray = field(repr=False)

    @property
    def E_ocp(self):
        return self.E_V + self.E_P + self.E_Z

    @property
    def total(self):
        return total_indicator(self.E_V, self.E_P, self.E_Z, self.osc)

    def global_value(self, name):
        """l2 aggregate over stars of ``E_V``, ``E_P``, ``E_Z``, ``osc`` or ``total``."""
        vals = getattr(self, name)
        return float(np.sqrt(np.sum(np.asarray(vals) ** 2)))

    def to_elementwise(self, base, values=None):
        return to_elementwise(base, self.nodes, self.E_ocp ** 2 if values is None else values)


def total_indicator(E_V, E_P, E_Z, osc):
    """``sqrt((E_V + E_P + E_Z)^2 + osc^2)`` star by star."""
    e = np.asarray(E_V) + np.asarray(E_P) + np.asarray(E_Z)
    return np.sqrt(e**2 + np.asarray(osc) ** 2)


def to_elementwise(base, nodes, star_values):
    """Distribute squared star values to cells: ``sum_{z' in K} E^2(C_z') / #S_z'``."""
    out = np.zeros(base.n_cells)
    indptr, cells = base.vertex_cells
    sizes = base.star_sizes
    for z, v in zip(np.asarray(nodes), np.asarray(star_values, dtype=float)):
        out[cells[indptr[z]:indptr[z + 1]]] += v / sizes[z]
    return out


def _star_sums(base, nodes, cell_values):
    indptr, cells = base.vertex_cells
    return np.array([cell_values[cells[indptr[z]:indptr[z + 1]]].sum() for z in nodes])


def estimate(mesh, V, P, Z, u_d, mu, enrich=True, nodes=None):
    """Compute all per-star indicators for the discrete triple ``(V, P, Z)``.

    Parameters
    ----------
    mesh : TensorMesh
    V, P : ndarray
        State and adjoint over all tensor-mesh nodes.
    Z : ControlField
    u_d : float, callable or nodal array
    mu : float
    enrich : bool
        Use the enriched local spaces (default) or the P1 x P1 ones.
    nodes : array_like, optional
        Interior nodes to evaluate (all interior nodes by default).

    Returns
    -------
    EstimatorReport
    """
    base = mesh.base
    nodes = base.interior_nodes if nodes is None else np.sort(np.asarray(nodes))
    spaces = StarSpaces(mesh, enrich)
    cb = spaces.cells
    tv = np.asarray(V)[:base.n_vertices]
    tp = np.asarray(P)[:base.n_vertices]
    load_V = cb.ones * Z.values[:, None]
    nodal_ud = isinstance(u_d, np.ndarray) and u_d.ndim == 1 and len(u_d) == base.n_vertices
    if nodal_ud:
        ud_mom = np.einsum("tnl,tl->tn", cb.M_p1, u_d[base.cells])
    else:
        ud_mom = _data_moments(base, spaces._values, u_d if callable(u_d) else float(u_d))
    load_P = np.einsum("tnl,tl->tn", cb.M_p1, tv[base.cells]) - ud_mom
    ev2 = np.empty(len(nodes))
    ep2 = np.empty(len(nodes))
    for i, z in enumerate(nodes):
        ev2[i], ep2[i] = spaces.local_energies(z, (V, P), (load_V, load_P))
    cell_ez2 = control_indicator_cells(base, Z, tp, mu)
    ez = np.sqrt(_star_sums(base, nodes, cell_ez2))
    osc_ud = cell_oscillation(base, u_d if nodal_ud or callable(u_d) else float(u_d))
    osc_v = cell_oscillation(base, tv)
    hz = base.node_h[nodes]
    osc = hz**mesh.s * (np.sqrt(_star_sums(base, nodes, osc_ud))
                        + np.sqrt(_star_sums(base, nodes, osc_v)))
    hk = base.diameters ** mesh.s
    cell_osc2 = (hk * (np.sqrt(osc_ud) + np.sqrt(osc_v))) ** 2
    return EstimatorReport(np.asarray(nodes), np.sqrt(ev2), np.sqrt(ep2), ez, osc,
                           cell_ez2, cell_osc2)


def efficiency_constant(d_s, mu):
    """``max{2/d_s, d_s^-1/2 (1/mu + d_s^-1/2), 1 + d_s^-1/2}``."""
    r = d_s ** -0.5
    return max(2.0 / d_s, r * (1.0 / mu + r), 1.0 + r)
