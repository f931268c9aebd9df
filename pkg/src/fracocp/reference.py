"""Comparison of a coarse discrete solution against an overkill one.

The reference lives on a nested refinement: its base mesh descends from the
coarse one by bisection and its graded partition has ``factor * M``
subintervals on the same ``(0, Y)``, so every coarse node is a fine node.
Coarse fields are prolonged by P1 interpolation in ``x'`` and linear
interpolation in ``y``; local errors are then exact on the fine mesh.
"""
from dataclasses import dataclass

import numpy as np

from .assembly import base_quadrature, y_matrices
from .cylinder import build_tensor
from .estimator import control_indicator_cells
from .mesh import compose_parents


@dataclass
class NestedPair:
    """Coarse tensor mesh, nested fine tensor mesh and the cell ancestry."""

    coarse: object
    fine: object
    ancestor: np.ndarray        # fine base cell -> coarse base cell


def nested_pair(coarse, extra_bisections=4, y_factor=4):
    """Refine ``coarse`` uniformly ``extra_bisections`` times and ``M`` by ``y_factor``.

    The fine partition uses the coarse ``Y`` and grading exponent.
    """
    chain = [coarse.base]
    for _ in range(extra_bisections):
        chain.append(chain[-1].bisect(np.arange(chain[-1].n_cells)))
    fine_base = chain[-1]
    offset = coarse.gamma - 3.0 / (2.0 * coarse.s)
    fine = build_tensor(fine_base, coarse.s, Y=coarse.Y, C_Tr=np.inf,
                        gamma_offset=offset, M=y_factor * coarse.M)
    return NestedPair(coarse, fine, compose_parents(chain))


def _barycentric(points, simplex):
    """Barycentric coordinates of ``points`` (k, d) in one simplex (d+1, d)."""
    d = simplex.shape[1]
    T = (simplex[1:] - simplex[0]).T.reshape(d, d)
    lam = np.linalg.solve(T, (points - simplex[0]).T).T
    return np.column_stack([1.0 - lam.sum(axis=1), lam])


def prolong_base(pair, values):
    """P1 interpolation of coarse vertex values onto the fine base vertices."""
    cb, fb = pair.coarse.base, pair.fine.base
    values = np.asarray(values, dtype=float)
    out = np.empty((fb.n_vertices,) + values.shape[1:])
    for t_f, t_c in enumerate(pair.ancestor):
        verts = fb.cells[t_f]
        lam = _barycentric(fb.vertices[verts], cb.vertices[cb.cells[t_c]])
        out[verts] = np.tensordot(lam, values[cb.cells[t_c]], axes=1)
    return out


def prolong_field(pair, field):
    """Interpolate a nodal field of the coarse tensor mesh onto the fine one."""
    c, f = pair.coarse, pair.fine
    U = np.asarray(field, dtype=float).reshape(c.M + 1, c.base.n_vertices)
    # y first: linear interpolation column by column
    yc, yf = c.interval.nodes, f.interval.nodes
    Uy = np.stack([np.interp(yf, yc, U[:, j]) for j in range(U.shape[1])], axis=1)
    Ux = prolong_base(pair, Uy.T)                 # (nv_fine, M_fine + 1)
    return Ux.T.ravel()


def prolong_control(pair, values):
    """Piecewise-constant coarse control seen on the fine cells."""
    return np.asarray(values, dtype=float)[pair.ancestor]


def cell_energies(mesh, field):
    """``||grad w||^2_{L2(y^alpha, K x (0,Y))}`` for every base cell ``K``."""
    base = mesh.base
    W = np.asarray(field, dtype=float).reshape(mesh.M + 1, base.n_vertices)
    My, Ky = y_matrices(mesh.interval, mesh.alpha)
    MW, KW = My @ W, Ky @ W
    g = base.gradients
    k_loc = np.einsum("tid,tjd->tij", g, g) * base.measures[:, None, None]
    nloc = base.cells.shape[1]
    d = base.dim
    m_loc = base.measures[:, None, None] * ((np.ones((nloc, nloc)) + np.eye(nloc))
                                            / ((d + 1) * (d + 2)))[None]
    c = base.cells
    # pair[t, i, j] = W[:, c_ti] . (My W)[:, c_tj]
    pm = np.einsum("lti,ltj->tij", W[:, c], MW[:, c])
    pk = np.einsum("lti,ltj->tij", W[:, c], KW[:, c])
    return np.einsum("tij,tij->t", k_loc, pm) + np.einsum("tij,tij->t", m_loc, pk)


@dataclass
class LocalErrors:
    """Per-star errors of the coarse triple against the reference."""

    nodes: np.ndarray
    state: np.ndarray
    adjoint: np.ndarray
    control: np.ndarray

    @property
    def total(self):
        return self.state + self.adjoint + self.control


def local_errors(pair, coarse_solution, fine_solution, mu, a, b, nodes=None):
    """Star-wise errors ``||grad(v - V)||_{C_z'}``, ``||grad(p - P)||_{C_z'}`` and
    ``||r - Z||_{S_z'}`` where ``r = Pi(-tr p / mu)`` uses the reference adjoint.
    """
    cbase = pair.coarse.base
    nodes = cbase.interior_nodes if nodes is None else np.asarray(nodes)
    fine = pair.fine
    ev = cell_energies(fine, fine_solution.state - prolong_field(pair, coarse_solution.state))
    ep = cell_energies(fine, fine_solution.adjoint - prolong_field(pair, coarse_solution.adjoint))
    z = prolong_control(pair, coarse_solution.control.values)
    ez = control_indicator_cells(fine.base, z, fine_solution.adjoint[:fine.base.n_vertices],
                                 mu, a, b)
    # accumulate fine cells onto their coarse ancestors, then over stars
    per_coarse = [np.bincount(pair.ancestor, e, minlength=cbase.n_cells) for e in (ev, ep, ez)]
    indptr, cells = cbase.vertex_cells
    sums = np.array([[pc[cells[indptr[zn]:indptr[zn + 1]]].sum() for pc in per_coarse]
                     for zn in nodes]).reshape(len(nodes), 3)
    return LocalErrors(nodes, *np.sqrt(np.maximum(sums, 0.0)).T)


def trace_l2_error(base, discrete_trace, exact):
    """``||u_h - u||_{L2}`` with a degree-8 rule; ``exact`` is vectorized in ``x``."""
    bary, pts, w = base_quadrature(base, 8)
    uh = np.asarray(discrete_trace)[base.cells] @ bary.T
    return float(np.sqrt(np.sum(w * (uh - exact(pts.reshape(-1, pts.shape[-1]))
                                     .reshape(uh.shape)) ** 2)))


__all__ = ["NestedPair", "nested_pair", "prolong_base", "prolong_field", "prolong_control",
           "cell_energies", "LocalErrors", "local_errors", "trace_l2_error"]
