import math

import mpmath
import numpy as np
import pytest

from fracocp.assembly import P1_BASIS, P2_BASIS, assemble_stiffness, assemble_trace_load, \
    local_y_matrices, p1_matrices, trace_load_base, trace_of, write_coo
from fracocp.control import ControlField
from fracocp.cylinder import build_tensor, graded_points, grading_exponent
from fracocp.mesh import BaseMesh, make_lshape, make_unit_square
from fracocp.quadrature import shifted_moments, triangle_rule, weighted_interval_integral
from fracocp.solver import SolverConfig, solve_spd
from oracles import global_entry_oracle, y_oracle


# -- closed-form weighted integrals ---------------------------------------------

def test_weighted_interval_integral_examples():
    assert weighted_interval_integral(0.5, 0, 0.0, 1.0) == pytest.approx(2 / 3, rel=1e-15)
    assert weighted_interval_integral(0.0, 1, 0.0, 1.0) == pytest.approx(0.5, rel=1e-15)
    assert weighted_interval_integral(-0.6, 2, 0.25, 1.0) == pytest.approx(
        (1 - 0.25**2.4) / 2.4, rel=1e-14)


def test_weighted_interval_integral_rejects_nonintegrable():
    with pytest.raises(ValueError):
        weighted_interval_integral(-1.0, 0, 0.0, 1.0)


@pytest.mark.parametrize("alpha", [-0.6, 0.0, 0.6])
def test_shifted_moments_against_mpmath(alpha):
    # includes tiny graded intervals and intervals far from 0
    y = graded_points(40, 3.0 / (1 - alpha) + 0.2, 2.0).nodes
    pairs = [(y[k], y[k + 1]) for k in (0, 1, 5, 20, 39)] + [(7.0, 7.0 + 1e-6)]
    for y0, y1 in pairs:
        nu = shifted_moments(alpha, y0, y1, 6)[0]
        for j in range(7):
            ref = mpmath.quad(lambda t: mpmath.mpf(t) ** alpha
                              * ((t - y0) / (y1 - y0)) ** j, [y0, y1])
            assert nu[j] == pytest.approx(float(ref), rel=1e-12)


def test_triangle_rule_exactness():
    for degree in (4, 6, 7, 8):
        bary, w = triangle_rule(degree)
        assert np.all(w > 0) and w.sum() == pytest.approx(1.0)
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                # 2 * int_ref x^i y^j = 2 * i! j! / (i + j + 2)!
                exact = 2.0 * math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
                assert np.sum(w * bary[:, 1] ** i * bary[:, 2] ** j) == pytest.approx(
                    exact, rel=1e-13)


# -- exact-weight assembly against adaptive quadrature ---------------------------

@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("basis", [P1_BASIS, P2_BASIS], ids=["P1", "P2"])
def test_local_y_matrices_exact(s, basis):
    alpha = 1 - 2 * s
    nodes = graded_points(12, grading_exponent(s), 2.3).nodes
    mass, stiff = local_y_matrices(nodes, alpha, basis, basis)
    for k in (0, 1, 2, 6, 11):
        for a in range(len(basis)):
            for b in range(len(basis)):
                m_ref = y_oracle(alpha, nodes[k], nodes[k + 1], basis[a], basis[b], False)
                k_ref = y_oracle(alpha, nodes[k], nodes[k + 1], basis[a], basis[b], True)
                assert mass[k, a, b] == pytest.approx(m_ref, rel=1e-10, abs=1e-300)
                assert stiff[k, a, b] == pytest.approx(k_ref, rel=1e-10)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_global_entries_against_oracle(s, rng):
    mesh = build_tensor(make_lshape(1), s, C_Tr=1.0)
    system = assemble_stiffness(mesh)
    nv = mesh.base.n_vertices
    A = system.full_matrix.tocsr()
    coo = A.tocoo()
    picks = rng.choice(coo.nnz, size=12, replace=False)
    # always include the entries touching the singular/degenerate first layer
    first = np.flatnonzero((coo.row < nv) & (coo.col < 2 * nv))[:6]
    for e in np.r_[picks, first]:
        r, c = coo.row[e], coo.col[e]
        ref = global_entry_oracle(mesh, r, c)
        assert A[r, c] == pytest.approx(ref, rel=1e-10, abs=1e-12 * abs(A).max())


def test_alpha_zero_matches_prism_stiffness():
    # one right prism: unit right triangle x (0, 1), unweighted Laplacian
    base = BaseMesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    mesh = build_tensor(base, 0.5, Y=1.0, C_Tr=math.inf, M=1)
    A = assemble_stiffness(mesh).full_matrix.toarray()
    # hand computation: kron(My, Kx) + kron(Ky, Mx)
    Kx = np.array([[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]])
    Mx = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24
    My = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    Ky = np.array([[1, -1], [-1, 1]])
    assert np.allclose(A, np.kron(My, Kx) + np.kron(Ky, Mx), atol=1e-15)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_stiffness_symmetric_positive(s, rng):
    system = assemble_stiffness(build_tensor(make_lshape(2), s))
    A = system.matrix
    assert abs(A - A.T).max() <= 1e-14 * abs(A).max()
    X = rng.standard_normal((A.shape[0], 100))
    assert np.all(np.einsum("ij,ij->j", X, A @ X) > 0)


def test_dirichlet_nodes_absent():
    mesh = build_tensor(make_unit_square(2), 0.5)
    system = assemble_stiffness(mesh)
    assert system.dimension == len(mesh.free_nodes)
    full = system.extend(np.ones(system.dimension))
    top = np.arange(mesh.M * mesh.base.n_vertices, mesh.n_nodes)
    assert not np.any(full[top]) and not np.any(full[mesh.base.boundary_vertices.nonzero()[0]])


def test_trace_load_examples():
    base = BaseMesh([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    mesh = build_tensor(base, 0.5, C_Tr=math.inf)
    assert not np.any(assemble_trace_load(mesh, 0.0))
    F = assemble_trace_load(mesh, 1.0)
    assert np.allclose(F[:3], 1 / 6) and not np.any(F[3:])
    sq = make_unit_square(2)
    z = np.zeros(sq.n_cells)
    z[3] = 1.0
    f = trace_load_base(sq, ControlField(z))
    expected = np.zeros(sq.n_vertices)
    expected[sq.cells[3]] = sq.measures[3] / 3
    assert np.allclose(f, expected)


def test_trace_load_nodal_and_callable_agree():
    base = make_lshape(2)
    g = 1 + 2 * base.vertices[:, 0] - base.vertices[:, 1]
    nodal = trace_load_base(base, g)
    func = trace_load_base(base, lambda p: 1 + 2 * p[:, 0] - p[:, 1])
    assert np.allclose(nodal, func, rtol=1e-13, atol=1e-15)


def test_trace_of_examples():
    mesh = build_tensor(make_unit_square(2), 0.5)
    nv = mesh.base.n_vertices
    assert not np.any(trace_of(mesh, np.zeros(mesh.n_nodes)))
    e = np.zeros(mesh.n_nodes)
    e[4] = 1.0
    t = trace_of(mesh, e)
    assert t[4] == 1 and t.sum() == 1
    e = np.zeros(mesh.n_nodes)
    e[nv:2 * nv] = 1.0
    assert not np.any(trace_of(mesh, e))
    with pytest.raises(ValueError):
        trace_of(mesh, np.zeros(3))


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_galerkin_residual(s):
    mesh = build_tensor(make_lshape(3), s)
    system = assemble_stiffness(mesh)
    z = ControlField(np.linspace(0.1, 0.3, mesh.base.n_cells))
    F = assemble_trace_load(mesh, z)
    V, _ = solve_spd(system, F, SolverConfig(tol=1e-12))
    r = system.restrict(F) - system.matrix @ system.restrict(V)
    assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(system.restrict(F))


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_trace_inequality(s, rng):
    mesh = build_tensor(make_lshape(2), s)
    system = assemble_stiffness(mesh)
    _, Mx = p1_matrices(mesh.base)
    for _ in range(100):
        W = system.extend(rng.standard_normal(system.dimension))
        t = trace_of(mesh, W)
        grad2 = mesh.d_s * system.energy(W)          # ||grad W||^2_{L2(y^alpha)}
        assert t @ (Mx @ t) <= grad2 / mesh.d_s * (1 + 1e-12)


def test_write_coo(tmp_path):
    system = assemble_stiffness(build_tensor(make_unit_square(1), 0.5, C_Tr=math.inf))
    path = tmp_path / "A.txt"
    write_coo(path, system.matrix)
    rows = np.loadtxt(path)
    assert len(rows) == system.matrix.nnz
    r, c, v = rows[0]
    assert system.matrix[int(r), int(c)] == v
