import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracocp.cylinder import build_tensor, check_compatibility, grading_exponent, \
    graded_points, normalization_constant, truncation_height
from fracocp.mesh import make_lshape, make_unit_interval, make_unit_square


def test_graded_points_examples():
    assert graded_points(4, 2.0, 1.0).nodes.tolist() == [0, 0.0625, 0.25, 0.5625, 1]
    assert graded_points(2, 1.0, 2.0).nodes.tolist() == [0, 1, 2]
    assert np.all(np.diff(graded_points(8, 3.75 + 0.2, 1.0).nodes) > 0)


@pytest.mark.parametrize("M,gamma,Y", [(1, 1.0, 1.0), (7, 3.2, 2.5), (64, 7.7, 3.0)])
def test_graded_points_formula_exact(M, gamma, Y):
    nodes = graded_points(M, gamma, Y).nodes
    expected = [(k / M) ** gamma * Y for k in range(M + 1)]
    # exact up to the last bit of pow()
    np.testing.assert_allclose(nodes, expected, rtol=1e-15, atol=0)
    assert nodes[0] == 0.0 and nodes[-1] == Y


def test_graded_points_errors():
    with pytest.raises(ValueError):
        graded_points(0, 2.0, 1.0)
    with pytest.raises(ValueError):
        graded_points(4, 0.5, 1.0)
    with pytest.raises(ValueError):
        graded_points(4, 2.0, 0.0)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_neighbor_ratio_bounded_uniformly_in_M(s):
    gamma = grading_exponent(s)
    ratios = [graded_points(M, gamma, 1.0).neighbor_ratio() for M in (4, 16, 64, 256, 1024)]
    # the ratio is largest at the first pair, 2^gamma - 1, for every M
    assert max(ratios) <= 2.0**gamma - 1.0 + 1e-9


def test_normalization_constant():
    assert normalization_constant(0.5) == pytest.approx(1.0, abs=1e-15)
    for s in np.linspace(0.01, 0.99, 50):
        d = normalization_constant(s)
        ref = 2 ** (1 - 2 * s) * math.gamma(1 - s) / math.gamma(s)
        assert d > 0 and d == pytest.approx(ref, rel=1e-13)
    with pytest.raises(ValueError):
        normalization_constant(1.0)


def test_alpha_and_gamma():
    m = build_tensor(make_unit_square(2), 0.25)
    assert m.alpha == 0.5
    assert grading_exponent(0.4) == pytest.approx(3.95)
    assert build_tensor(make_unit_square(2), 0.4).gamma == pytest.approx(3.95)


def test_truncation_height():
    assert truncation_height(1000) == pytest.approx(1 + math.log(1000) / 3)
    assert truncation_height(1000) == pytest.approx(3.3026, abs=1e-4)


def test_initial_M_and_cells():
    base = make_lshape(2)
    m = build_tensor(base, 0.5, C_Tr=math.inf)
    assert m.M == math.ceil(math.sqrt(base.n_cells))
    assert m.n_cells == base.n_cells * m.M
    assert np.all(m.cell_weighted_measures() > 0)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("C_Tr", [0.5, 1.0, 3.0])
def test_build_tensor_enforces_compatibility(s, C_Tr):
    m = build_tensor(make_lshape(3), s, C_Tr=C_Tr)
    ok, worst = check_compatibility(m, C_Tr)
    assert ok and worst <= C_Tr


def test_compatibility_examples():
    # uniform base with h_z' = 0.5 and h_Y = 0.4
    class Base:
        interior_nodes = np.array([0])
        node_h = np.array([0.5])
    interval = graded_points(5, 1.0, 2.0)
    assert check_compatibility((Base, interval), 1.0) == (True, pytest.approx(0.8))
    Base.node_h = np.array([0.1])
    ok, worst = check_compatibility((Base, interval), 1.0)
    assert not ok and worst == pytest.approx(4.0)
    assert check_compatibility((Base, interval), 1e30)[0]


def test_cylindrical_star_cells():
    m = build_tensor(make_unit_square(2), 0.5, C_Tr=math.inf)
    z = int(m.base.interior_nodes[0])
    cells = m.cylindrical_star(z)
    star = m.base.star_of(z)
    assert len(cells) == len(star) * m.M
    assert set(cells % m.base.n_cells) == set(star.cells)


def test_free_nodes_exclude_dirichlet():
    m = build_tensor(make_unit_interval(3), 0.3, C_Tr=math.inf)
    free = m.free_nodes
    level = free // m.base.n_vertices
    assert level.max() == m.M - 1
    assert not np.any(m.base.boundary_vertices[free % m.base.n_vertices])


def test_summary_line():
    m = build_tensor(make_lshape(1), 0.5, C_Tr=math.inf)
    line = m.summary()
    for key in ("s=", "alpha=", "gamma=", "Y=", "M=", "#T_Omega=", "#T_Y="):
        assert key in line


@settings(max_examples=50, deadline=None)
@given(M=st.integers(1, 400), s=st.floats(0.05, 0.95), Y=st.floats(0.5, 5.0))
def test_graded_interval_properties(M, s, Y):
    g = graded_points(M, grading_exponent(s), Y)
    assert g.nodes[0] == 0 and g.nodes[-1] == Y
    assert np.all(np.diff(g.nodes) > 0)
    assert g.h_max == pytest.approx(Y * (1 - (1 - 1 / M) ** g.gamma), rel=1e-10)
