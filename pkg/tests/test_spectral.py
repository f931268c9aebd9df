import numpy as np
import pytest
from scipy import integrate

from fracocp.assembly import assemble_stiffness, trace_of
from fracocp.cylinder import build_tensor
from fracocp.mesh import make_unit_interval
from fracocp.ocp import solve_state
from fracocp.reference import trace_l2_error
from fracocp.solver import SolverConfig
from fracocp.spectral import SpectralBasis, extension_profile, fractional_solve_exact, \
    sinh_profile

LAM1 = np.pi**2


@pytest.mark.parametrize("domain", ["unit-interval", "unit-square"])
def test_basis_orthonormal_and_sorted(domain):
    B = SpectralBasis.create(domain, 6)
    assert np.all(np.diff(B.eigenvalues) >= 0) and np.all(B.eigenvalues > 0)
    if domain == "unit-interval":
        for j in range(4):
            for k in range(4):
                val = integrate.quad(lambda x: B.evaluate(j, [x]) * B.evaluate(k, [x]), 0, 1,
                                     limit=200)[0]
                assert val == pytest.approx(float(j == k), abs=1e-12)
    else:
        assert B.modes[:3] == ((1, 1), (1, 2), (2, 1))
        x = (np.arange(200) + 0.5) / 200
        X, Yg = np.meshgrid(x, x, indexing="ij")
        pts = np.stack([X, Yg], axis=-1)
        G = np.array([[np.mean(B.evaluate(j, pts) * B.evaluate(k, pts)) for k in range(4)]
                      for j in range(4)])
        assert np.allclose(G, np.eye(4), atol=1e-10)


def test_basis_unknown_domain():
    with pytest.raises(ValueError):
        SpectralBasis.create("lshape", 3)


def test_fractional_solve_examples():
    B = SpectralBasis.create("unit-interval", 3)
    s = 0.37
    assert fractional_solve_exact([1, 0, 0], s, B)[0] == pytest.approx(np.pi ** (-2 * s))
    assert np.allclose(fractional_solve_exact([1, 2, 3], 1e-12, B), [1, 2, 3], rtol=1e-10)
    B2 = SpectralBasis.create("unit-square", 2)
    assert fractional_solve_exact([1, 0], 0.5, B2)[0] == pytest.approx((2 * np.pi**2) ** -0.5)
    with pytest.raises(ValueError):
        fractional_solve_exact([1, 2], 0.5, B)


def test_profile_matches_sinh_for_half():
    Y = 3.0
    p = extension_profile(LAM1, 0.5, Y)
    y = np.linspace(0, Y, 7001)
    assert np.abs(p(y) - sinh_profile(LAM1, Y, y)).max() <= 1e-6
    # flux of the closed form: sqrt(lam) coth(sqrt(lam) Y)
    assert p.flux == pytest.approx(np.pi / np.tanh(np.pi * Y), rel=1e-7)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_profile_boundary_values_and_monotone(s):
    p = extension_profile(LAM1, s, 2.0)
    assert p.values[0] == 1.0 and p.values[-1] == 0.0
    assert np.all(np.diff(p.values) < 0)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_profile_flux_converges(s):
    f = [extension_profile(LAM1, s, 3.0, n_intervals=n).flux for n in (5000, 10000, 20000)]
    assert abs(f[2] - f[1]) < 0.5 * abs(f[1] - f[0]) + 1e-12
    assert abs(f[2] - f[1]) <= 1e-7 * f[2]


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_trace_factor_tends_to_spectral_solution(s):
    # untruncated extension: tr v = lambda^-s phi
    c = extension_profile(LAM1, s, 6.0).trace_factor()
    assert c == pytest.approx(LAM1 ** (-s), rel=1e-6)


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
def test_truncation_decay(s):
    ref = extension_profile(LAM1, s, 8.0).trace_factor()
    heights = [0.5, 1.0, 1.5, 2.0, 2.5]
    diffs = [abs(extension_profile(LAM1, s, Y).trace_factor() - ref) for Y in heights]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))
    assert all(d <= np.exp(-np.sqrt(LAM1) * Y / 4) for d, Y in zip(diffs, heights))


def discrete_trace_errors(s, levels, Y=3.0):
    """L2 distance of the discrete trace for z = phi_1 to the oracle ``c phi_1``."""
    B = SpectralBasis.create("unit-interval", 1)
    c = extension_profile(LAM1, s, Y).trace_factor()
    errs = []
    for k in levels:
        mesh = build_tensor(make_unit_interval(k), s, Y=Y, C_Tr=np.inf)
        V = solve_state(mesh, assemble_stiffness(mesh), lambda x: B.evaluate(0, x),
                        SolverConfig(tol=1e-12))
        errs.append(trace_l2_error(mesh.base, trace_of(mesh, V),
                                   lambda x: c * B.evaluate(0, x)))
    return errs


def test_discrete_trace_converges_to_oracle_quick():
    errs = discrete_trace_errors(0.5, [2, 3, 4])
    assert errs[0] > errs[1] > errs[2]


def test_discrete_trace_depends_on_truncation_monotonically():
    B = SpectralBasis.create("unit-interval", 1)
    base = make_unit_interval(5)
    traces = {}
    for Y in (0.5, 1.0, 1.5, 4.0):
        mesh = build_tensor(base, 0.5, Y=Y, C_Tr=np.inf, M=64)
        V = solve_state(mesh, assemble_stiffness(mesh), lambda x: B.evaluate(0, x),
                        SolverConfig(tol=1e-12))
        traces[Y] = trace_of(mesh, V)
    d = [np.abs(traces[Y] - traces[4.0]).max() for Y in (0.5, 1.0, 1.5)]
    assert d[0] > d[1] > d[2]
