"""Reference solutions from the eigenexpansion on product domains.

On ``(0,1)`` and ``(0,1)^2`` the Dirichlet eigenpairs are explicit, so
``(-Delta)^s u = z`` is solved mode by mode. For the truncated extension a
single mode ``phi(x') psi(y)`` separates; the profile ``psi`` is computed by
an overkill 1D weighted finite element solve.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from .assembly import local_y_matrices
from .cylinder import graded_points, normalization_constant


@dataclass(frozen=True)
class SpectralBasis:
    """Dirichlet eigenpairs of the unit interval or unit square.

    ``modes[k]`` holds the integer wave numbers of the ``k``-th pair, sorted
    by eigenvalue (ties by wave numbers).
    """

    domain: str
    modes: tuple
    eigenvalues: np.ndarray

    @classmethod
    def create(cls, domain, n_modes):
        if domain == "unit-interval":
            modes = [(k,) for k in range(1, n_modes + 1)]
        elif domain == "unit-square":
            side = int(np.ceil(np.sqrt(2 * n_modes))) + 1
            modes = sorted(itertools.product(range(1, side + 1), repeat=2),
                           key=lambda m: (m[0] ** 2 + m[1] ** 2, m))[:n_modes]
        else:
            raise ValueError(f"no explicit eigenpairs for domain {domain!r}")
        lam = np.array([np.pi**2 * sum(k * k for k in m) for m in modes])
        return cls(domain, tuple(modes), lam)

    def __len__(self):
        return len(self.modes)

    def evaluate(self, k, points):
        """``phi_k`` at ``points`` of shape ``(..., n)``; L2-normalized."""
        points = np.asarray(points, dtype=float)
        out = np.ones(points.shape[:-1])
        for i, m in enumerate(self.modes[k]):
            out = out * np.sqrt(2.0) * np.sin(m * np.pi * points[..., i])
        return out


def fractional_solve_exact(z, s, basis):
    """Coefficients ``u_k = lambda_k^-s z_k`` of the solution of ``(-Delta)^s u = z``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != len(basis):
        raise ValueError("coefficient count does not match the basis")
    return basis.eigenvalues ** (-s) * z


@dataclass(frozen=True)
class ExtensionProfile:
    """Discrete ``psi`` on a graded partition of ``[0, Y]``.

    ``flux`` is ``int_0^Y y^alpha (psi'^2 + lambda psi^2) dy``; for the
    minimizer this equals the conormal derivative ``-lim y^alpha psi'(y)``
    at ``y = 0``.
    """

    lam: float
    s: float
    Y: float
    nodes: np.ndarray
    values: np.ndarray
    flux: float

    def __call__(self, y):
        return np.interp(y, self.nodes, self.values)

    def trace_factor(self):
        """Factor ``c`` with ``tr v = c phi`` for data ``z = phi``: ``d_s / flux``."""
        return normalization_constant(self.s) / self.flux


def extension_profile(lam, s, Y, n_intervals=20000, gamma=None):
    """Minimize ``int_0^Y y^alpha (psi'^2 + lam psi^2)`` with ``psi(0)=1, psi(Y)=0``.

    P1 elements on a partition graded toward ``y = 0`` with exponent
    ``gamma`` (default ``3/(2s) + 0.2``); all integrals are exact.

    The discrete problem is solved by eliminating unknowns from the top:
    ``L_k``, the discrete Dirichlet-to-Neumann value at ``y_k``, obeys

        L_k = (S (p + r + 2 q + L) + p (r + L) - q^2) / (S + r + L),  L = L_{k+1},

    for the element matrix ``S [[1, -1], [-1, 1]] + lam [[p, q], [q, r]]``.
    Expanding the numerator removes the cancellation of the ``S``-sized
    terms that ruins a plain tridiagonal solve on strongly graded meshes.
    """
    if not lam > 0:
        raise ValueError("eigenvalue must be positive")
    alpha = 1.0 - 2.0 * s
    if gamma is None:
        gamma = 3.0 / (2.0 * s) + 0.2
    interval = graded_points(n_intervals, gamma, Y)
    mass, stiff = local_y_matrices(interval.nodes, alpha)
    S = stiff[:, 0, 0]
    p, q, r = lam * mass[:, 0, 0], lam * mass[:, 0, 1], lam * mass[:, 1, 1]
    M = n_intervals
    L = np.empty(M)
    L[M - 1] = S[M - 1] + p[M - 1]
    for k in range(M - 2, -1, -1):
        nxt = L[k + 1]
        L[k] = (S[k] * (p[k] + r[k] + 2 * q[k] + nxt) + p[k] * (r[k] + nxt) - q[k] ** 2) \
            / (S[k] + r[k] + nxt)
    # psi_{k+1} = (S - q) psi_k / (S + r + L_{k+1}); every ratio lies in (0, 1)
    ratio = (S[:-1] - q[:-1]) / (S[:-1] + r[:-1] + L[1:])
    psi = np.concatenate([[1.0], np.cumprod(ratio), [0.0]])
    return ExtensionProfile(float(lam), float(s), float(Y), interval.nodes, psi, float(L[0]))


def sinh_profile(lam, Y, y):
    """Closed form ``sinh(sqrt(lam)(Y - y)) / sinh(sqrt(lam) Y)`` for ``s = 1/2``."""
    r = np.sqrt(lam)
    y = np.asarray(y, dtype=float)
    # written with exponentials that cannot overflow
    return np.exp(-r * y) * (-np.expm1(-2 * r * (Y - y))) / (-np.expm1(-2 * r * Y))
