"""Preconditioned conjugate gradients for the SPD systems of ``a_Y``.

Besides point preconditioners (Jacobi, symmetric Gauss-Seidel) two
preconditioners exploit ``A = (1/d_s)(kron(My, Kx) + kron(Ky, Mx))``:

``line``
    block Jacobi over the y-lines of each interior base node; it removes the
    anisotropy created by the graded partition.
``tensor``
    fast diagonalization: a generalized eigendecomposition of ``(Kx, Mx)``
    reduces the system to one tridiagonal solve per eigenvalue. It is exact
    up to roundoff, so PCG stops after one or two iterations.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .kernels import sgs_sweep


class ConvergenceError(RuntimeError):
    """Raised when an iterative method hits its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class SolverConfig:
    """PCG settings; ``line`` and ``tensor`` apply to tensor-product systems only."""

    tol: float = 1e-10
    max_iter: int = 20000
    preconditioner: str = "tensor"
    backend: str = None
    accept_roundoff: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("solver tolerance must be positive")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveInfo:
    iterations: int
    residual: float
    history: list = field(default_factory=list, repr=False)
    at_roundoff: bool = False


PRECONDITIONERS = ("none", "diagonal", "sgs", "line", "tensor")


class _BatchedTridiagonal:
    """LDL^T factors of many SPD tridiagonal systems sharing one size.

    ``diag`` and ``off`` have shapes ``(n_systems, m)`` and
    ``(n_systems, m - 1)``; right-hand sides are ``(m, n_systems)``.
    """

    def __init__(self, diag, off):
        m = diag.shape[1]
        self.off = off
        d = np.empty_like(diag)
        l = np.empty_like(off)
        d[:, 0] = diag[:, 0]
        for k in range(1, m):
            l[:, k - 1] = off[:, k - 1] / d[:, k - 1]
            d[:, k] = diag[:, k] - l[:, k - 1] * off[:, k - 1]
        self.d, self.l = d, l

    def solve(self, rhs):
        m = rhs.shape[0]
        x = np.array(rhs, dtype=float)
        for k in range(1, m):
            x[k] -= self.l[:, k - 1] * x[k - 1]
        x /= self.d.T
        for k in range(m - 2, -1, -1):
            x[k] -= self.l[:, k] * x[k + 1]
        return x


def _free_blocks(system):
    mesh = system.mesh
    interior = mesh.base.interior_nodes
    M = mesh.M
    Kx = system.Kx[interior][:, interior]
    Mx = system.Mx[interior][:, interior]
    My = system.My[:M, :M].tocsr()
    Ky = system.Ky[:M, :M].tocsr()
    return Kx, Mx, My, Ky


class LinePreconditioner:
    """Block Jacobi with one tridiagonal block per y-line."""

    def __init__(self, system):
        Kx, Mx, My, Ky = _free_blocks(system)
        d = system.mesh.d_s
        self.shape = (My.shape[0], Kx.shape[0])
        kd, md = Kx.diagonal(), Mx.diagonal()
        diag = (np.outer(kd, My.diagonal()) + np.outer(md, Ky.diagonal())) / d
        off = (np.outer(kd, My.diagonal(1)) + np.outer(md, Ky.diagonal(1))) / d
        self.tri = _BatchedTridiagonal(diag, off)

    def __call__(self, r):
        return self.tri.solve(r.reshape(self.shape)).ravel()


class TensorPreconditioner:
    """Fast diagonalization of the tensor-product stiffness matrix."""

    def __init__(self, system):
        Kx, Mx, My, Ky = _free_blocks(system)
        self.d_s = system.mesh.d_s
        self.shape = (My.shape[0], Kx.shape[0])
        lam, self.V = sla.eigh(Kx.toarray(), Mx.toarray())
        diag = np.outer(lam, My.diagonal()) + Ky.diagonal()[None, :]
        off = np.outer(lam, My.diagonal(1)) + Ky.diagonal(1)[None, :]
        self.tri = _BatchedTridiagonal(diag, off)

    def __call__(self, r):
        G = self.d_s * (r.reshape(self.shape) @ self.V)
        return (self.tri.solve(G) @ self.V.T).ravel()


def make_preconditioner(A, kind="sgs", backend=None, system=None):
    """Build a preconditioner callable; ``line``/``tensor`` need ``system``."""
    if kind in ("line", "tensor"):
        if system is None:
            raise ValueError(f"the {kind!r} preconditioner needs the tensor-product system")
        return LinePreconditioner(system) if kind == "line" else TensorPreconditioner(system)
    if kind == "none":
        return lambda r: r.copy()
    if kind == "diagonal":
        inv = 1.0 / A.diagonal()
        return lambda r: inv * r
    return sgs_sweep(A, backend)


def _roundoff_floor(A, x, b):
    """Residual size attainable in double precision: ``64 eps || |A||x| + |b| ||``."""
    absA = abs(A)
    return 64.0 * np.finfo(float).eps * float(np.linalg.norm(absA @ np.abs(x) + np.abs(b)))


def pcg(A, b, config=None, x0=None, precond=None, callback=None):
    """Solve ``A x = b`` to ``||A x - b|| <= tol * ||b||``.

    Returns ``(x, SolveInfo)``; raises :class:`ConvergenceError` carrying the
    achieved relative residual when ``max_iter`` is exceeded or the residual
    stagnates. With ``accept_roundoff`` a stagnated residual already at the
    double-precision floor of ``|A||x| + |b|`` is accepted and flagged in
    ``SolveInfo.at_roundoff``. ``callback(x)`` runs after every iteration.
    """
    config = config or SolverConfig()
    A = sp.csr_matrix(A) if not sp.issparse(A) else A
    b = np.asarray(b, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, 0.0, [0.0])
    if precond is None:
        # structured kinds need the tensor system; fall back to a point sweep
        kind = config.preconditioner if config.preconditioner in ("none", "diagonal") else "sgs"
        precond = make_preconditioner(A, kind, config.backend)
    restarts = 0
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    history = [np.linalg.norm(r) / bnorm]
    target = config.tol * bnorm
    if history[0] * bnorm <= target:
        return x, SolveInfo(0, history[0], history)
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, config.max_iter + 1):
        Ap = A @ p
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm / bnorm)
        if callback is not None:
            callback(x)
        if rnorm <= target:
            # guard against drift of the recursive residual
            r = b - A @ x
            true = float(np.linalg.norm(r))
            if true <= target:
                return x, SolveInfo(it, true / bnorm, history)
            restarts += 1
            if restarts > 5:
                if config.accept_roundoff and true <= _roundoff_floor(A, x, b):
                    return x, SolveInfo(it, true / bnorm, history, at_roundoff=True)
                raise ConvergenceError(f"PCG stagnated at relative residual {true / bnorm:.3e} "
                                       f"above tolerance {config.tol:.1e}", true / bnorm, it)
            z = precond(r)
            p = z.copy()
            rz = float(r @ z)
            continue
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - A @ x)) / bnorm
    raise ConvergenceError(f"PCG did not converge in {config.max_iter} iterations "
                           f"(relative residual {res:.3e})", res, config.max_iter)


def solve_spd(system, rhs, config=None, x0=None, precond=None):
    """Solve the free-node system for a load over all nodes (or free nodes).

    Returns the solution over all nodes (Dirichlet entries zero) and the
    solve statistics.
    """
    rhs = np.asarray(rhs, dtype=float)
    b = system.restrict(rhs) if rhs.shape[0] != system.dimension else rhs
    if b.shape[0] != system.dimension:
        raise ValueError("right-hand side does not match the system")
    x0r = None if x0 is None else system.restrict(x0)
    if precond is None:
        config = config or SolverConfig()
        precond = make_preconditioner(system.matrix, config.preconditioner, config.backend,
                                      system)
    x, info = pcg(system.matrix, b, config, x0r, precond)
    return system.extend(x), info
