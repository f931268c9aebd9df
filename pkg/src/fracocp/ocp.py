"""Fully discrete optimal control: state, adjoint, cost and optimizers.

The reduced functional ``j(Z) = J(tr S(Z), Z)`` is minimized over
piecewise-constant controls in ``[a, b]``. Its L2(Omega) gradient is the
per-cell vector ``g_K = mu Z_K + mean_K(tr P)``; all inner products between
controls are area weighted.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import assemble_stiffness, assemble_trace_load, base_quadrature, \
    evaluate_data, p1_matrices, trace_load_base, trace_of
from .control import ControlField, reduced_gradient, vi_residual
from .solver import SolverConfig, make_preconditioner, solve_spd

log = logging.getLogger(__name__)

OPTIMIZERS = ("projected-gradient", "projected-bfgs")


class OptimizerError(RuntimeError):
    """The optimizer hit its iteration cap; carries the last diagnostics."""

    def __init__(self, message, pg_norm=None, iterations=None):
        super().__init__(message)
        self.pg_norm = pg_norm
        self.iterations = iterations


@dataclass
class OcpSolution:
    """Discrete optimal triple with the optimizer's diagnostics."""

    state: np.ndarray
    adjoint: np.ndarray
    control: ControlField
    J: float
    iterations: int
    pg_norm: float
    vi_residual: float
    cg_iterations: int = 0
    history: list = field(default_factory=list, repr=False)


class _Solves:
    """State/adjoint solves on one mesh sharing a single preconditioner."""

    def __init__(self, mesh, system=None, solver=None):
        self.mesh = mesh
        self.system = system if system is not None else assemble_stiffness(mesh)
        self.config = solver or SolverConfig()
        self.precond = make_preconditioner(self.system.matrix, self.config.preconditioner,
                                           self.config.backend, self.system)
        self.cg_iterations = 0

    def solve(self, load):
        x, info = solve_spd(self.system, load, self.config, precond=self.precond)
        self.cg_iterations += info.iterations
        return x


def _desired_load(base, u_d, degree=4):
    if isinstance(u_d, np.ndarray) and u_d.ndim == 1 and len(u_d) == base.n_vertices:
        return trace_load_base(base, u_d)
    return trace_load_base(base, u_d if callable(u_d) else float(u_d), degree)


def solve_state(mesh, system, Z, solver=None, precond=None):
    """``V`` with ``a_Y(V, W) = (Z, tr W)`` for every discrete ``W``."""
    config = solver or SolverConfig()
    load = assemble_trace_load(mesh, Z)
    V, _ = solve_spd(system, load, config, precond=precond)
    return V


def solve_adjoint(mesh, system, state_trace, u_d, solver=None, precond=None):
    """``P`` with ``a_Y(W, P) = (tr V - u_d, tr W)`` for every discrete ``W``."""
    config = solver or SolverConfig()
    load = np.zeros(mesh.n_nodes)
    base = mesh.base
    load[:base.n_vertices] = trace_load_base(base, np.asarray(state_trace, dtype=float)) \
        - _desired_load(base, u_d)
    P, _ = solve_spd(system, load, config, precond=precond)
    return P


def tracking_misfit(base, state_trace, u_d, degree=4):
    """``||tr V - u_d||^2`` over the base mesh.

    Exact for nodal (P1) ``u_d``; otherwise by a triangle rule of ``degree``
    (exact for constant and polynomial ``u_d`` up to ``degree - 2``).
    """
    v = np.asarray(state_trace, dtype=float)
    if isinstance(u_d, np.ndarray) and u_d.ndim == 1 and len(u_d) == base.n_vertices:
        _, Mx = p1_matrices(base)
        d = v - u_d
        return float(d @ (Mx @ d))
    bary, pts, w = base_quadrature(base, degree)
    vq = v[base.cells] @ bary.T                        # (T, q)
    uq = evaluate_data(u_d, pts)
    return float(np.sum(w * (vq - uq) ** 2))


def evaluate_J(base, state_trace, Z, u_d, mu):
    """``1/2 ||tr V - u_d||^2 + mu/2 ||Z||^2`` on ``Omega``."""
    z = Z.values if isinstance(Z, ControlField) else np.asarray(Z, dtype=float)
    return 0.5 * tracking_misfit(base, state_trace, u_d) + 0.5 * mu * float(base.measures @ z**2)


@dataclass
class _Point:
    z: np.ndarray
    V: np.ndarray
    P: np.ndarray
    J: float
    g: np.ndarray


def _evaluate(solves, z, u_d, mu, a, b):
    mesh = solves.mesh
    base = mesh.base
    V = solves.solve(assemble_trace_load(mesh, ControlField(z, a, b)))
    tv = trace_of(mesh, V)
    load = np.zeros(mesh.n_nodes)
    load[:base.n_vertices] = trace_load_base(base, tv) - _desired_load(base, u_d)
    P = solves.solve(load)
    J = evaluate_J(base, tv, z, u_d, mu)
    g = reduced_gradient(z, trace_of(mesh, P), mu, base)
    return _Point(z, V, P, J, g)


def _pg(point, a, b):
    return point.z - np.clip(point.z - point.g, a, b)


def _step(solves, cur, z_new, mu):
    """Evaluate ``j`` at ``z_new`` from increments.

    By linearity ``V`` and ``P`` change by the responses to ``dz`` alone, so
    their accuracy is relative to the step; ``j`` is quadratic, hence
    ``j(z_new) - j(z) = (g, dz) + 1/2 (mu ||dz||^2 + ||tr dV||^2)`` holds
    exactly and avoids cancellation near the minimizer.
    """
    mesh = solves.mesh
    base = mesh.base
    w = base.measures
    dz = z_new - cur.z
    dV = solves.solve(assemble_trace_load(mesh, ControlField(dz)))
    dtv = trace_of(mesh, dV)
    dload = np.zeros(mesh.n_nodes)
    dload[:base.n_vertices] = trace_load_base(base, dtv)
    dP = solves.solve(dload)
    _, Mx = p1_matrices(base)
    change = float(w @ (cur.g * dz)) + 0.5 * (mu * float(w @ dz**2) + float(dtv @ (Mx @ dtv)))
    P = cur.P + dP
    g = reduced_gradient(z_new, trace_of(mesh, P), mu, base)
    return _Point(z_new, cur.V + dV, P, cur.J + change, g), change


def _armijo(solves, cur, direction_at, mu, t0, sigma, beta, max_backtracks=60):
    """Backtrack on ``t`` until ``j(Z(t)) <= j(Z) + sigma (g, Z(t) - Z)``."""
    w = solves.mesh.base.measures
    t = t0
    for _ in range(max_backtracks):
        z_new = direction_at(t)
        dz = z_new - cur.z
        if not np.any(dz):
            return None, t
        slope = float(w @ (cur.g * dz))
        new, change = _step(solves, cur, z_new, mu)
        if change <= sigma * slope:
            return new, t
        t *= beta
    return None, t


def solve_ocp(mesh, u_d, mu, a, b, optimizer="projected-gradient", tol=1e-5, max_iter=500,
              solver=None, system=None, z0=None, sigma=1e-4, beta=0.5, memory=10):
    """Minimize ``j`` over ``Z_ad(T_Omega)``.

    Parameters
    ----------
    mesh : TensorMesh
    u_d : float, callable or nodal array
        Desired state.
    mu : float
        Control cost, ``mu > 0``.
    a, b : float
        Control bounds, ``a <= b``.
    optimizer : {"projected-gradient", "projected-bfgs"}
    tol : float
        Stop once the l2-norm of the projected gradient ``Z - Pi(Z - g)``
        is at most ``tol``.

    Returns
    -------
    OcpSolution
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    if a > b:
        raise ValueError(f"empty admissible set: a={a} > b={b}")
    if optimizer not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    solves = _Solves(mesh, system, solver)
    base = mesh.base
    w = base.measures
    z = np.clip(np.zeros(base.n_cells) if z0 is None else np.asarray(z0, dtype=float), a, b)
    cur = _evaluate(solves, z, u_d, mu, a, b)
    history = []
    t_bb = 1.0 / mu
    pairs = []
    it = 0
    while True:
        pg = _pg(cur, a, b)
        pg_norm = float(np.linalg.norm(pg))
        history.append((it, cur.J, pg_norm))
        log.debug("iter %d J=%.17g |pg|=%.3e cg=%d", it, cur.J, pg_norm, solves.cg_iterations)
        if pg_norm <= tol:
            break
        if it >= max_iter:
            raise OptimizerError(f"optimizer did not converge in {max_iter} iterations "
                                 f"(|pg| = {pg_norm:.3e})", pg_norm, it)
        if optimizer == "projected-gradient":
            new, t = _armijo(solves, cur, lambda t: np.clip(cur.z - t * cur.g, a, b),
                             mu, t_bb, sigma, beta)
        else:
            d = _bfgs_direction(cur, pairs, a, b, pg_norm, w)
            new, t = _armijo(solves, cur, lambda t: np.clip(cur.z + t * d, a, b),
                             mu, 1.0, sigma, beta)
            if new is None and pairs:
                pairs.clear()
                continue
        if new is None:
            raise OptimizerError(f"line search failed at iteration {it} (|pg| = {pg_norm:.3e})",
                                 pg_norm, it)
        s = new.z - cur.z
        y = new.g - cur.g
        sy = float(w @ (s * y))
        if sy > 1e-14 * np.sqrt(float(w @ s**2) * float(w @ y**2)):
            t_bb = min(max(float(w @ s**2) / sy, 1e-10), 1e10)
            pairs.append((s, y, sy))
            if len(pairs) > memory:
                pairs.pop(0)
        cur = new
        it += 1
    trace_p = trace_of(mesh, cur.P)
    J = evaluate_J(base, trace_of(mesh, cur.V), cur.z, u_d, mu)
    return OcpSolution(cur.V, cur.P, ControlField(cur.z, a, b), J, it, pg_norm,
                       vi_residual(cur.z, trace_p, mu, base, a, b), solves.cg_iterations,
                       history)


def _bfgs_direction(cur, pairs, a, b, pg_norm, w):
    """Projected L-BFGS direction with active-set freezing.

    Cells at a bound whose gradient pushes outward are frozen and move along
    ``-g``; the two-loop recursion acts on the remaining cells only.
    """
    eps = min(1e-3, pg_norm)
    z, g = cur.z, cur.g
    active = ((z <= a + eps) & (g > 0)) | ((z >= b - eps) & (g < 0))
    free = ~active
    d = -g.copy()
    if not pairs or not free.any():
        return d
    q = np.where(free, g, 0.0)
    stack = []
    for s, y, _ in reversed(pairs):
        sf, yf = np.where(free, s, 0.0), np.where(free, y, 0.0)
        sy = float(w @ (sf * yf))
        if sy <= 0:
            continue
        rho = 1.0 / sy
        alpha = rho * float(w @ (sf * q))
        q -= alpha * yf
        stack.append((sf, yf, rho, alpha))
    if stack:
        sf, yf, _, _ = stack[0]
        q *= float(w @ (sf * yf)) / float(w @ (yf * yf))
    for sf, yf, rho, alpha in reversed(stack):
        beta = rho * float(w @ (yf * q))
        q += (alpha - beta) * sf
    d[free] = -q[free]
    if float(w @ (d * g)) >= 0:
        return -g.copy()
    return d
