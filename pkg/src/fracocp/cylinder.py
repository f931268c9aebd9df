"""Graded partitions of (0, Y) and tensor-product cylinder meshes."""
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import BaseMesh


def normalization_constant(s):
    """``d_s = 2**(1-2s) Gamma(1-s) / Gamma(s)``, evaluated via log-Gamma."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    alpha = 1.0 - 2.0 * s
    return math.exp(alpha * math.log(2.0) + math.lgamma(1.0 - s) - math.lgamma(s))


def grading_exponent(s, offset=0.2):
    """Smallest admissible grading ``3/(2s)`` plus a safety offset."""
    return 3.0 / (2.0 * s) + offset


def truncation_height(n_cells):
    """``Y = 1 + log(#T_Omega) / 3`` (natural logarithm)."""
    return 1.0 + math.log(n_cells) / 3.0


@dataclass(frozen=True)
class GradedInterval:
    """Partition ``y_k = (k/M)**gamma * Y`` of ``[0, Y]``."""

    Y: float
    M: int
    gamma: float
    nodes: np.ndarray = field(repr=False)

    @property
    def lengths(self):
        return np.diff(self.nodes)

    @property
    def h_max(self):
        return float(self.lengths.max())

    def neighbor_ratio(self):
        """Largest ratio of lengths of adjacent subintervals."""
        h = self.lengths
        if len(h) < 2:
            return 1.0
        return float(np.max(np.maximum(h[1:] / h[:-1], h[:-1] / h[1:])))


def graded_points(M, gamma, Y):
    """Build the graded partition of ``[0, Y]`` with ``M`` subintervals."""
    if M < 1:
        raise ValueError("need at least one subinterval")
    if gamma < 1.0:
        raise ValueError("grading exponent must be >= 1")
    if Y <= 0:
        raise ValueError("truncation height must be positive")
    k = np.arange(M + 1, dtype=float)
    nodes = (k / M) ** gamma * Y
    nodes[-1] = Y
    if np.any(np.diff(nodes) <= 0):
        raise ValueError("graded nodes are not strictly increasing (M too large for gamma)")
    nodes.setflags(write=False)
    return GradedInterval(float(Y), int(M), float(gamma), nodes)


@dataclass(frozen=True)
class TensorMesh:
    """``T_Y = T_Omega x I_Y``; nodes numbered plane-major (level ``k`` first).

    Node ``(z', k)`` has global index ``k * base.n_vertices + z'`` and cell
    ``(K, k)`` has index ``k * base.n_cells + K``.
    """

    base: BaseMesh
    interval: GradedInterval
    s: float

    @property
    def alpha(self):
        return 1.0 - 2.0 * self.s

    @property
    def d_s(self):
        return normalization_constant(self.s)

    @property
    def Y(self):
        return self.interval.Y

    @property
    def M(self):
        return self.interval.M

    @property
    def gamma(self):
        return self.interval.gamma

    @property
    def n_cells(self):
        return self.base.n_cells * self.M

    @property
    def n_nodes(self):
        return self.base.n_vertices * (self.M + 1)

    def node_index(self, base_node, level):
        return level * self.base.n_vertices + base_node

    @property
    def free_nodes(self):
        """Nodes off the Dirichlet boundary (lateral side and top ``y = Y``)."""
        interior = self.base.interior_nodes
        nv = self.base.n_vertices
        return (np.arange(self.M)[:, None] * nv + interior[None, :]).ravel()

    def cell_weighted_measures(self):
        """``int_T y**alpha dx`` for every cell, plane-major."""
        y = self.interval.nodes
        p = self.alpha + 1.0
        wy = (y[1:] ** p - y[:-1] ** p) / p
        return np.outer(wy, self.base.measures).ravel()

    def cylindrical_star(self, node):
        """Cells ``K x I`` of ``C_z'`` for a base node ``z'``."""
        star = self.base.star_of(node)
        levels = np.arange(self.M)[:, None] * self.base.n_cells
        return (levels + star.cells[None, :]).ravel()

    def summary(self):
        return (f"s={self.s:.6g}, alpha={self.alpha:.6g}, gamma={self.gamma:.6g}, "
                f"Y={self.Y:.6g}, M={self.M}, #T_Omega={self.base.n_cells}, "
                f"#T_Y={self.n_cells}")


def check_compatibility(mesh, C_Tr):
    """Check ``h_Y <= C_Tr * h_z'`` over interior base nodes.

    Returns ``(ok, worst)`` where ``worst = max h_Y / h_z'``; a mesh without
    interior nodes satisfies the condition vacuously with ``worst = 0``.
    """
    interval = mesh.interval if isinstance(mesh, TensorMesh) else mesh[1]
    base = mesh.base if isinstance(mesh, TensorMesh) else mesh[0]
    interior = base.interior_nodes
    if interior.size == 0:
        return True, 0.0
    worst = interval.h_max / float(base.node_h[interior].min())
    return bool(worst <= C_Tr), worst


def build_tensor(base, s, Y=None, C_Tr=1.0, gamma_offset=0.2, M=None, max_M=100000):
    """Assemble ``T_Y`` over ``base``.

    ``M`` starts at ``ceil(#T_Omega**(1/n))`` (or the given value) and grows
    until ``h_Y <= C_Tr * h_z'`` holds at every interior node. ``C_Tr = inf``
    skips the enlargement.
    """
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if Y is None:
        Y = truncation_height(base.n_cells)
    gamma = grading_exponent(s, gamma_offset)
    if M is None:
        M = max(1, math.ceil(base.n_cells ** (1.0 / base.dim) - 1e-9))
    interval = graded_points(M, gamma, Y)
    interior = base.interior_nodes
    if math.isfinite(C_Tr) and interior.size:
        target = C_Tr * float(base.node_h[interior].min())
        while interval.h_max > target:
            # h_Y ~ Y*(1 - (1-1/M)**gamma); jump near the answer, then step
            guess = math.ceil(1.0 / (1.0 - (1.0 - min(target / Y, 1.0)) ** (1.0 / gamma)))
            M = max(M + 1, min(guess, max_M))
            if M >= max_M:
                raise RuntimeError("could not satisfy the compatibility condition")
            interval = graded_points(M, gamma, Y)
    return TensorMesh(base, interval, float(s))
