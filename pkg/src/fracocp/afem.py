"""Adaptive loop SOLVE -> ESTIMATE -> MARK -> REFINE."""
import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cylinder import build_tensor, check_compatibility
from .estimator import estimate
from .mesh import make_domain
from .ocp import OPTIMIZERS, solve_ocp
from .solver import PRECONDITIONERS, SolverConfig

log = logging.getLogger(__name__)


@dataclass
class AfemConfig:
    """Parameters of one adaptive run.

    ``max_cells`` stops the loop after the first cycle whose ``#T_Y``
    reaches it. ``C_Tr = inf`` disables the enlargement of ``M`` that
    enforces ``h_Y <= C_Tr h_z'``.
    """

    s: float = 0.5
    mu: float = 1.0
    a: float = 0.1
    b: float = 0.3
    u_d: float = 1.0
    theta: float = 0.5
    max_cycles: int = 17
    max_cells: int = 10**6
    C_Tr: float = 1.0
    gamma_offset: float = 0.2
    domain: str = "lshape"
    initial_refine: int = 2
    marking: str = "star"
    optimizer: str = "projected-gradient"
    opt_tol: float = 1e-10
    opt_max_iter: int = 500
    solver_tol: float = 1e-10
    preconditioner: str = "tensor"
    enrich: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.a > self.b:
            raise ValueError(f"control bounds out of order: a={self.a} > b={self.b}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if self.max_cycles < 0 or self.max_cells < 1:
            raise ValueError("cycle and cell budgets must be positive")
        if not self.C_Tr > 0:
            raise ValueError("C_Tr must be positive")
        if self.gamma_offset <= 0:
            raise ValueError("gamma offset must be positive so that gamma > 3/(2s)")
        if self.initial_refine < 0:
            raise ValueError("initial_refine must be nonnegative")
        if self.marking not in ("star", "element"):
            raise ValueError(f"marking must be 'star' or 'element', got {self.marking!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if not (self.opt_tol > 0 and self.solver_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.domain not in ("lshape", "unit-square", "unit-interval"):
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass
class CycleRecord:
    cycle: int
    n_base_cells: int
    M: int
    Y: float
    n_cells: int
    n_dofs: int
    E_V: float
    E_P: float
    E_Z: float
    osc: float
    total: float
    J: float
    opt_iterations: int
    pg_norm: float
    vi_residual: float
    cg_iterations: int
    compat_ratio: float
    marked: int

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


@dataclass
class CycleState:
    """Everything computed on one cycle, handed to observers."""

    record: CycleRecord
    mesh: object
    solution: object
    report: object
    marked_nodes: np.ndarray = field(default=None, repr=False)
    marked_cells: np.ndarray = field(default=None, repr=False)


def mark_dorfler(values, theta):
    """Positions of a minimal set with ``sum v^2 >= theta^2 sum_all v^2``.

    Both sums are correctly rounded (``math.fsum``), so the comparison does
    not depend on summation order.

    Entries are taken by decreasing value, ties by position, so the result
    is deterministic. Returns sorted positions.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    v2 = np.asarray(values, dtype=float) ** 2
    if v2.size == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort((np.arange(v2.size), -v2))
    sorted_v2 = v2[order]
    need = theta**2 * math.fsum(sorted_v2)
    if need <= 0.0:
        return np.zeros(0, dtype=np.int64)
    csum = np.cumsum(sorted_v2)
    k = min(int(np.searchsorted(csum, need, side="left")) + 1, v2.size)
    # cumsum may be off by roundoff near the threshold; settle k with exact sums
    while k > 1 and math.fsum(sorted_v2[:k - 1]) >= need:
        k -= 1
    while k < v2.size and math.fsum(sorted_v2[:k]) < need:
        k += 1
    return np.sort(order[:k])


def stars_to_cells(base, nodes):
    """Union of the cells of the given stars."""
    indptr, cells = base.vertex_cells
    if len(nodes) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([cells[indptr[z]:indptr[z + 1]] for z in nodes]))


def refine_cycle(mesh, marked_cells, config):
    """Bisect the marked cells and rebuild the graded partition of ``(0, Y)``."""
    base = mesh.base.bisect(marked_cells)
    return build_tensor(base, config.s, C_Tr=config.C_Tr, gamma_offset=config.gamma_offset)


def initial_mesh(config):
    base = make_domain(config.domain, config.initial_refine)
    if base.interior_nodes.size == 0:
        raise ValueError("initial mesh has no interior nodes; increase initial_refine")
    return build_tensor(base, config.s, C_Tr=config.C_Tr, gamma_offset=config.gamma_offset)


def run_afem(config, observer=None):
    """Run the adaptive loop and return one :class:`CycleRecord` per cycle.

    ``observer(state)`` is called with a :class:`CycleState` after every
    cycle. Any error aborts the loop; the records gathered so far are kept
    on the exception as ``partial_records``.
    """
    solver = SolverConfig(tol=config.solver_tol, preconditioner=config.preconditioner)
    records = []
    try:
        mesh = initial_mesh(config)
        cycle = 0
        while True:
            sol = solve_ocp(mesh, config.u_d, config.mu, config.a, config.b,
                            optimizer=config.optimizer, tol=config.opt_tol,
                            max_iter=config.opt_max_iter, solver=solver)
            report = estimate(mesh, sol.state, sol.adjoint, sol.control, config.u_d, config.mu,
                              enrich=config.enrich)
            last = cycle >= config.max_cycles or mesh.n_cells >= config.max_cells
            marked_nodes = marked_cells = None
            if not last:
                if config.marking == "star":
                    marked_nodes = report.nodes[mark_dorfler(report.total, config.theta)]
                    marked_cells = stars_to_cells(mesh.base, marked_nodes)
                else:
                    cell_vals = np.sqrt(report.to_elementwise(mesh.base) + report.cell_osc2)
                    marked_cells = mark_dorfler(cell_vals, config.theta)
            _, ratio = check_compatibility(mesh, math.inf)
            rec = CycleRecord(
                cycle=cycle, n_base_cells=mesh.base.n_cells, M=mesh.M, Y=mesh.Y,
                n_cells=mesh.n_cells, n_dofs=len(mesh.free_nodes),
                E_V=report.global_value("E_V"), E_P=report.global_value("E_P"),
                E_Z=report.global_value("E_Z"), osc=report.global_value("osc"),
                total=report.global_value("total"), J=sol.J, opt_iterations=sol.iterations,
                pg_norm=sol.pg_norm, vi_residual=sol.vi_residual,
                cg_iterations=sol.cg_iterations, compat_ratio=ratio,
                marked=0 if marked_cells is None else len(marked_cells))
            records.append(rec)
            log.info("cycle %d: %s total=%.6e", cycle, mesh.summary(), rec.total)
            if observer is not None:
                observer(CycleState(rec, mesh, sol, report, marked_nodes, marked_cells))
            if last:
                break
            mesh = refine_cycle(mesh, marked_cells, config)
            cycle += 1
    except Exception as exc:
        exc.partial_records = records
        raise
    return records


def config_dict(config):
    return asdict(config)
