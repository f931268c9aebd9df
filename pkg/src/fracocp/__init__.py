"""Adaptive finite elements for optimal control of the spectral fractional Laplacian.

The state solves a weighted elliptic problem on a truncated cylinder
``Omega x (0, Y)``; controls are piecewise constant with box constraints,
and mesh adaptivity is driven by a star-based a posteriori estimator.

Set ``FRACOCP_NUM_THREADS`` before import to cap BLAS/OpenMP threads.
"""
import os as _os

_threads = _os.environ.get("FRACOCP_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .afem import AfemConfig, CycleRecord, mark_dorfler, run_afem  # noqa: E402
from .assembly import assemble_stiffness, assemble_trace_load, trace_of  # noqa: E402
from .control import ControlField, clamp_project, reduced_gradient, vi_residual  # noqa: E402
from .cylinder import TensorMesh, build_tensor, check_compatibility, graded_points  # noqa: E402
from .estimator import EstimatorReport, efficiency_constant, estimate  # noqa: E402
from .mesh import BaseMesh, make_domain, make_lshape, make_unit_interval, make_unit_square  # noqa: E402
from .ocp import OcpSolution, evaluate_J, solve_adjoint, solve_ocp, solve_state  # noqa: E402
from .solver import SolverConfig, solve_spd  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "AfemConfig", "BaseMesh", "ControlField", "CycleRecord", "EstimatorReport", "OcpSolution",
    "SolverConfig", "TensorMesh", "assemble_stiffness", "assemble_trace_load", "build_tensor",
    "check_compatibility", "clamp_project", "efficiency_constant", "estimate", "evaluate_J",
    "graded_points", "make_domain", "make_lshape", "make_unit_interval", "make_unit_square",
    "mark_dorfler", "reduced_gradient", "run_afem", "solve_adjoint", "solve_ocp", "solve_spd",
    "solve_state", "trace_of", "vi_residual",
]
