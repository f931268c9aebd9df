"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting
``FRACOCP_PURE_PYTHON=1`` forces the scipy-based fallback.
"""
import os

import numpy as np
import scipy.sparse as sp

from ._ext.fallback import SGSSweep as _FallbackSGS

try:
    from ._ext.kernels import sgs_apply as _compiled_sgs_apply
except ImportError:  # extension not built
    _compiled_sgs_apply = None

HAVE_COMPILED = _compiled_sgs_apply is not None


def default_backend():
    if os.environ.get("FRACOCP_PURE_PYTHON", "") not in ("", "0") or not HAVE_COMPILED:
        return "python"
    return "compiled"


class _CompiledSGS:
    def __init__(self, A):
        A = sp.csr_matrix(A)
        A.sort_indices()
        self.indptr = A.indptr.astype(np.intp)
        self.indices = A.indices.astype(np.intp)
        self.data = np.ascontiguousarray(A.data, dtype=float)
        self.diag = np.ascontiguousarray(A.diagonal())

    def __call__(self, r):
        return _compiled_sgs_apply(self.indptr, self.indices, self.data, self.diag,
                                   np.ascontiguousarray(r, dtype=float))


def sgs_sweep(A, backend=None):
    """Return a callable applying one symmetric Gauss-Seidel sweep of ``A``."""
    backend = backend or default_backend()
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernels are not available")
        return _CompiledSGS(A)
    if backend == "python":
        return _FallbackSGS(A)
    raise ValueError(f"unknown backend {backend!r}")
