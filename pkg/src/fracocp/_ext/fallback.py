"""Pure-Python counterpart of the compiled kernels."""
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular


class SGSSweep:
    """Symmetric Gauss-Seidel application through scipy triangular solves."""

    def __init__(self, A):
        A = sp.csr_matrix(A)
        self.lower = sp.tril(A, format="csr")
        self.upper = sp.triu(A, format="csr")
        self.diag = A.diagonal()

    def __call__(self, r):
        w = spsolve_triangular(self.lower, r, lower=True)
        return spsolve_triangular(self.upper, self.diag * w, lower=False)
