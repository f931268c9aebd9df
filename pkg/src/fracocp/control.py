"""Piecewise-constant admissible controls and the clamp projector."""
from dataclasses import dataclass

import numpy as np


@dataclass
class ControlField:
    """One value per base cell, constrained to ``[a, b]``."""

    values: np.ndarray
    a: float = -np.inf
    b: float = np.inf

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.a > self.b:
            raise ValueError(f"empty admissible set: a={self.a} > b={self.b}")
        tol = 1e-12 * max(1.0, abs(self.a) if np.isfinite(self.a) else 1.0,
                          abs(self.b) if np.isfinite(self.b) else 1.0)
        if np.any(self.values < self.a - tol) or np.any(self.values > self.b + tol):
            raise ValueError("control violates its bounds")

    def __len__(self):
        return len(self.values)

    @classmethod
    def constant(cls, n, value, a=-np.inf, b=np.inf):
        return cls(np.full(n, float(value)), a, b)

    def with_values(self, values):
        return ControlField(values, self.a, self.b)


def clamp_project(v, a, b):
    """``Pi(v) = min(b, max(a, v))`` componentwise; bounds may be arrays."""
    if np.any(np.asarray(a) > np.asarray(b)):
        raise ValueError(f"clamp bounds out of order: a={a} > b={b}")
    if isinstance(v, ControlField):
        return ControlField(np.clip(v.values, a, b), a, b)
    out = np.clip(v, a, b)
    return float(out) if np.ndim(out) == 0 else out


def cell_means(base, nodal):
    """Mean over each cell of a P1 function given by vertex values."""
    return np.asarray(nodal)[base.cells].mean(axis=1)


def reduced_gradient(Z, adjoint_trace, mu, base):
    """Per-cell L2 gradient ``mu Z_K + mean_K(tr P)`` of the reduced cost."""
    z = Z.values if isinstance(Z, ControlField) else np.asarray(Z, dtype=float)
    return mu * z + cell_means(base, adjoint_trace)


def vi_residual(Z, adjoint_trace, mu, base, a=None, b=None):
    """Area-weighted l2 distance from ``Z`` to ``Pi(-mean(tr P)/mu)``.

    Zero exactly when ``Z`` satisfies the discrete variational inequality.
    """
    if isinstance(Z, ControlField):
        a = Z.a if a is None else a
        b = Z.b if b is None else b
        z = Z.values
    else:
        z = np.asarray(Z, dtype=float)
    target = np.clip(-cell_means(base, adjoint_trace) / mu, a, b)
    return float(np.sqrt(np.sum(base.measures * (z - target) ** 2)))
