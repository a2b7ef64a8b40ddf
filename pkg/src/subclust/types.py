"""Core value types shared across the library."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DataMatrix:
    """Real matrix whose columns are samples.

    Shape is (m, n): m is the ambient dimension, n the number of samples.
    All entries must be finite.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got ndim={v.ndim}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"matrix must be at least 1x1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix contains non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ClusterAssignment:
    """Integer labels in [0, k) for a sequence of samples."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=int).ravel()
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ValueError(
                f"labels must lie in [0, {self.k}), got range "
                f"[{lab.min()}, {lab.max()}]"
            )
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.labels.size


@dataclass(frozen=True)
class SolverReport:
    """Outcome of one iterative solve.

    ``residual_norm`` is the solver's own convergence residual: the data
    residual ||y - Dc||_2 for the l1 solver, the worst relative constraint
    residual for the low-rank solver.
    """

    iterations: int
    objective: float
    residual_norm: float
    converged: bool
