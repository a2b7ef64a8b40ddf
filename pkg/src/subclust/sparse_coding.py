"""L1-regularized coding: a LASSO solver and sparse self-representation.

The solver minimizes

    f(c) = lam * ||y - D c||_2^2 + ||c||_1,

i.e. the fidelity term carries the weight. Internally this is handled in
the standard form (1/2)||y - D c||_2^2 + tau ||c||_1 with the effective
l1 weight tau = 1 / (2 * lam); the null-code condition is then exact:
c = 0 is optimal iff ||D^T y||_inf <= tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .types import DataMatrix, SolverReport

# entries smaller than this are snapped to exact zero when forming supports
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class SparseSelfRepConfig:
    """Knobs for the l1 solver.

    lam            fidelity weight (effective l1 weight is 1/(2*lam))
    delta          data-residual tolerance; when > 0 iteration stops early
                   once ||y - D c||_2 <= delta
    max_iterations iteration cap; hitting it returns the best iterate with
                   converged=False
    kkt_tol        relative stationarity tolerance for declaring convergence
    """

    lam: float = 5e4
    delta: float = 1e-3
    max_iterations: int = 20000
    kkt_tol: float = 1e-4

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.kkt_tol <= 0:
            raise ValueError("kkt_tol must be positive")

    @property
    def l1_weight(self) -> float:
        return 1.0 / (2.0 * self.lam)


@dataclass(frozen=True)
class SparseCode:
    """A solved l1 coding problem: coefficients, their support, solver stats."""

    coefficients: np.ndarray
    support: np.ndarray
    report: SolverReport


def soft_threshold(x, tau):
    """sign(x) * max(|x| - tau, 0); works on scalars and arrays."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


def spectral_norm_sq(D: np.ndarray, iterations: int = 50, tol: float = 1e-8) -> float:
    """Largest eigenvalue of D^T D by power iteration."""
    p = D.shape[1]
    # mild tilt so the start vector is never orthogonal to the top eigenvector
    v = 1.0 + 1e-3 * np.arange(p)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(iterations):
        w = D.T @ (D @ v)
        nrm = float(np.linalg.norm(w))
        if nrm <= 1e-300:
            return 0.0
        v = w / nrm
        if abs(nrm - value) <= tol * nrm:
            value = nrm
            break
        value = nrm
    return value


def kkt_violation(correlations: np.ndarray, c: np.ndarray, tau: float) -> float:
    """Worst stationarity violation of the l1 problem, relative to tau.

    ``correlations`` is D^T (y - D c). On the support the correlation must
    equal tau * sign(c_j); off the support its magnitude must not exceed tau.
    """
    on = c != 0.0
    v = 0.0
    if np.any(on):
        v = float(np.max(np.abs(correlations[on] - tau * np.sign(c[on]))))
    if np.any(~on):
        v = max(v, float(max(np.max(np.abs(correlations[~on])) - tau, 0.0)))
    return v / tau


def solve_lasso(dictionary, y, lam: float, cfg: SparseSelfRepConfig | None = None) -> SparseCode:
    """Minimize lam * ||y - D c||_2^2 + ||c||_1 by accelerated proximal descent.

    Parameters
    ----------
    dictionary : DataMatrix or (m, p) ndarray
    y : (m,) target vector
    lam : positive fidelity weight
    cfg : stopping parameters; ``cfg.lam`` is ignored in favor of ``lam``

    Returns
    -------
    SparseCode with coefficients snapped to exact zero below 1e-12 and a
    report whose ``converged`` flag means the stationarity conditions hold
    at cfg.kkt_tol (or the data residual fell below cfg.delta).
    """
    D = dictionary.values if isinstance(dictionary, DataMatrix) else np.asarray(dictionary, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if D.ndim != 2:
        raise ValueError("dictionary must be a matrix")
    m, p = D.shape
    if y.size != m:
        raise ValueError(f"dictionary has {m} rows but y has length {y.size}")
    if lam <= 0:
        raise ValueError(f"lam must be positive, got {lam}")
    if cfg is None:
        cfg = SparseSelfRepConfig(lam=lam)

    tau = 1.0 / (2.0 * lam)

    def finish(c, iterations, converged):
        c = np.asarray(c, dtype=float).copy()
        c[np.abs(c) < SNAP_TOL] = 0.0
        r = y - D @ c
        res = float(np.linalg.norm(r))
        obj = lam * res * res + float(np.abs(c).sum())
        return SparseCode(
            coefficients=c,
            support=np.flatnonzero(c),
            report=SolverReport(iterations, obj, res, converged),
        )

    if not np.any(y):
        return finish(np.zeros(p), 0, True)  # exact minimizer
    if cfg.delta > 0 and float(np.linalg.norm(y)) <= cfg.delta:
        return finish(np.zeros(p), 0, True)  # zero already meets the tolerance
    b = D.T @ y
    scale = float(np.max(np.abs(b)))
    if scale <= tau:
        return finish(np.zeros(p), 0, True)  # below the null-code threshold

    # stationarity violations are measured against the larger of tau and the
    # initial correlation scale, so tiny tau does not demand absurd precision
    denom = max(tau, scale)

    use_gram = p <= 2 * m and p <= 4096
    if use_gram:
        G = D.T @ D
        yty = float(y @ y)

    L = spectral_norm_sq(D) * 1.01  # headroom for power-iteration underestimate
    if L <= 0.0:
        return finish(np.zeros(p), 0, True)
    step = 1.0 / L
    thr = step * tau

    x = np.zeros(p)
    z = x
    t = 1.0
    check_every = 10
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        grad = (G @ z - b) if use_gram else (D.T @ (D @ z - y))
        x_new = soft_threshold(z - step * grad, thr)
        t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if it % check_every == 0 or it == cfg.max_iterations:
            if use_gram:
                Gx = G @ x
                corr = b - Gx
                res = sqrt(max(yty - 2.0 * float(b @ x) + float(x @ Gx), 0.0))
            else:
                r = y - D @ x
                corr = D.T @ r
                res = float(np.linalg.norm(r))
            viol = kkt_violation(corr, x, tau) * tau / denom
            if viol <= cfg.kkt_tol:
                converged = True
                break
            if cfg.delta > 0 and res <= cfg.delta:
                converged = True
                break
    return finish(x, it, converged)


def sparse_self_representation(Y, cfg: SparseSelfRepConfig | None = None, return_reports: bool = False):
    """Code every column of Y over the others; the diagonal is exactly zero.

    Column i is the solution of the l1 problem with dictionary Y_i, which is
    Y with column i replaced by zeros, so no column ever represents itself.
    The per-column problems are independent and write disjoint columns, so
    they could run in any order (or concurrently) with identical output.

    Returns the (n, n) coefficient matrix; with ``return_reports=True`` also
    a list of per-column SolverReports.
    """
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(np.asarray(Y, dtype=float))
    if Y.n < 2:
        raise ValueError("self-representation needs at least 2 samples")
    if cfg is None:
        cfg = SparseSelfRepConfig()

    n = Y.n
    C = np.zeros((n, n))
    reports = []
    values = Y.values
    for i in range(n):
        Di = values.copy()
        Di[:, i] = 0.0
        try:
            code = solve_lasso(Di, values[:, i], cfg.lam, cfg)
        except ValueError as exc:
            raise ValueError(f"column {i}: {exc}") from exc
        C[:, i] = code.coefficients
        C[i, i] = 0.0
        reports.append(code.report)
    if return_reports:
        return C, reports
    return C
