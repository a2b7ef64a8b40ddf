"""Low-rank self-representation by inexact augmented Lagrange multipliers.

Solves  min ||C||_* + lam * ||E||_err  s.t.  Y = Y C + E  with the error
norm chosen among column-wise l2 (``l21``), entrywise l1 (``l1``) and
squared Frobenius (``fro``). A splitting variable J with C = J keeps every
subproblem in closed form: J is updated by singular value thresholding,
C by one SPD solve, E by the prox of the chosen norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .sparse_coding import soft_threshold
from .types import DataMatrix, SolverReport

ERROR_NORMS = ("l21", "l1", "fro")


@dataclass(frozen=True)
class LrrConfig:
    lam: float = 1.0
    error_norm: str = "l21"
    mu_init: float = 1e-2
    rho: float = 1.5
    mu_max: float = 1e10
    constraint_tol: float = 1e-7
    max_iterations: int = 500
    rank_bound: int | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.error_norm not in ERROR_NORMS:
            raise ValueError(
                f"error_norm must be one of {ERROR_NORMS}, got {self.error_norm!r}"
            )
        if self.rho <= 1:
            raise ValueError(f"rho must exceed 1, got {self.rho}")
        if not (0 < self.mu_init < self.mu_max):
            raise ValueError("mu_init must satisfy 0 < mu_init < mu_max")
        if self.constraint_tol <= 0:
            raise ValueError("constraint_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rank_bound is not None and self.rank_bound < 1:
            raise ValueError("rank_bound must be >= 1 when given")


@dataclass(frozen=True)
class LrrSolution:
    """Coefficients C, error term E and solver stats; optionally the
    augmented-Lagrangian diagnostic trace (pre/post value per iteration)."""

    C: np.ndarray
    E: np.ndarray
    report: SolverReport
    objective_trace: list | None = None


def svt(M: np.ndarray, tau: float, rank_bound: int | None = None) -> np.ndarray:
    """Singular value thresholding: U max(S - tau, 0) V^T.

    ``rank_bound`` switches to a truncated SVD when it is small enough to
    pay off; the default is a full decomposition.
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    M = np.asarray(M, dtype=float)
    if rank_bound is not None and rank_bound < min(M.shape) - 1:
        from scipy.sparse.linalg import svds

        U, s, Vt = svds(M, k=rank_bound, v0=np.ones(min(M.shape)))
        order = np.argsort(s)[::-1]
        U, s, Vt = U[:, order], s[order], Vt[order]
    else:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros_like(M)
    return (U[:, keep] * shrunk[keep]) @ Vt[keep]


def l21_shrink(M: np.ndarray, tau: float) -> np.ndarray:
    """Column-wise shrinkage: column j becomes max(1 - tau/||m_j||, 0) m_j."""
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    scale = np.zeros_like(norms)
    nz = norms > tau
    scale[nz] = 1.0 - tau / norms[nz]
    return M * scale


def _svt_with_norm(B: np.ndarray, tau: float, rank_bound: int | None):
    """svt plus the nuclear norm of the result (free from the shrunk spectrum)."""
    if rank_bound is not None:
        J = svt(B, tau, rank_bound)
        return J, float(np.linalg.svd(J, compute_uv=False).sum())
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    shrunk = np.maximum(s - tau, 0.0)
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros_like(B), 0.0
    return (U[:, keep] * shrunk[keep]) @ Vt[keep], float(shrunk.sum())


def _error_prox(M: np.ndarray, norm: str, lam: float, mu: float) -> np.ndarray:
    if norm == "l21":
        return l21_shrink(M, lam / mu)
    if norm == "l1":
        return soft_threshold(M, lam / mu)
    # fro: argmin lam*||E||_F^2 + mu/2 ||E - M||_F^2
    return M * (mu / (2.0 * lam + mu))


def _error_value(E: np.ndarray, norm: str) -> float:
    if norm == "l21":
        return float(np.linalg.norm(E, axis=0).sum())
    if norm == "l1":
        return float(np.abs(E).sum())
    return float((E * E).sum())


def solve_lrr(Y, cfg: LrrConfig | None = None, track_objective: bool = False) -> LrrSolution:
    """Inexact-ALM solve of min ||C||_* + lam*||E||_err s.t. Y = YC + E.

    Stops when both the constraint residual ||Y - YC - E||_F and the
    splitting residual ||C - J||_F fall below
    constraint_tol * max(1, ||Y||_F). Hitting max_iterations returns the
    best (last) iterate with converged=False.

    With ``track_objective`` the augmented Lagrangian is evaluated before
    and after each iteration's primal updates (multipliers held fixed) and
    recorded; the exact block minimizations make it non-increasing, which
    is asserted as a diagnostic.
    """
    Y = Y if isinstance(Y, DataMatrix) else DataMatrix(np.asarray(Y, dtype=float))
    if Y.n < 2:
        raise ValueError("low-rank representation needs at least 2 samples")
    if cfg is None:
        cfg = LrrConfig()

    V = Y.values
    m, n = V.shape
    y_scale = max(1.0, float(np.linalg.norm(V)))
    tol = cfg.constraint_tol * y_scale

    G = V.T @ V
    system = cho_factor(np.eye(n) + G)

    C = np.zeros((n, n))
    J = np.zeros((n, n))
    E = np.zeros((m, n))
    L1 = np.zeros((m, n))  # multiplier for Y = YC + E
    L2 = np.zeros((n, n))  # multiplier for C = J
    mu = cfg.mu_init

    R1 = V - V @ C - E
    R2 = C - J
    nuc_J = 0.0
    err_E = _error_value(E, cfg.error_norm)
    trace = [] if track_objective else None

    def aug_lagrangian(nuc, err, r1, r2):
        return (
            nuc
            + cfg.lam * err
            + float((L1 * r1).sum())
            + float((L2 * r2).sum())
            + 0.5 * mu * (float((r1 * r1).sum()) + float((r2 * r2).sum()))
        )

    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        if track_objective:
            pre = aug_lagrangian(nuc_J, err_E, R1, R2)

        # J-update: prox of the nuclear norm at C + L2/mu
        J, nuc_J = _svt_with_norm(C + L2 / mu, 1.0 / mu, cfg.rank_bound)

        # C-update: (I + Y^T Y) C = Y^T (Y - E + L1/mu) + J - L2/mu
        rhs = V.T @ (V - E + L1 / mu) + J - L2 / mu
        C = cho_solve(system, rhs)

        # E-update: prox of the error norm at Y - YC + L1/mu
        YC = V @ C
        E = _error_prox(V - YC + L1 / mu, cfg.error_norm, cfg.lam, mu)
        err_E = _error_value(E, cfg.error_norm)

        R1 = V - YC - E
        R2 = C - J

        if track_objective:
            post = aug_lagrangian(nuc_J, err_E, R1, R2)
            trace.append((pre, post))
            assert post <= pre + 1e-8 * max(1.0, abs(pre)), (
                f"augmented Lagrangian rose at iteration {it}: {pre} -> {post}"
            )

        L1 = L1 + mu * R1
        L2 = L2 + mu * R2
        mu = min(cfg.rho * mu, cfg.mu_max)

        r1 = float(np.linalg.norm(R1))
        r2 = float(np.linalg.norm(R2))
        if r1 <= tol and r2 <= tol:
            converged = True
            break

    objective = nuc_J + cfg.lam * err_E
    residual = max(float(np.linalg.norm(R1)), float(np.linalg.norm(R2))) / y_scale
    report = SolverReport(it, objective, residual, converged)
    return LrrSolution(C=C, E=E, report=report, objective_trace=trace)


def outlier_columns(E: np.ndarray, ratio: float = 10.0, floor: float = 0.0) -> np.ndarray:
    """Columns of E whose norm exceeds ratio x the median column norm.

    ``floor`` adds an absolute lower bound on the flagged norms, for callers
    that must not flag solver noise when no real corruption is present.
    """
    norms = np.linalg.norm(np.asarray(E, dtype=float), axis=0)
    threshold = max(ratio * float(np.median(norms)), floor)
    return np.flatnonzero(norms > threshold)
