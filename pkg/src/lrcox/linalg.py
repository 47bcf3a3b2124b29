"""Dense matrix kernels shared by the solvers.

Projections onto the bounded-rank and bounded-row-support sets, squared
Euclidean distances to those sets, and the regularized weighted
least-squares solve used by the column updates. The solve picks the
direct p x p path when p <= n and an equivalent n x n path when p > n,
which is the cheaper side for wide design matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NumericalError

__all__ = [
    "Constraints",
    "Factorization",
    "distance_squared",
    "project_rank",
    "project_rowsparse",
    "ridge_regularized_solve",
    "svd_factorization",
]


@dataclass(frozen=True)
class Constraints:
    """Feasible-set bounds: rank(B) <= max_rank and at most max_rows nonzero rows."""

    max_rank: int
    max_rows: int

    def check(self, p: int, n_populations: int) -> list[str]:
        problems = []
        if not 1 <= self.max_rank <= min(p, n_populations):
            problems.append(
                f"max_rank={self.max_rank} outside [1, {min(p, n_populations)}]"
            )
        if not 1 <= self.max_rows <= p:
            problems.append(f"max_rows={self.max_rows} outside [1, {p}]")
        return problems


@dataclass(frozen=True)
class Factorization:
    """Thin, sign-normalized SVD view U diag(d) W' of a coefficient matrix."""

    left_factors: np.ndarray  # (p, rank)
    singular_values: np.ndarray  # (rank,), nonincreasing
    right_factors: np.ndarray  # (J, rank)
    rank: int

    def reconstruct(self) -> np.ndarray:
        return (self.left_factors * self.singular_values) @ self.right_factors.T


def _require_finite(arr: np.ndarray, name: str = "matrix") -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")


def svd_factorization(B: np.ndarray, rank: int) -> Factorization:
    """Thin SVD truncated to `rank` components, with a deterministic sign fix.

    The largest-magnitude entry of each left singular vector is forced
    nonnegative (the matching right vector is flipped), so repeated calls on
    the same input produce identical factors.
    """
    B = np.asarray(B, dtype=float)
    _require_finite(B)
    U, d, Vt = np.linalg.svd(B, full_matrices=False)
    U = U[:, :rank]
    d = d[:rank].copy()
    W = Vt[:rank].T
    pivots = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pivots, np.arange(U.shape[1])] < 0.0, -1.0, 1.0)
    return Factorization(U * signs, d, W * signs, rank)


def project_rank(B: np.ndarray, r: int) -> np.ndarray:
    """Nearest (Frobenius) matrix of rank at most r: truncated SVD."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    bound = min(B.shape)
    if not 1 <= r <= bound:
        raise ValueError(f"rank bound r={r} outside [1, {bound}]")
    return svd_factorization(B, r).reconstruct()


def project_rowsparse(B: np.ndarray, s: int) -> np.ndarray:
    """Zero all but the s rows of largest Euclidean norm.

    Ties are broken toward the lowest row index so the projection is
    deterministic even on tied inputs.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    p = B.shape[0]
    if not 1 <= s <= p:
        raise ValueError(f"row bound s={s} outside [1, {p}]")
    _require_finite(B)
    norms = np.linalg.norm(B, axis=1)
    keep = np.argsort(-norms, kind="stable")[:s]
    out = np.zeros_like(B)
    out[keep] = B[keep]
    return out


def distance_squared(B: np.ndarray, set_kind: str, bound: int) -> float:
    """Squared Frobenius distance from B to the chosen constraint set."""
    B = np.asarray(B, dtype=float)
    if set_kind == "rank":
        proj = project_rank(B, bound)
    elif set_kind == "rowsparse":
        proj = project_rowsparse(B, bound)
    else:
        raise ValueError(f"unknown constraint set {set_kind!r}")
    return float(np.sum((B - proj) ** 2))


def _spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(A, lower=True, check_finite=False)
        out = cho_solve(factor, b, check_finite=False)
    except LinAlgError as exc:
        raise NumericalError(
            "regularized system is numerically singular; "
            "increase the ridge weight"
        ) from exc
    if not np.all(np.isfinite(out)):
        raise NumericalError(
            "regularized system is numerically singular; increase the ridge weight"
        )
    return out


def _solve_prevalidated(
    X: np.ndarray, w: np.ndarray, rhs: np.ndarray, lam: float
) -> np.ndarray:
    """Hot-path solve; callers guarantee finite inputs and positive w, lam."""
    n, p = X.shape
    if p <= n:
        G = X.T @ (w[:, None] * X)
        G.flat[:: p + 1] += lam
        return _spd_solve(G, rhs)
    inner = X @ X.T / lam
    inner.flat[:: n + 1] += 1.0 / w
    u = _spd_solve(inner, X @ rhs)
    return (rhs - X.T @ u / lam) / lam


def ridge_regularized_solve(
    X: np.ndarray, w: np.ndarray, rhs: np.ndarray, lam: float
) -> np.ndarray:
    """Solve (X' diag(w) X + lam I) u = rhs for strictly positive weights w.

    For p <= n the p x p system is assembled directly. For p > n the same
    solution is obtained from the n x n system

        (X'WX + lam I)^{-1} rhs
            = lam^{-1} rhs - lam^{-2} X' [diag(1/w) + XX'/lam]^{-1} X rhs.
    """
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lam <= 0.0 or not np.isfinite(lam):
        raise ValueError("lam must be positive and finite")
    for arr, name in ((X, "design"), (w, "weights"), (rhs, "rhs")):
        _require_finite(arr, name)
    if np.any(w <= 0.0):
        raise ValueError("weights must be strictly positive")
    return _solve_prevalidated(X, w, rhs, lam)
