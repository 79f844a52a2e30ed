"""Dense linear-algebra kernels shared by the correction models.

Everything here works in float64 on small dense matrices.  The SVD-based
routines delegate the factorization itself to LAPACK through numpy; the
Cholesky factorization is written out so that it can run on a stack of
matrices at once and report *which* pivot failed for every member of the
stack, something LAPACK's batched driver does not expose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "NumericError",
    "NotPositiveDefiniteError",
    "SvdFactorization",
    "as_matrix",
    "svd",
    "pseudoinverse",
    "min_norm_least_squares",
    "ridge_solve",
    "cholesky",
    "batched_cholesky",
    "batched_forward_substitution",
    "cholesky_solve",
    "infinity_norm",
    "euclidean_distance",
]


class NumericError(ArithmeticError):
    """A factorization or solve failed numerically."""

    def __init__(self, message: str, shape: tuple[int, ...] | None = None):
        if shape is not None:
            message = f"{message} (matrix shape {shape})"
        super().__init__(message)
        self.shape = shape


class NotPositiveDefiniteError(NumericError):
    def __init__(self, pivot: int, shape: tuple[int, ...] | None = None):
        super().__init__(f"matrix is not positive definite: pivot {pivot} is non-positive", shape)
        self.pivot = pivot


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _default_rank_tol(shape: tuple[int, int]) -> float:
    # relative to sigma_max, i.e. max(rows, cols) * eps
    return max(shape) * np.finfo(np.float64).eps


@dataclass(frozen=True)
class SvdFactorization:
    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray
    numeric_rank: int


def svd(A, rank_tol: float | None = None) -> SvdFactorization:
    """Thin SVD with the numerical rank counted against ``rank_tol * sigma_max``."""
    A = as_matrix(A)
    if rank_tol is None:
        rank_tol = _default_rank_tol(A.shape)
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError("SVD did not converge", A.shape) from exc
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rank_tol * s[0]))
    return SvdFactorization(U, s, Vt, rank)


def pseudoinverse(A, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below ``rank_tol * sigma_max`` are dropped."""
    f = svd(A, rank_tol)
    r = f.numeric_rank
    if r == 0:
        return np.zeros((f.Vt.shape[1], f.U.shape[0]))
    return (f.Vt[:r].T / f.singular_values[:r]) @ f.U[:, :r].T


def min_norm_least_squares(X, Y, rank_tol: float | None = None) -> np.ndarray:
    """Minimum Frobenius-norm minimizer of ``||X W - Y||_F``.

    Equal to ``(X^T X)^+ X^T Y``; computed as ``X^+ Y`` from the thin SVD of
    ``X`` so the Gram matrix (and its squared condition number) is never formed.

    Parameters
    ----------
    X : array of shape (n, M)
    Y : array of shape (n, d) or (n,)
    rank_tol : float, optional
        Relative singular-value cutoff; defaults to ``max(n, M) * eps``.

    Returns
    -------
    W : array of shape (M, d), or (M,) when ``Y`` is 1-D.
    """
    X = as_matrix(X, "X")
    Y = np.asarray(Y, dtype=np.float64)
    vector_target = Y.ndim == 1
    Y2 = Y[:, None] if vector_target else Y
    if Y2.ndim != 2 or Y2.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has shape {Y.shape}")
    f = svd(X, rank_tol)
    r = f.numeric_rank
    if r == 0:
        W = np.zeros((X.shape[1], Y2.shape[1]))
    else:
        coef = (f.U[:, :r].T @ Y2) / f.singular_values[:r, None]
        W = f.Vt[:r].T @ coef
    return W[:, 0] if vector_target else W


def ridge_solve(X, Y, lam: float) -> np.ndarray:
    """``(X^T X + lam I)^{-1} X^T Y`` through a Cholesky factorization.

    When ``X`` has fewer rows than columns the equivalent dual form
    ``X^T (X X^T + lam I)^{-1} Y`` is used, which factors the smaller Gram matrix.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    X = as_matrix(X, "X")
    Y = np.asarray(Y, dtype=np.float64)
    vector_target = Y.ndim == 1
    Y2 = Y[:, None] if vector_target else Y
    if Y2.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has shape {Y.shape}")
    n, M = X.shape
    if n < M:
        G = X @ X.T + lam * np.eye(n)
        W = X.T @ _spd_solve(G, Y2)
    else:
        G = X.T @ X + lam * np.eye(M)
        W = _spd_solve(G, X.T @ Y2)
    return W[:, 0] if vector_target else W


def batched_cholesky(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factors of a stack of symmetric matrices.

    Parameters
    ----------
    S : array of shape (..., m, m)

    Returns
    -------
    L : array of shape (..., m, m)
        Lower-triangular factors.  Entries of failed members are meaningless.
    failed_pivot : int array of shape (...)
        ``-1`` where the factorization succeeded, otherwise the index of the
        first non-positive pivot.
    """
    S = np.asarray(S, dtype=np.float64)
    m = S.shape[-1]
    batch = S.shape[:-2]
    L = np.zeros_like(S)
    failed = np.full(batch, -1, dtype=np.int64)
    for j in range(m):
        row = L[..., j, :j]
        pivot = S[..., j, j] - np.einsum("...k,...k->...", row, row)
        bad = ~(pivot > 0.0) & (failed < 0)
        failed[bad] = j
        pivot = np.where(pivot > 0.0, pivot, 1.0)
        ljj = np.sqrt(pivot)
        L[..., j, j] = ljj
        if j + 1 < m:
            below = S[..., j + 1:, j] - np.einsum("...ik,...k->...i", L[..., j + 1:, :j], row)
            L[..., j + 1:, j] = below / ljj[..., None]
    return L, failed


def batched_forward_substitution(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L z = b`` for stacks of lower-triangular ``L`` (..., m, m) and ``b`` (..., m)."""
    m = L.shape[-1]
    shape = np.broadcast_shapes(L.shape[:-1], b.shape)
    if L.ndim > 2:
        # batched LAPACK solve; the explicit loop below is the fallback for singular stacks
        try:
            return np.linalg.solve(L, np.broadcast_to(b, shape)[..., None])[..., 0]
        except np.linalg.LinAlgError:
            pass
    z = np.zeros(shape, dtype=np.float64)
    for j in range(m):
        acc = b[..., j] - np.einsum("...k,...k->...", L[..., j, :j], z[..., :j])
        z[..., j] = acc / L[..., j, j]
    return z


def cholesky(S) -> np.ndarray:
    """Lower Cholesky factor of one SPD matrix; raises naming the failing pivot."""
    S = as_matrix(S, "S")
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"S must be square, got {S.shape}")
    L, failed = batched_cholesky(S)
    if failed >= 0:
        raise NotPositiveDefiniteError(int(failed), S.shape)
    return L


def _spd_solve(S: np.ndarray, B: np.ndarray) -> np.ndarray:
    L = cholesky(S)
    z = solve_triangular(L, B, lower=True)
    return solve_triangular(L.T, z, lower=False)


def cholesky_solve(S, b) -> np.ndarray:
    """Solve ``S x = b`` for symmetric positive definite ``S``."""
    S = as_matrix(S, "S")
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != S.shape[0]:
        raise ValueError(f"S is {S.shape} but b has length {b.shape[0]}")
    return _spd_solve(S, b)


def infinity_norm(v) -> float:
    v = np.asarray(v, dtype=np.float64)
    return float(np.max(np.abs(v))) if v.size else 0.0


def euclidean_distance(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(np.sqrt(np.sum((u - v) ** 2)))
