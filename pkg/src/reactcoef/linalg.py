"""Sparse SPD storage, products and a Jacobi-preconditioned CG solver."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class ConvergenceError(RuntimeError):
    """Raised when CG hits its iteration cap; carries the achieved relative residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def as_spd_matrix(A, tol: float = 1e-12) -> sp.csr_matrix:
    """Convert to CSR and check symmetry and positive diagonal."""
    A = sp.csr_matrix(A, dtype=float)
    n, m = A.shape
    if n != m:
        raise ValueError(f"matrix must be square, got {A.shape}")
    check_symmetric(A, tol)
    if n and np.any(A.diagonal() <= 0):
        raise ValueError("SPD matrix needs a strictly positive diagonal")
    return A


def check_symmetric(A, tol: float = 1e-12) -> None:
    scale = abs(A).max() if A.nnz else 0.0
    if A.nnz and abs(A - A.T).max() > tol * scale:
        raise ValueError("matrix is not symmetric")


def matvec(A, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def dot(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(x @ y)


def solve_spd(A, b, rel_tol: float = 1e-12, x0=None, check: bool = True,
              maxiter: int | None = None) -> np.ndarray:
    """Solve ``A x = b`` by preconditioned conjugate gradients.

    Stops once ``||A x - b||_2 <= rel_tol * ||b||_2`` (true residual, recomputed
    at exit). The iteration cap defaults to ``10 n``.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"dimension mismatch: {A.shape} vs rhs of length {n}")
    if check:
        check_symmetric(A)
    if n == 0:
        return np.zeros(0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise ValueError("SPD matrix needs a strictly positive diagonal")
    inv_diag = 1.0 / diag
    maxiter = 10 * n if maxiter is None else maxiter
    target = rel_tol * bnorm

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    for _ in range(3):  # a couple of restarts absorb drift of the recursive residual
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            return x
        z = inv_diag * r
        p = z.copy()
        rz = r @ z
        for _ in range(maxiter):
            q = A @ p
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            if np.linalg.norm(r) <= 0.5 * target:
                break
            z = inv_diag * r
            rz_new = r @ z
            p *= rz_new / rz
            p += z
            rz = rz_new
        else:
            r = b - A @ x
            res = np.linalg.norm(r) / bnorm
            raise ConvergenceError(f"CG did not converge in {maxiter} iterations "
                                   f"(relative residual {res:.3e})", res)
        r = b - A @ x
    res = np.linalg.norm(r) / bnorm
    if res > rel_tol:
        raise ConvergenceError(f"CG stagnated at relative residual {res:.3e}", res)
    return x
