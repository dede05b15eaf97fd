"""Small dense symmetric eigenproblems via cyclic Jacobi rotations."""

from __future__ import annotations

import numpy as np

__all__ = ["AsymmetricMatrixError", "jacobi_eigh", "min_eigenvalue", "spectral_norm_sym"]


class AsymmetricMatrixError(ValueError):
    pass


def _check_symmetric(M, tol):
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if M.size and np.max(np.abs(M - M.T)) > tol:
        raise AsymmetricMatrixError(
            f"matrix not symmetric: max |M - M^T| = {np.max(np.abs(M - M.T)):.3e}")
    return 0.5 * (M + M.T)


def jacobi_eigh(M, tol: float = 1e-12, sym_tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix.

    Cyclic row-by-row Jacobi sweeps until the off-diagonal Frobenius norm is
    at most ``tol`` times ``max(1, ||M||_F)``.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    V : ndarray
        Orthonormal eigenvectors as columns, matching ``w``.
    """
    A = _check_symmetric(M, sym_tol)
    m = A.shape[0]
    V = np.eye(m)
    scale = max(1.0, float(np.linalg.norm(A)))
    offdiag = ~np.eye(m, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(A[offdiag] ** 2))
        if off <= tol * scale:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- R^T A R with R the (p, q) rotation
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
    else:
        raise RuntimeError("Jacobi sweeps did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def min_eigenvalue(M, sym_tol: float = 1e-10) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    w, _ = jacobi_eigh(M, sym_tol=sym_tol)
    return float(w[0])


def spectral_norm_sym(M, sym_tol: float = 1e-10) -> float:
    """2-norm of a symmetric matrix, ``max |eigenvalue|``."""
    w, _ = jacobi_eigh(M, sym_tol=sym_tol)
    return float(np.max(np.abs(w))) if w.size else 0.0
