"""Symmetric and positive definite matrix primitives.

Matrix functions are evaluated through symmetric eigendecompositions,
which is accurate and cheap enough for dimensions up to a few hundred.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import (DimensionError, DomainError, IllConditionedError,
                     NumericalError, StepTooLargeError)

#: Largest condition number accepted by pencil reductions.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class EigenPair:
    """Ascending eigenvalues together with their eigenvectors.

    Attributes
    ----------
    values : ndarray, shape (p,)
        Eigenvalues in ascending order.
    vectors : ndarray, shape (p, p)
        Columns are eigenvectors.
    metric : ndarray or None
        Gram matrix ``B`` for which ``vectors.T @ B @ vectors = I``. ``None``
        means the basis is orthonormal.
    """

    values: np.ndarray
    vectors: np.ndarray
    metric: Optional[np.ndarray] = None

    def inverse_vectors(self):
        """Return ``V^{-1}`` without an explicit inversion."""
        if self.metric is None:
            return self.vectors.T
        return self.vectors.T @ self.metric

    def reconstruct(self, func=None):
        """Return ``V f(Λ) V^{-1}`` (``f`` defaults to the identity)."""
        vals = self.values if func is None else func(self.values)
        return (self.vectors * vals) @ self.inverse_vectors()


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def sym(A):
    """Symmetric part ``(A + A^T) / 2`` of a square matrix."""
    A = _square(A)
    return 0.5 * (A + A.T)


def is_spd(A, tol=0.0):
    """Return ``True`` if ``A`` is symmetric with a Cholesky factor."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(np.abs(A).max(), 1.0) if A.size else 1.0
    if np.abs(A - A.T).max(initial=0.0) > max(tol, 1e-12) * scale:
        return False
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return False
    return True


def check_spd(A, name="matrix"):
    """Validate and symmetrize an SPD matrix, raising on failure."""
    A = _square(A, name)
    if not np.all(np.isfinite(A)):
        raise DomainError(f"{name} has non-finite entries")
    if not is_spd(A, tol=1e-10):
        raise DomainError(f"{name} is not symmetric positive definite")
    return 0.5 * (A + A.T)


def eig_sym(A):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (p, p)
        Symmetric matrix. Only its symmetric part is used.

    Returns
    -------
    EigenPair
        Ascending eigenvalues and an orthonormal eigenbasis.

    Raises
    ------
    NumericalError
        If LAPACK fails to converge.
    """
    A = sym(A)
    try:
        w, V = scipy.linalg.eigh(A, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    return EigenPair(w, V)


def funm_sym(A, func: Callable[[np.ndarray], np.ndarray]):
    """Apply a scalar function to a symmetric matrix spectrally."""
    return eig_sym(A).reconstruct(func)


def sqrtm_spd(A):
    """Principal square root of an SPD matrix."""
    return funm_sym(A, np.sqrt)


def invsqrtm_spd(A):
    """Inverse principal square root of an SPD matrix."""
    return funm_sym(A, lambda w: 1.0 / np.sqrt(w))


def expm_sym(A):
    """Matrix exponential of a symmetric matrix."""
    return funm_sym(A, np.exp)


def logm_spd(A):
    """Principal matrix logarithm of an SPD matrix."""
    return funm_sym(A, np.log)


def _spd_eig_guarded(M, name="M"):
    e = eig_sym(M)
    lo, hi = e.values[0], e.values[-1]
    if lo <= 0 or hi / lo > COND_LIMIT:
        cond = np.inf if lo <= 0 else hi / lo
        raise IllConditionedError(
            f"{name} condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return e


def eig_pencil(C_hat, M):
    """Eigendecomposition of ``M^{-1} C_hat`` via a symmetric reduction.

    The pencil is reduced to ``M^{-1/2} C_hat M^{-1/2}``, whose orthonormal
    eigenvectors ``W`` give ``V = M^{-1/2} W``. The basis satisfies
    ``V^T M V = I`` so that ``V^{-1} = V^T M``.

    Parameters
    ----------
    C_hat, M : array_like, shape (p, p)
        Symmetric positive definite matrices.

    Returns
    -------
    EigenPair
        Ascending eigenvalues of ``M^{-1} C_hat`` and an M-orthonormal basis,
        with ``metric`` set to ``M``.

    Raises
    ------
    DimensionError
        If the shapes differ.
    IllConditionedError
        If ``M`` has condition number above ``COND_LIMIT``.
    """
    C_hat = sym(C_hat)
    M = sym(M)
    if C_hat.shape != M.shape:
        raise DimensionError(f"shape mismatch {C_hat.shape} vs {M.shape}")
    em = _spd_eig_guarded(M)
    Mis = (em.vectors / np.sqrt(em.values)) @ em.vectors.T
    inner = eig_sym(Mis @ C_hat @ Mis)
    return EigenPair(inner.values, Mis @ inner.vectors, M)


def geodesic_step(M, G, t):
    """Move from ``M`` along the geodesic with initial velocity ``-G``.

    Returns ``M^{1/2} exp(-t M^{-1/2} G M^{-1/2}) M^{1/2}``.
    """
    M = sym(M)
    G = sym(G)
    if G.shape != M.shape:
        raise DimensionError(f"shape mismatch {M.shape} vs {G.shape}")
    if t < 0:
        raise DomainError("step must be non-negative")
    if t == 0:
        return M.copy()
    em = eig_sym(M)
    if em.values[0] <= 0:
        raise DomainError("M is not positive definite")
    root = np.sqrt(em.values)
    Ms = (em.vectors * root) @ em.vectors.T
    Mis = (em.vectors / root) @ em.vectors.T
    E = expm_sym(-t * (Mis @ G @ Mis))
    return sym(Ms @ E @ Ms)


def geodesic_step_order2(M, G, t):
    """Second-order retraction ``M - tG + (t^2/2) G M^{-1} G``.

    Raises
    ------
    StepTooLargeError
        If the result is not positive definite.
    """
    M = sym(M)
    G = sym(G)
    if G.shape != M.shape:
        raise DimensionError(f"shape mismatch {M.shape} vs {G.shape}")
    if t < 0:
        raise DomainError("step must be non-negative")
    out = sym(M - t * G + 0.5 * t * t * (G @ np.linalg.solve(M, G)))
    if not is_spd(out):
        raise StepTooLargeError(f"order-2 retraction left the SPD cone at t={t}")
    return out


def riemannian_norm(M, G):
    """Norm of tangent vector ``G`` at ``M`` under ``tr(M^{-1}G M^{-1}G)``."""
    A = np.linalg.solve(sym(M), sym(G))
    return float(np.sqrt(max(np.trace(A @ A), 0.0)))


def commutator_norm(A, B):
    """Frobenius norm of ``AB - BA``."""
    return float(np.linalg.norm(A @ B - B @ A))
