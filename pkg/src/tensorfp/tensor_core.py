"""Complex dense matrix/tensor kernels shared by all estimators.

Conventions (fixed so the factor-matrix identities hold exactly):

* Khatri-Rao product: the first argument varies slowest, i.e. output row
  ``i * J + j`` holds ``a[i, :] * b[j, :]`` for ``b`` with ``J`` rows.
* A tensor ``t`` of shape ``(J, Q, M)`` built from factor matrices
  ``(U, A, G)`` as ``t[j, q, m] = sum_k U[j, k] A[q, k] G[m, k]`` unfolds to

  - mode 1: ``J x MQ``, column ``m * Q + q``  ->  ``U @ kr(G, A).T``
  - mode 2: ``Q x MJ``, column ``j * M + m``  ->  ``A @ kr(U, G).T``
  - mode 3: ``M x QJ``, column ``q * J + j``  ->  ``G @ kr(A, U).T``
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class SolverError(RuntimeError):
    """Raised when a linear system is singular or produced non-finite values."""


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product of two matrices with equal column counts."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects 2-D arrays")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column mismatch in khatri_rao: {a.shape[1]} vs {b.shape[1]}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def kronecker(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product (thin wrapper kept for a uniform kernel surface)."""
    return np.kron(np.asarray(a), np.asarray(b))


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Unfold a (J, Q, M) tensor along one of its three modes."""
    t = np.asarray(t)
    if t.ndim != 3:
        raise ValueError("unfold expects a 3-way tensor")
    j, q, m = t.shape
    if mode == 1:
        return t.transpose(0, 2, 1).reshape(j, m * q)
    if mode == 2:
        return t.transpose(1, 0, 2).reshape(q, j * m)
    if mode == 3:
        return t.transpose(2, 1, 0).reshape(m, q * j)
    raise ValueError(f"invalid mode {mode}, expected 1, 2 or 3")


def fold(w: np.ndarray, mode: int, dims: tuple[int, int, int]) -> np.ndarray:
    """Inverse of :func:`unfold` for the given target dims (J, Q, M)."""
    w = np.asarray(w)
    j, q, m = dims
    if mode == 1:
        if w.shape != (j, m * q):
            raise ValueError(f"mode-1 matrix of shape {w.shape} != {(j, m * q)}")
        return w.reshape(j, m, q).transpose(0, 2, 1)
    if mode == 2:
        if w.shape != (q, j * m):
            raise ValueError(f"mode-2 matrix of shape {w.shape} != {(q, j * m)}")
        return w.reshape(q, j, m).transpose(1, 0, 2)
    if mode == 3:
        if w.shape != (m, q * j):
            raise ValueError(f"mode-3 matrix of shape {w.shape} != {(m, q * j)}")
        return w.reshape(m, q, j).transpose(2, 1, 0)
    raise ValueError(f"invalid mode {mode}, expected 1, 2 or 3")


def regularized_rows_solve(
    w: np.ndarray, b: np.ndarray, x0: np.ndarray, tau: float
) -> np.ndarray:
    """Minimize ``||w - X b||_F^2 + tau ||X - x0||_F^2`` over ``X``.

    Returns ``(tau x0 + w b^H)(b b^H + tau I)^{-1}`` via a Hermitian solve;
    no explicit inverse is formed.  With ``tau == 0`` the Gram matrix
    ``b b^H`` must be invertible.
    """
    w = np.asarray(w)
    b = np.asarray(b)
    x0 = np.asarray(x0)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if w.shape[1] != b.shape[1] or x0.shape != (w.shape[0], b.shape[0]):
        raise ValueError(
            f"inconsistent dims: w {w.shape}, b {b.shape}, x0 {x0.shape}"
        )
    gram = b @ b.conj().T + tau * np.eye(b.shape[0])
    rhs = tau * x0 + w @ b.conj().T
    try:
        # X = rhs @ gram^{-1}; gram is Hermitian, so gram^{-H} = gram^{-1}.
        x = scipy.linalg.solve(gram, rhs.conj().T, assume_a="her").conj().T
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise SolverError(f"singular normal equations (tau={tau})") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError(f"non-finite solution (tau={tau})")
    return x


def truncated_left_singular(m: np.ndarray, r: int) -> np.ndarray:
    """The r dominant left singular vectors of m, ordered by singular value."""
    m = np.asarray(m)
    if r > min(m.shape):
        raise ValueError(f"r={r} exceeds min dim of {m.shape}")
    u, _, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, :r]
