"""Small dense linear-algebra contracts used by the solvers."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.linalg

from .exceptions import RankError, SymmetryError, ValidationError

# singular values below RCOND * s_max count as zero
RCOND = 1e-12


class SvdResult(NamedTuple):
    U: np.ndarray
    s: np.ndarray
    V: np.ndarray


def least_squares(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Minimum-norm minimizer of ``||B - A X||_F``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"row mismatch: A is {A.shape}, B is {B.shape}")
    if not np.any(A):
        X = np.zeros((A.shape[1], B.shape[1]))
    else:
        X = np.linalg.lstsq(A, B, rcond=RCOND)[0]
    return X[:, 0] if squeeze else X


def fix_signs(U: np.ndarray, V: np.ndarray | None = None):
    """Flip singular-vector pairs so each column's largest-|.| entry is >= 0."""
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    if V is not None:
        V = V * signs
    return U, V


def truncated_svd(A: np.ndarray, r: int) -> SvdResult:
    """Leading ``r`` singular triplets of ``A`` with deterministic signs."""
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if not 1 <= r <= min(m, n):
        raise RankError(f"rank {r} out of range for a {m}x{n} matrix")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U, V = fix_signs(U[:, :r], Vt[:r].T)
    return SvdResult(U, s[:r], V)


def sym_eig_smallest(A: np.ndarray, k: int, tol: float = 1e-10):
    """Eigenpairs with the ``k`` smallest eigenvalues of a symmetric matrix.

    Returns ``(values, vectors)`` with values ascending and vectors as columns.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise SymmetryError(f"expected a square matrix, got {A.shape}")
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} out of range for n={n}")
    scale = max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    if np.max(np.abs(A - A.T), initial=0.0) > tol * scale:
        raise SymmetryError("matrix is not symmetric")
    A = (A + A.T) / 2
    values, vectors = scipy.linalg.eigh(A, subset_by_index=(0, k - 1))
    return values, vectors
