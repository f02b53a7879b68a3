"""
Symmetric eigen-solver

Cyclic Jacobi rotations for the small symmetric matrices used by FPCA
(a few dozen rows at most), plus symmetric square roots built on it.
"""
import logging
from typing import Tuple

import numpy as np

from .errors import ArgumentError, NumericalError

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100
EIGEN_FLOOR = 1e-12


def _check_symmetric(matrix: np.ndarray) -> np.ndarray:
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ArgumentError(f"expected a square matrix, got shape {a.shape}")
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if not np.allclose(a, a.T, rtol=0.0, atol=1e-10 * scale):
        raise ArgumentError("matrix is not symmetric")
    return (a + a.T) / 2.0


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-15, max_sweeps: int = MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues sorted descending and the matching orthonormal
    eigenvectors as columns.
    """
    a = _check_symmetric(matrix)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.abs(a).max(initial=0.0)
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), v

    for sweep in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Once rotations no longer register against the diagonal, zero the entry
                g = 100.0 * abs(apq)
                if sweep > 3 and abs(a[p, p]) + g == abs(a[p, p]) and abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue

                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning(f"Jacobi eigensolver stopped after {max_sweeps} sweeps without full convergence")

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def symmetric_sqrt(matrix: np.ndarray, floor: float = EIGEN_FLOOR) -> Tuple[np.ndarray, np.ndarray]:
    """Return (S^{1/2}, S^{-1/2}) of a positive semidefinite matrix.

    Eigenvalues below `floor` are clamped to it; clearly negative ones
    mean the matrix is not PSD and raise NumericalError.
    """
    eigenvalues, vectors = jacobi_eigh(matrix)
    scale = max(abs(eigenvalues).max(initial=0.0), 1.0)
    if eigenvalues.size and eigenvalues.min() < -1e-10 * scale:
        raise NumericalError(f"matrix is not positive semidefinite (min eigenvalue {eigenvalues.min():.3e})")

    clamped = int(np.sum(eigenvalues < floor))
    if clamped:
        logger.warning(f"Clamped {clamped} eigenvalue(s) below {floor:g} in symmetric square root")
    eigenvalues = np.maximum(eigenvalues, floor)

    root = np.sqrt(eigenvalues)
    sqrt_m = (vectors * root) @ vectors.T
    inv_sqrt_m = (vectors / root) @ vectors.T
    return (sqrt_m + sqrt_m.T) / 2.0, (inv_sqrt_m + inv_sqrt_m.T) / 2.0
