"""Dense linear-algebra kernels used by the majorants and the solvers.

QR goes through LAPACK's Householder routine (``numpy.linalg.qr``), the
symmetric eigendecomposition through the symmetric QR driver
(``numpy.linalg.eigh``) and SPD solves through a Cholesky factorization
(``scipy.linalg.cho_factor``). All outputs are sign-normalized so that the
first nonzero entry of every Q / eigenvector column is nonnegative.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla
from numpy.typing import NDArray

from mmsvm.core.errors import (
    DimensionMismatchError,
    NonFiniteError,
    NotPositiveDefiniteError,
    NotSymmetricError,
)

FloatArray = NDArray[np.float64]

SYMMETRY_TOL = 1e-10
PINV_RTOL = 1e-12


@dataclass(frozen=True)
class SymmetricEigen:
    eigenvectors: FloatArray
    # descending
    eigenvalues: FloatArray


def _as_matrix(m: FloatArray) -> FloatArray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    return a


def _check_symmetric(a: FloatArray) -> None:
    if a.shape[0] != a.shape[1]:
        raise NotSymmetricError(f"matrix is not square: {a.shape}")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if float(np.max(np.abs(a - a.T), initial=0.0)) > SYMMETRY_TOL * scale:
        raise NotSymmetricError("matrix is not symmetric")


def _column_signs(q: FloatArray) -> FloatArray:
    """+1/-1 per column so that the first nonzero entry becomes nonnegative."""
    signs = np.ones(q.shape[1])
    nonzero = q != 0.0
    for j in range(q.shape[1]):
        rows = np.flatnonzero(nonzero[:, j])
        if rows.size and q[rows[0], j] < 0.0:
            signs[j] = -1.0
    return signs


def qr_factorize(
    m: FloatArray, mode: Literal["thin", "complete"] = "thin"
) -> tuple[FloatArray, FloatArray]:
    """
    Householder QR of ``m``.

    ``thin`` returns Q with min(rows, cols) columns, ``complete`` a square
    orthogonal Q whose trailing columns span the orthogonal complement of
    the range of ``m``. R is upper trapezoidal in both modes.
    """
    a = _as_matrix(m)
    q, r = np.linalg.qr(a, mode="reduced" if mode == "thin" else "complete")
    signs = _column_signs(q)
    return q * signs, r * signs[:, None]


def sym_eigen(m: FloatArray) -> SymmetricEigen:
    a = _as_matrix(m)
    _check_symmetric(a)
    # eigh reads one triangle only
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    return SymmetricEigen(eigenvectors=v * _column_signs(v), eigenvalues=w)


def spd_solve(a: FloatArray, b: FloatArray) -> FloatArray:
    mat = _as_matrix(a)
    rhs = np.asarray(b, dtype=np.float64)
    if mat.shape[0] != mat.shape[1] or rhs.shape != (mat.shape[0],):
        raise DimensionMismatchError(
            f"cannot solve system of shape {mat.shape} with right-hand side {rhs.shape}"
        )
    _check_symmetric(mat)
    try:
        factor = sla.cho_factor(mat, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"matrix is not positive definite: {e}")
    x: FloatArray = sla.cho_solve(factor, rhs, check_finite=False)
    return x


def small_pinv_solve(g: FloatArray, b: FloatArray) -> FloatArray:
    """
    Minimum-norm solution g⁺b for the 1x1 or 2x2 Gram systems of the
    subspace step. Eigenvalues below 1e-12 of the largest one are dropped.
    """
    mat = _as_matrix(g)
    rhs = np.asarray(b, dtype=np.float64)
    size = mat.shape[0]
    if mat.shape != (size, size) or size not in (1, 2) or rhs.shape != (size,):
        raise DimensionMismatchError(
            f"expected a 1x1 or 2x2 system, got {mat.shape} and {rhs.shape}"
        )
    eig = sym_eigen(mat)
    largest = float(eig.eigenvalues[0])
    cutoff = PINV_RTOL * (largest if largest > 0.0 else 1.0)
    u = eig.eigenvectors
    coef = u.T @ rhs
    inv = np.zeros_like(eig.eigenvalues)
    keep = eig.eigenvalues > cutoff
    inv[keep] = 1.0 / eig.eigenvalues[keep]
    x: FloatArray = u @ (inv * coef)
    return x
