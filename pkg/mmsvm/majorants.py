"""
Quadratic tangent majorants of Φ.

Two curvatures are available: the constant μI of the descent lemma, and the
half-quadratic A(θ) = 2LᵀL + Diag(ψ(w)+η, ε). The latter is further bounded
by Ā(θ) = 2LᵀL + σ_max(θ) I, whose inverse is applied through a one-time
factorization LᵀL = P Diag(Λ) Pᵀ.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from mmsvm import linalg
from mmsvm.dataio import DesignMatrix
from mmsvm.objective import ObjectiveContext, Regularizer, eval_phi, grad_phi, psi

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_EPSILON = 1e-4


@dataclass(frozen=True)
class LipschitzBound:
    mu: float
    spectral_norm_sq: float
    a: float
    eta: float


@dataclass(frozen=True)
class CurvatureFactorization:
    p: FloatArray
    gram_eigs: FloatArray
    epsilon: float

    @property
    def spectral_norm_sq(self) -> float:
        return float(np.max(self.gram_eigs, initial=0.0))


def factorize(design: DesignMatrix, epsilon: float = DEFAULT_EPSILON) -> CurvatureFactorization:
    """
    Lᵀ = QR, RRᵀ = UΛUᵀ, P = QU.

    When K < N+1 only the leading K columns of Q carry R; the remaining
    columns of the complete Q span the complement and get Λ = 0.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be strictly positive")
    lt = design.matrix.T
    dim, k = lt.shape
    q, r = linalg.qr_factorize(lt, mode="complete")
    rank_dim = min(dim, k)
    r_top = r[:rank_dim, :]
    eig = linalg.sym_eigen(r_top @ r_top.T)

    p = np.empty((dim, dim))
    p[:, :rank_dim] = q[:, :rank_dim] @ eig.eigenvectors
    p[:, rank_dim:] = q[:, rank_dim:]
    gram_eigs = np.zeros(dim)
    gram_eigs[:rank_dim] = np.clip(eig.eigenvalues, 0.0, None)
    logger.info(
        f"Factorized curvature for L of shape {design.matrix.shape} "
        f"(thin={k < dim}, ||L||^2={gram_eigs.max(initial=0.0):.6g})"
    )
    return CurvatureFactorization(p=p, gram_eigs=gram_eigs, epsilon=epsilon)


def lipschitz_mu(
    design: DesignMatrix,
    reg: Regularizer,
    fact: CurvatureFactorization | None = None,
) -> LipschitzBound:
    """μ = 2‖L‖² + a + η, with ‖L‖² read off the curvature factorization."""
    if fact is None:
        fact = factorize(design)
    norm_sq = fact.spectral_norm_sq
    a = reg.lipschitz_a()
    return LipschitzBound(mu=2.0 * norm_sq + a + reg.eta, spectral_norm_sq=norm_sq, a=a, eta=reg.eta)


def curvature_diagonal(reg: Regularizer, theta: FloatArray, epsilon: float) -> FloatArray:
    diag = np.empty_like(theta, dtype=np.float64)
    diag[:-1] = psi(reg, theta[:-1]) + reg.eta
    diag[-1] = epsilon
    return diag


def curvature_a(ctx: ObjectiveContext, theta: FloatArray, epsilon: float) -> FloatArray:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be strictly positive")
    a = 2.0 * ctx.gram
    a[np.diag_indices_from(a)] += curvature_diagonal(ctx.reg, np.asarray(theta), epsilon)
    return a


def sigma_max(reg: Regularizer, theta: FloatArray, epsilon: float) -> float:
    """max{ψ(w_1)+η, ..., ψ(w_N)+η, ε}."""
    return float(np.max(curvature_diagonal(reg, np.asarray(theta, dtype=np.float64), epsilon)))


def apply_abar_inverse(fact: CurvatureFactorization, sigma: float, b: FloatArray) -> FloatArray:
    """P Diag(1/(2Λ + σ)) Pᵀ b, in O((N+1)²)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be strictly positive")
    x: FloatArray = fact.p @ ((fact.p.T @ b) / (2.0 * fact.gram_eigs + sigma))
    return x


def hq_majorant_value(
    ctx: ObjectiveContext, at: FloatArray, x: FloatArray, epsilon: float
) -> float:
    d = np.asarray(x) - np.asarray(at)
    curv = curvature_a(ctx, at, epsilon)
    return eval_phi(ctx, at) + float(grad_phi(ctx, at) @ d) + 0.5 * float(d @ curv @ d)


def lipschitz_majorant_value(
    ctx: ObjectiveContext, at: FloatArray, x: FloatArray, mu: float
) -> float:
    d = np.asarray(x) - np.asarray(at)
    return eval_phi(ctx, at) + float(grad_phi(ctx, at) @ d) + 0.5 * mu * float(d @ d)
