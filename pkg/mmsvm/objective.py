"""
Regularized squared-hinge objective Φ(θ) = g(Lθ) + f̃(θ).

θ = [w, β] has N weights followed by the bias. The regularizer
f̃(θ) = Σ φ(w_i) + η/2 ‖w‖² never touches β.
"""

from collections.abc import Mapping
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing_extensions import Self

from mmsvm.core.errors import DimensionMismatchError
from mmsvm.dataio import DesignMatrix

FloatArray = NDArray[np.float64]


class RegularizerKind(str, Enum):
    QUADRATIC = "quadratic"
    HYPERBOLIC = "hyperbolic"
    WELSH = "welsh"


class Regularizer(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: RegularizerKind = RegularizerKind.HYPERBOLIC
    lam: float = Field(default=1e-4, ge=0.0)
    delta: float = Field(default=1e-4, ge=0.0)
    eta: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _delta_required(self) -> Self:
        if self.kind != RegularizerKind.QUADRATIC and self.delta <= 0.0:
            raise ValueError(f"{self.kind.value} potential needs delta > 0")
        return self

    def lipschitz_a(self) -> float:
        """Lipschitz constant of φ′."""
        if self.kind == RegularizerKind.HYPERBOLIC:
            return self.lam / self.delta
        if self.kind == RegularizerKind.WELSH:
            return self.lam / self.delta**2
        return 0.0

    def describe(self) -> str:
        return f"{self.kind.value} {self.lam!r} {self.delta!r} {self.eta!r}"


@dataclass(frozen=True)
class ObjectiveContext:
    design: DesignMatrix
    reg: Regularizer

    @property
    def num_samples(self) -> int:
        return self.design.num_samples

    @property
    def dim(self) -> int:
        return self.design.dim

    @cached_property
    def gram(self) -> FloatArray:
        """LᵀL, reused by every curvature assembly."""
        lmat = self.design.matrix
        g: FloatArray = lmat.T @ lmat
        return g


def sq_hinge(v: FloatArray | float) -> FloatArray:
    return np.maximum(1.0 - np.asarray(v, dtype=np.float64), 0.0) ** 2


def sq_hinge_deriv(v: FloatArray | float) -> FloatArray:
    return -2.0 * np.maximum(1.0 - np.asarray(v, dtype=np.float64), 0.0)


def potential(reg: Regularizer, w: FloatArray | float) -> FloatArray:
    w = np.asarray(w, dtype=np.float64)
    if reg.kind == RegularizerKind.HYPERBOLIC:
        return reg.lam * np.sqrt(w**2 + reg.delta**2)
    if reg.kind == RegularizerKind.WELSH:
        return reg.lam * (1.0 - np.exp(-(w**2) / (2.0 * reg.delta**2)))
    return np.zeros_like(w)


def potential_deriv(reg: Regularizer, w: FloatArray | float) -> FloatArray:
    w = np.asarray(w, dtype=np.float64)
    if reg.kind == RegularizerKind.HYPERBOLIC:
        return reg.lam * w / np.sqrt(w**2 + reg.delta**2)
    if reg.kind == RegularizerKind.WELSH:
        return reg.lam * (w / reg.delta**2) * np.exp(-(w**2) / (2.0 * reg.delta**2))
    return np.zeros_like(w)


def psi(reg: Regularizer, w: FloatArray | float) -> FloatArray:
    """φ′(w)/w in closed form, finite at w = 0."""
    w = np.asarray(w, dtype=np.float64)
    if reg.kind == RegularizerKind.HYPERBOLIC:
        return reg.lam / np.sqrt(w**2 + reg.delta**2)
    if reg.kind == RegularizerKind.WELSH:
        return (reg.lam / reg.delta**2) * np.exp(-(w**2) / (2.0 * reg.delta**2))
    return np.zeros_like(w)


def check_theta(ctx: ObjectiveContext, theta: FloatArray) -> FloatArray:
    t = np.asarray(theta, dtype=np.float64)
    if t.shape != (ctx.dim,):
        raise DimensionMismatchError(
            f"parameter vector has shape {t.shape}, expected ({ctx.dim},)"
        )
    return t


def reg_value(reg: Regularizer, theta: FloatArray) -> float:
    w = theta[:-1]
    return float(np.sum(potential(reg, w)) + 0.5 * reg.eta * float(w @ w))


def reg_grad(reg: Regularizer, theta: FloatArray) -> FloatArray:
    w = theta[:-1]
    grad = np.zeros_like(theta)
    grad[:-1] = potential_deriv(reg, w) + reg.eta * w
    return grad


def eval_phi(ctx: ObjectiveContext, theta: FloatArray) -> float:
    t = check_theta(ctx, theta)
    margins = ctx.design.matrix @ t
    return float(np.sum(sq_hinge(margins))) + reg_value(ctx.reg, t)


def grad_phi(ctx: ObjectiveContext, theta: FloatArray) -> FloatArray:
    t = check_theta(ctx, theta)
    lmat = ctx.design.matrix
    grad: FloatArray = lmat.T @ sq_hinge_deriv(lmat @ t) + reg_grad(ctx.reg, t)
    return grad


def _check_index(ctx: ObjectiveContext, k: int) -> None:
    if not 0 <= k < ctx.num_samples:
        raise IndexError(f"sample index {k} out of range [0, {ctx.num_samples})")


def eval_phi_k(ctx: ObjectiveContext, theta: FloatArray, k: int) -> float:
    t = check_theta(ctx, theta)
    _check_index(ctx, k)
    row = ctx.design.matrix[k]
    return float(sq_hinge(row @ t)) + reg_value(ctx.reg, t)


def grad_phi_k(ctx: ObjectiveContext, theta: FloatArray, k: int) -> FloatArray:
    """Per-sample gradient; it carries the full regularizer gradient."""
    t = check_theta(ctx, theta)
    _check_index(ctx, k)
    row = ctx.design.matrix[k]
    grad: FloatArray = row * sq_hinge_deriv(row @ t) + reg_grad(ctx.reg, t)
    return grad


def grad_phi_batch(
    ctx: ObjectiveContext, theta: FloatArray, indices: NDArray[np.int64]
) -> FloatArray:
    """(1/B) Σ_{i in batch} ∇Φ_i(θ); indices may repeat."""
    t = check_theta(ctx, theta)
    rows = ctx.design.matrix[indices]
    grad: FloatArray = rows.T @ sq_hinge_deriv(rows @ t) / len(indices) + reg_grad(
        ctx.reg, t
    )
    return grad


def predict(theta: FloatArray, features: Mapping[int, float]) -> int:
    """sign(wᵀx + β) with sign(0) = +1; feature indices are 1-based."""
    score = float(theta[-1]) + sum(theta[idx - 1] * val for idx, val in features.items())
    return 1 if score >= 0.0 else -1


def predict_batch(theta: FloatArray, x: FloatArray) -> NDArray[np.int64]:
    scores = x @ theta[:-1] + theta[-1]
    return np.where(scores >= 0.0, 1, -1).astype(np.int64)
