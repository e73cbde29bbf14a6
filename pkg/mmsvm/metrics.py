"""Test-set classification metrics, sparsity counts and optimality gaps."""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from mmsvm.core.errors import DatasetError, DivergenceError
from mmsvm.dataio import Dataset, feature_matrix
from mmsvm.objective import ObjectiveContext, eval_phi, grad_phi, predict_batch
from mmsvm.solvers import Method, SolverConfig, TrainTrace, run

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

UNDEFINED = "undefined"
GAP_FLOOR = 1e-16
REFMIN_TOL = 1e-10
REFMIN_MAX_ITER = 5000


class ConfusionCounts(BaseModel):
    tp: int = Field(ge=0)
    tn: int = Field(ge=0)
    fp: int = Field(ge=0)
    fn: int = Field(ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


class MetricReport(BaseModel):
    # None is the undefined marker for a zero denominator
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    sparsity_count: int
    sparsity_total: int

    def formatted(self) -> dict[str, str]:
        def fmt(value: float | None) -> str:
            return UNDEFINED if value is None else f"{value:.4f}"

        return {
            "accuracy": fmt(self.accuracy),
            "precision": fmt(self.precision),
            "recall": fmt(self.recall),
            "f1": fmt(self.f1),
            "sparsity": f"{self.sparsity_count}/{self.sparsity_total}",
        }


class ReferenceMinimum(BaseModel):
    phi_star: float
    produced_by: str
    gradient_norm_at_star: float
    iterations: int
    tolerance: float
    converged: bool


@dataclass(frozen=True)
class OptimalityGap:
    raw: FloatArray

    @property
    def clamped(self) -> FloatArray:
        """Floored at 1e-16 for log-scale plots."""
        return np.maximum(self.raw, GAP_FLOOR)


def confusion(theta: FloatArray, test: Dataset) -> ConfusionCounts:
    if len(test) == 0:
        raise DatasetError("cannot evaluate on an empty test set")
    predicted = predict_batch(theta, feature_matrix(test, num_features=theta.shape[0] - 1))
    actual = test.labels
    return ConfusionCounts(
        tp=int(np.sum((predicted == 1) & (actual == 1))),
        tn=int(np.sum((predicted == -1) & (actual == -1))),
        fp=int(np.sum((predicted == 1) & (actual == -1))),
        fn=int(np.sum((predicted == -1) & (actual == 1))),
    )


def _ratio(num: float, den: float) -> float | None:
    return num / den if den > 0 else None


def sparsity_count(w: FloatArray, tau: float) -> int:
    return int(np.sum(np.abs(w) <= tau))


def report(c: ConfusionCounts, n_test: int, w: FloatArray, sparsity_tau: float) -> MetricReport:
    return MetricReport(
        accuracy=_ratio(c.tp + c.tn, n_test),
        precision=_ratio(c.tp, c.tp + c.fp),
        recall=_ratio(c.tp, c.tp + c.fn),
        f1=_ratio(c.tp, c.tp + 0.5 * (c.fn + c.fp)),
        sparsity_count=sparsity_count(w, sparsity_tau),
        sparsity_total=int(w.shape[0]),
    )


def compute_reference_minimum(
    ctx: ObjectiveContext,
    epsilon: float,
    tol: float = REFMIN_TOL,
    max_iter: int = REFMIN_MAX_ITER,
    method: Method = Method.MM,
) -> ReferenceMinimum:
    """Long deterministic run whose final Φ estimates min Φ."""
    cfg = SolverConfig(method=method, max_epochs=max_iter, epsilon_curv=epsilon, grad_tol=tol)
    theta, trace = run(ctx, cfg, np.zeros(ctx.dim))
    if trace.records:
        last = trace.records[-1]
        phi_star, grad_norm, iterations = last.phi, last.grad_norm, last.epoch
    else:
        phi_star = eval_phi(ctx, theta)
        grad_norm = float(np.max(np.abs(grad_phi(ctx, theta))))
        iterations = 0
    if not np.isfinite(phi_star):
        raise DivergenceError(method.value, iterations, "non-finite reference minimum")
    converged = grad_norm <= tol
    if not converged:
        logger.warning(
            f"Reference minimum hit the {max_iter} iteration cap with |grad|={grad_norm:.3e}"
        )
    return ReferenceMinimum(
        phi_star=phi_star,
        produced_by=method.value,
        gradient_norm_at_star=grad_norm,
        iterations=iterations,
        tolerance=tol,
        converged=converged,
    )


def optimality_gap(trace: TrainTrace, ref: ReferenceMinimum) -> OptimalityGap:
    return OptimalityGap(raw=np.array(trace.phis, dtype=np.float64) - ref.phi_star)
