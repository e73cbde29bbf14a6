"""
Iterative training schemes.

Deterministic methods (FG, MM, MMI, SUB, GRADMM) take one full-gradient
iteration per epoch and must never increase Φ. Stochastic methods (SG,
MOMENTUM, ADAM) take ceil(K/B) minibatch steps per epoch. HYBRID_* runs
``warmup_iota`` stochastic epochs and hands the iterate to the named
deterministic method for the remaining epochs.
"""

import logging
import math
import time
from collections.abc import Callable
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field, field_validator, model_validator
from typing_extensions import Self

from mmsvm import linalg
from mmsvm.core.errors import DivergenceError, MonotonicityError
from mmsvm.majorants import (
    DEFAULT_EPSILON,
    CurvatureFactorization,
    apply_abar_inverse,
    curvature_a,
    factorize,
    lipschitz_mu,
    sigma_max,
)
from mmsvm.objective import (
    ObjectiveContext,
    check_theta,
    eval_phi,
    grad_phi,
    grad_phi_batch,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

MONOTONE_RTOL = 1e-12
DIVERGENCE_FACTOR = 1e3
FG_AUTO_SCALE = 1.9


class Method(str, Enum):
    FG = "fg"
    MM = "mm"
    MMI = "mmi"
    SUB = "sub"
    GRADMM = "gradmm"
    SG = "sg"
    MOMENTUM = "momentum"
    ADAM = "adam"
    HYBRID_MM = "h-mm"
    HYBRID_MMI = "h-mmi"
    HYBRID_SUB = "h-sub"

    @classmethod
    def _missing_(cls, value: object) -> "Method | None":
        # long spellings: "HYBRID_MM", "hybrid-mm", "MMI"
        if not isinstance(value, str):
            return None
        key = value.strip().lower().replace("_", "-")
        if key.startswith("hybrid-"):
            key = "h-" + key.removeprefix("hybrid-")
        return next((m for m in cls if m.value == key), None)


def coerce_method(value: object) -> object:
    return Method(value) if isinstance(value, str) else value


DETERMINISTIC = frozenset({Method.FG, Method.MM, Method.MMI, Method.SUB, Method.GRADMM})
STOCHASTIC = frozenset({Method.SG, Method.MOMENTUM, Method.ADAM})
HYBRID_TARGET = {
    Method.HYBRID_MM: Method.MM,
    Method.HYBRID_MMI: Method.MMI,
    Method.HYBRID_SUB: Method.SUB,
}

# Untuned fallbacks; the CLI exposes --alpha for the per-dataset search
DEFAULT_STOCHASTIC_ALPHA = {
    Method.SG: 1e-2,
    Method.MOMENTUM: 1e-3,
    Method.ADAM: 1e-3,
}


class SolverConfig(BaseModel):
    method: Method = Method.HYBRID_MMI
    alpha: float | None = Field(default=None, gt=0.0)
    max_epochs: int = Field(default=100, ge=0)
    warmup_iota: int = Field(default=10, ge=0)
    warmup_method: Method = Method.ADAM
    momentum_beta: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epshat: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0)
    epsilon_curv: float = Field(default=DEFAULT_EPSILON, gt=0.0)
    # None resolves to "no explicit alpha"
    fg_alpha_auto: bool | None = None
    grad_tol: float = Field(default=0.0, ge=0.0)

    @field_validator("method", "warmup_method", mode="before")
    @classmethod
    def _method_alias(cls, value: object) -> object:
        return coerce_method(value)

    @model_validator(mode="after")
    def _check_consistency(self) -> Self:
        if self.fg_alpha_auto is None:
            self.fg_alpha_auto = self.alpha is None
        if self.warmup_method not in STOCHASTIC:
            raise ValueError(f"warm-up method must be stochastic, got {self.warmup_method.value}")
        if self.method in HYBRID_TARGET and self.warmup_iota >= self.max_epochs:
            raise ValueError(
                f"warmup_iota={self.warmup_iota} must be below max_epochs={self.max_epochs}"
            )
        if self.method == Method.FG and not self.fg_alpha_auto and self.alpha is None:
            raise ValueError("FG without fg_alpha_auto needs an explicit alpha")
        return self

    def stochastic_alpha(self, method: Method) -> float:
        return self.alpha if self.alpha is not None else DEFAULT_STOCHASTIC_ALPHA[method]


class TraceRecord(BaseModel):
    epoch: int
    phi: float
    grad_norm: float
    seconds: float
    sample_grads: int


class TrainTrace(BaseModel):
    method: str
    # stepsize of the FG or stochastic phase; the warm-up one for HYBRID_*
    alpha: float | None = None
    records: list[TraceRecord] = []

    @property
    def phis(self) -> list[float]:
        return [r.phi for r in self.records]


@dataclass(frozen=True)
class SolverState:
    theta: FloatArray
    prev_theta: FloatArray
    m: FloatArray
    v: FloatArray
    rng: np.random.Generator
    epoch: int = 0
    # stochastic step counter n, 1-based once the first step is taken
    step: int = 0

    @classmethod
    def initial(cls, theta0: FloatArray, seed: int) -> "SolverState":
        theta = np.array(theta0, dtype=np.float64)
        zeros = np.zeros_like(theta)
        return cls(
            theta=theta,
            prev_theta=zeros,
            m=zeros.copy(),
            v=zeros.copy(),
            rng=np.random.default_rng(seed),
        )


def _finite_gradient(grad: FloatArray, method: Method, epoch: int) -> FloatArray:
    if not np.all(np.isfinite(grad)):
        raise DivergenceError(method.value, epoch, "non-finite gradient")
    return grad


def step_fg(state: SolverState, ctx: ObjectiveContext, alpha: float) -> SolverState:
    g = _finite_gradient(grad_phi(ctx, state.theta), Method.FG, state.epoch)
    return replace(state, theta=state.theta - alpha * g)


def step_mm_exact(state: SolverState, ctx: ObjectiveContext, epsilon: float) -> SolverState:
    g = _finite_gradient(grad_phi(ctx, state.theta), Method.MM, state.epoch)
    d = linalg.spd_solve(curvature_a(ctx, state.theta, epsilon), g)
    return replace(state, theta=state.theta - d)


def step_mm_inversion(
    state: SolverState, ctx: ObjectiveContext, fact: CurvatureFactorization
) -> SolverState:
    g = _finite_gradient(grad_phi(ctx, state.theta), Method.MMI, state.epoch)
    sigma = sigma_max(ctx.reg, state.theta, fact.epsilon)
    return replace(state, theta=state.theta - apply_abar_inverse(fact, sigma, g))


def step_subspace(
    state: SolverState,
    ctx: ObjectiveContext,
    epsilon: float,
    memory: bool = True,
    curvature: FloatArray | None = None,
) -> SolverState:
    """
    Minimize the half-quadratic majorant over span(D):
    D = [-∇Φ, θ - θ_prev] with memory (3MG), D = -∇Φ without.

    ``curvature`` replaces A(θ), e.g. by μI for the descent-lemma variant.
    """
    method = Method.SUB if memory else Method.GRADMM
    g = _finite_gradient(grad_phi(ctx, state.theta), method, state.epoch)
    if memory:
        directions = np.column_stack([-g, state.theta - state.prev_theta])
    else:
        directions = -g[:, None]
    a = curvature_a(ctx, state.theta, epsilon) if curvature is None else curvature
    ad = a @ directions
    gram = directions.T @ ad
    u = linalg.small_pinv_solve(0.5 * (gram + gram.T), directions.T @ g)
    return replace(state, theta=state.theta - directions @ u, prev_theta=state.theta)


def _draw_batch(state: SolverState, ctx: ObjectiveContext, batch: int) -> NDArray[np.int64]:
    # with replacement
    return state.rng.integers(0, ctx.num_samples, size=batch)


def step_sg(
    state: SolverState, ctx: ObjectiveContext, alpha: float, batch: int = 1
) -> SolverState:
    idx = _draw_batch(state, ctx, batch)
    g = _finite_gradient(grad_phi_batch(ctx, state.theta, idx), Method.SG, state.epoch)
    return replace(state, theta=state.theta - alpha * g, step=state.step + 1)


def step_momentum(
    state: SolverState, ctx: ObjectiveContext, alpha: float, beta: float, batch: int = 1
) -> SolverState:
    idx = _draw_batch(state, ctx, batch)
    g = _finite_gradient(grad_phi_batch(ctx, state.theta, idx), Method.MOMENTUM, state.epoch)
    m = beta * state.m + g
    return replace(state, theta=state.theta - alpha * m, m=m, step=state.step + 1)


def step_adam(state: SolverState, ctx: ObjectiveContext, cfg: SolverConfig) -> SolverState:
    idx = _draw_batch(state, ctx, cfg.batch_size)
    g = _finite_gradient(grad_phi_batch(ctx, state.theta, idx), Method.ADAM, state.epoch)
    n = state.step + 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    m = b1 * state.m + (1.0 - b1) * g
    v = b2 * state.v + (1.0 - b2) * (g * g)
    alpha_n = cfg.stochastic_alpha(Method.ADAM) * math.sqrt(1.0 - b2**n) / (1.0 - b1**n)
    theta = state.theta - alpha_n * m / (np.sqrt(v) + cfg.adam_epshat)
    return replace(state, theta=theta, m=m, v=v, step=n)


Step = Callable[[SolverState], SolverState]


def fg_alpha(
    ctx: ObjectiveContext, cfg: SolverConfig, fact: CurvatureFactorization | None
) -> float:
    if cfg.fg_alpha_auto:
        return FG_AUTO_SCALE / lipschitz_mu(ctx.design, ctx.reg, fact).mu
    assert cfg.alpha is not None
    return cfg.alpha


def _deterministic_step(
    method: Method,
    ctx: ObjectiveContext,
    cfg: SolverConfig,
    fact: CurvatureFactorization | None,
) -> Step:
    if method == Method.FG:
        alpha = fg_alpha(ctx, cfg, fact)
        logger.info(f"FG stepsize alpha={alpha:.6g}")
        return lambda s: step_fg(s, ctx, alpha)
    if method == Method.MM:
        return lambda s: step_mm_exact(s, ctx, cfg.epsilon_curv)
    if method == Method.MMI:
        assert fact is not None
        return lambda s: step_mm_inversion(s, ctx, fact)
    if method == Method.SUB:
        return lambda s: step_subspace(s, ctx, cfg.epsilon_curv, memory=True)
    if method == Method.GRADMM:
        return lambda s: step_subspace(s, ctx, cfg.epsilon_curv, memory=False)
    raise ValueError(f"{method.value} is not a deterministic method")


def _stochastic_step(method: Method, ctx: ObjectiveContext, cfg: SolverConfig) -> Step:
    alpha = cfg.stochastic_alpha(method)
    if method == Method.SG:
        return lambda s: step_sg(s, ctx, alpha, cfg.batch_size)
    if method == Method.MOMENTUM:
        return lambda s: step_momentum(s, ctx, alpha, cfg.momentum_beta, cfg.batch_size)
    if method == Method.ADAM:
        return lambda s: step_adam(s, ctx, cfg)
    raise ValueError(f"{method.value} is not a stochastic method")


def _phases(cfg: SolverConfig) -> list[tuple[Method, int]]:
    if cfg.method in HYBRID_TARGET:
        return [
            (cfg.warmup_method, cfg.warmup_iota),
            (HYBRID_TARGET[cfg.method], cfg.max_epochs - cfg.warmup_iota),
        ]
    return [(cfg.method, cfg.max_epochs)]


def _needs_factorization(cfg: SolverConfig) -> bool:
    return any(
        m == Method.MMI or (m == Method.FG and cfg.fg_alpha_auto) for m, _ in _phases(cfg)
    )


def _first_phase_alpha(
    ctx: ObjectiveContext, cfg: SolverConfig, fact: CurvatureFactorization | None
) -> float | None:
    first = _phases(cfg)[0][0]
    if first == Method.FG:
        return fg_alpha(ctx, cfg, fact)
    if first in STOCHASTIC:
        return cfg.stochastic_alpha(first)
    return None


def run(
    ctx: ObjectiveContext,
    cfg: SolverConfig,
    theta0: FloatArray,
    fact: CurvatureFactorization | None = None,
) -> tuple[FloatArray, TrainTrace]:
    theta0 = check_theta(ctx, theta0)
    if cfg.max_epochs == 0:
        return theta0.copy(), TrainTrace(method=cfg.method.value)

    if fact is None and _needs_factorization(cfg):
        fact = factorize(ctx.design, cfg.epsilon_curv)
    trace = TrainTrace(method=cfg.method.value, alpha=_first_phase_alpha(ctx, cfg, fact))

    prev_phi = eval_phi(ctx, theta0)
    if not math.isfinite(prev_phi):
        raise DivergenceError(cfg.method.value, 0, "non-finite objective at the start point")
    limit = DIVERGENCE_FACTOR * max(abs(prev_phi), 1.0)

    state = SolverState.initial(theta0, cfg.seed)
    k = ctx.num_samples
    sample_grads = 0
    start = time.perf_counter()
    converged = False

    for method, epochs in _phases(cfg):
        deterministic = method in DETERMINISTIC
        if deterministic:
            step = _deterministic_step(method, ctx, cfg, fact)
            steps_per_epoch, grads_per_step = 1, k
            # every deterministic phase starts with the 3MG convention θ_prev = 0
            state = replace(state, prev_theta=np.zeros_like(state.theta))
        else:
            step = _stochastic_step(method, ctx, cfg)
            steps_per_epoch = math.ceil(k / cfg.batch_size)
            grads_per_step = cfg.batch_size

        for _ in range(epochs):
            epoch = state.epoch + 1
            state = replace(state, epoch=epoch)
            for _ in range(steps_per_epoch):
                state = step(state)
            sample_grads += steps_per_epoch * grads_per_step

            phi = eval_phi(ctx, state.theta)
            grad_norm = float(np.max(np.abs(grad_phi(ctx, state.theta))))
            if not (math.isfinite(phi) and math.isfinite(grad_norm)):
                raise DivergenceError(method.value, epoch, "non-finite objective or gradient")
            if phi > limit:
                raise DivergenceError(
                    method.value, epoch, f"objective {phi:.6g} exceeds {limit:.6g}"
                )
            if deterministic and phi > prev_phi + MONOTONE_RTOL * (1.0 + abs(prev_phi)):
                raise MonotonicityError(method.value, epoch, prev_phi, phi)

            trace.records.append(
                TraceRecord(
                    epoch=epoch,
                    phi=phi,
                    grad_norm=grad_norm,
                    seconds=time.perf_counter() - start,
                    sample_grads=sample_grads,
                )
            )
            logger.debug(f"{method.value} epoch {epoch}: phi={phi!r} |grad|={grad_norm:.3e}")
            prev_phi = phi
            if deterministic and cfg.grad_tol > 0.0 and grad_norm <= cfg.grad_tol:
                converged = True
                break
        if converged:
            break

    logger.info(
        f"{cfg.method.value}: {len(trace.records)} epochs, phi={prev_phi:.10g}, "
        f"{time.perf_counter() - start:.3f}s"
    )
    return state.theta, trace
