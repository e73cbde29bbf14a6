import math

import numpy as np
import pytest
from pydantic import ValidationError

from mmsvm.core.errors import DimensionMismatchError
from mmsvm.objective import (
    Regularizer,
    RegularizerKind,
    eval_phi,
    eval_phi_k,
    grad_phi,
    grad_phi_batch,
    grad_phi_k,
    potential,
    potential_deriv,
    predict,
    predict_batch,
    psi,
    reg_grad,
    sq_hinge,
    sq_hinge_deriv,
)
from tests.utils.utils import REGULARIZERS, context_from_rows, finite_difference, random_context

HYPERBOLIC = RegularizerKind.HYPERBOLIC
WELSH = RegularizerKind.WELSH
QUADRATIC = RegularizerKind.QUADRATIC


@pytest.mark.parametrize("v, loss, deriv", [(1.0, 0.0, 0.0), (0.0, 1.0, -2.0), (2.0, 0.0, 0.0), (3.0, 0.0, 0.0)])
def test_sq_hinge_values(v: float, loss: float, deriv: float) -> None:
    assert float(sq_hinge(v)) == loss
    assert float(sq_hinge_deriv(v)) == deriv


def test_sq_hinge_deriv_matches_finite_differences(rng: np.random.Generator) -> None:
    v = rng.uniform(-3.0, 3.0, size=200)
    v = v[np.abs(v - 1.0) > 1e-3]
    h = 1e-6
    fd = (sq_hinge(v + h) - sq_hinge(v - h)) / (2 * h)
    assert np.allclose(sq_hinge_deriv(v), fd, atol=1e-6)


def test_sq_hinge_deriv_is_two_lipschitz(rng: np.random.Generator) -> None:
    v1, v2 = rng.normal(size=(2, 500)) * 3
    assert np.all(np.abs(sq_hinge_deriv(v1) - sq_hinge_deriv(v2)) <= 2 * np.abs(v1 - v2) + 1e-15)


def test_potential_at_zero() -> None:
    hyp = Regularizer(kind=HYPERBOLIC, lam=2.0, delta=1.0)
    assert float(potential(hyp, 0.0)) == 2.0
    assert float(potential_deriv(hyp, 0.0)) == 0.0
    welsh = Regularizer(kind=WELSH, lam=1.0, delta=1.0)
    assert float(potential(welsh, 0.0)) == 0.0
    assert float(potential_deriv(welsh, 0.0)) == 0.0


@pytest.mark.parametrize("reg", REGULARIZERS[:2])
def test_potential_deriv_finite_difference(reg: Regularizer) -> None:
    h = 1e-5
    for w in (-1.3, -0.2, 0.7, 2.5):
        fd = (float(potential(reg, w + h)) - float(potential(reg, w - h))) / (2 * h)
        assert float(potential_deriv(reg, w)) == pytest.approx(fd, abs=1e-6)


def test_psi_examples() -> None:
    assert float(psi(Regularizer(kind=HYPERBOLIC, lam=3.0, delta=2.0), 0.0)) == 1.5
    assert float(psi(Regularizer(kind=WELSH, lam=4.0, delta=2.0), 0.0)) == 1.0
    assert float(psi(Regularizer(kind=HYPERBOLIC, lam=1.0, delta=1.0), 1.0)) == pytest.approx(
        1 / math.sqrt(2)
    )
    assert float(psi(Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=1.0), 3.0)) == 0.0


@pytest.mark.parametrize("reg", REGULARIZERS[:2])
def test_psi_positive_and_bounded(rng: np.random.Generator, reg: Regularizer) -> None:
    w = rng.normal(size=300)
    values = psi(reg, w)
    assert np.all(values > 0.0)
    assert np.all(values <= float(psi(reg, 0.0)))
    assert float(psi(reg, 0.0)) == pytest.approx(reg.lipschitz_a())


def test_lipschitz_constants() -> None:
    assert Regularizer(kind=HYPERBOLIC, lam=1.0, delta=0.5).lipschitz_a() == 2.0
    assert Regularizer(kind=WELSH, lam=1.0, delta=0.5).lipschitz_a() == 4.0
    assert Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=1.0).lipschitz_a() == 0.0


def test_smooth_potentials_need_delta() -> None:
    with pytest.raises(ValidationError):
        Regularizer(kind=WELSH, lam=1.0, delta=0.0)


def test_phi_at_zero_is_sample_count(rng: np.random.Generator) -> None:
    ctx = random_context(rng, 12, 4, Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=0.3))
    assert eval_phi(ctx, np.zeros(5)) == 12.0


def test_phi_single_sample_margin_met() -> None:
    ctx = context_from_rows([[1.0, 1.0]], Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=2.0))
    assert eval_phi(ctx, np.array([0.0, 1.0])) == 0.0


def test_phi_hyperbolic_at_zero_adds_lambda_delta(rng: np.random.Generator) -> None:
    ctx = random_context(rng, 20, 6, Regularizer(kind=HYPERBOLIC, lam=1e-4, delta=1e-4))
    assert eval_phi(ctx, np.zeros(7)) == pytest.approx(20 + 6 * 1e-8, rel=1e-14)


def test_grad_single_sample_at_zero() -> None:
    ctx = context_from_rows([[1.0, 0.0, 1.0]], Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=0.7))
    assert np.allclose(grad_phi(ctx, np.zeros(3)), [-2.0, 0.0, -2.0])


def test_grad_flat_region_is_zero() -> None:
    ctx = context_from_rows(
        [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]], Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=0.0)
    )
    assert np.all(grad_phi(ctx, np.array([10.0, 10.0, 10.0])) == 0.0)


def test_bias_component_has_no_regularizer_term(rng: np.random.Generator) -> None:
    for reg in REGULARIZERS:
        assert reg_grad(reg, np.array([0.0, 0.0, 3.0]))[-1] == 0.0
        ctx = random_context(rng, 10, 2, reg)
        theta = np.array([0.0, 0.0, 2.5])
        lmat = ctx.design.matrix
        expected = float(lmat[:, -1] @ sq_hinge_deriv(lmat @ theta))
        assert grad_phi(ctx, theta)[-1] == pytest.approx(expected)


def test_gradient_matches_finite_differences(rng: np.random.Generator) -> None:
    for trial in range(100):
        reg = REGULARIZERS[trial % 3]
        ctx = random_context(rng, 10, 4, reg)
        theta = rng.normal(size=5)
        fd = finite_difference(lambda t, ctx=ctx: eval_phi(ctx, t), theta)
        grad = grad_phi(ctx, theta)
        assert np.max(np.abs(grad - fd)) / (1 + np.max(np.abs(grad))) < 1e-5


def test_sample_gradient_matches_finite_differences(rng: np.random.Generator) -> None:
    for trial in range(30):
        reg = REGULARIZERS[trial % 3]
        ctx = random_context(rng, 8, 3, reg)
        theta = rng.normal(size=4)
        k = int(rng.integers(0, 8))
        fd = finite_difference(lambda t, ctx=ctx, k=k: eval_phi_k(ctx, t, k), theta)
        grad = grad_phi_k(ctx, theta, k)
        assert np.max(np.abs(grad - fd)) / (1 + np.max(np.abs(grad))) < 1e-5


def test_sample_gradients_sum_to_full_gradient_without_regularizer(rng: np.random.Generator) -> None:
    ctx = random_context(rng, 9, 3, Regularizer(kind=QUADRATIC, lam=0.0, delta=0.0, eta=0.0))
    theta = rng.normal(size=4)
    total = sum(grad_phi_k(ctx, theta, k) for k in range(9))
    assert np.allclose(total, grad_phi(ctx, theta))


def test_inactive_sample_gradient_is_regularizer_gradient() -> None:
    reg = REGULARIZERS[0]
    ctx = context_from_rows([[1.0, 1.0], [-1.0, -1.0]], reg)
    theta = np.array([2.0, 1.0])
    assert np.allclose(grad_phi_k(ctx, theta, 0), reg_grad(reg, theta))


def test_batch_gradient_averages_samples(rng: np.random.Generator) -> None:
    reg = REGULARIZERS[1]
    ctx = random_context(rng, 10, 3, reg)
    theta = rng.normal(size=4)
    idx = np.array([2, 5, 5, 9])
    loss_part = [grad_phi_k(ctx, theta, int(k)) - reg_grad(reg, theta) for k in idx]
    expected = np.mean(loss_part, axis=0) + reg_grad(reg, theta)
    assert np.allclose(grad_phi_batch(ctx, theta, idx), expected)
    assert np.allclose(grad_phi_batch(ctx, theta, np.array([3])), grad_phi_k(ctx, theta, 3))


def test_sample_index_out_of_range(rng: np.random.Generator) -> None:
    ctx = random_context(rng, 5, 2, REGULARIZERS[0])
    with pytest.raises(IndexError):
        eval_phi_k(ctx, np.zeros(3), 5)


def test_dimension_mismatch(rng: np.random.Generator) -> None:
    ctx = random_context(rng, 5, 2, REGULARIZERS[0])
    with pytest.raises(DimensionMismatchError):
        eval_phi(ctx, np.zeros(4))


@pytest.mark.parametrize("reg", [REGULARIZERS[0], REGULARIZERS[2]])
def test_convexity(rng: np.random.Generator, reg: Regularizer) -> None:
    ctx = random_context(rng, 15, 4, reg)
    for _ in range(100):
        t1, t2 = rng.normal(size=(2, 5)) * 2
        t = rng.uniform(0.01, 0.99)
        lhs = eval_phi(ctx, t * t1 + (1 - t) * t2)
        rhs = t * eval_phi(ctx, t1) + (1 - t) * eval_phi(ctx, t2)
        assert lhs <= rhs + 1e-9 * (1 + abs(rhs))


def test_predict() -> None:
    assert predict(np.array([1.0, 0.0, 0.0]), {1: 2.0, 2: 5.0}) == 1
    assert predict(np.array([1.0, 0.0, -3.0]), {1: 2.0}) == -1
    assert predict(np.array([1.0, 0.0, -2.0]), {1: 2.0}) == 1


def test_predict_batch_matches_predict() -> None:
    theta = np.array([1.0, -1.0, 0.0])
    x = np.array([[1.0, 1.0], [0.0, 2.0], [3.0, 0.0]])
    assert predict_batch(theta, x).tolist() == [1, -1, 1]
