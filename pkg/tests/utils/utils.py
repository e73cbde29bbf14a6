from collections.abc import Callable
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from mmsvm.dataio import Dataset, DesignMatrix, Sample, serialize_libsvm
from mmsvm.objective import ObjectiveContext, Regularizer, RegularizerKind

REGULARIZERS = (
    Regularizer(kind=RegularizerKind.HYPERBOLIC, lam=0.5, delta=0.3, eta=0.1),
    Regularizer(kind=RegularizerKind.WELSH, lam=0.5, delta=0.3, eta=0.0),
    Regularizer(kind=RegularizerKind.QUADRATIC, lam=0.0, delta=0.0, eta=0.2),
)


def random_labels(rng: np.random.Generator, k: int) -> NDArray[np.float64]:
    y = rng.choice([-1.0, 1.0], size=k)
    y[0], y[-1] = 1.0, -1.0
    return y


def random_context(
    rng: np.random.Generator, k: int, n: int, reg: Regularizer
) -> ObjectiveContext:
    x = rng.normal(size=(k, n))
    y = random_labels(rng, k)
    matrix = y[:, None] * np.hstack([x, np.ones((k, 1))])
    return ObjectiveContext(DesignMatrix(matrix), reg)


def context_from_rows(rows: list[list[float]], reg: Regularizer) -> ObjectiveContext:
    return ObjectiveContext(DesignMatrix(np.array(rows, dtype=np.float64)), reg)


def synthetic_dataset(seed: int, k: int = 60, n: int = 5, name: str = "synthetic") -> Dataset:
    """Noisy linearly separable samples with sparse 0/1-ish features."""
    rng = np.random.default_rng(seed)
    w_true = rng.normal(size=n)
    samples = []
    for i in range(k):
        x = np.where(rng.random(n) < 0.6, rng.normal(size=n), 0.0)
        score = float(x @ w_true) + 0.1 * rng.normal()
        label = 1 if score >= 0.0 or i == 0 else -1
        if i == 1:
            label = -1
        features = {j + 1: float(v) for j, v in enumerate(x) if v != 0.0}
        samples.append(Sample(label=label, features=features))
    return Dataset(samples=tuple(samples), num_features=n, name=name)


def write_libsvm(path: Path, ds: Dataset) -> Path:
    path.write_text(serialize_libsvm(ds))
    return path


def finite_difference(
    f: Callable[[NDArray[np.float64]], float], theta: NDArray[np.float64]
) -> NDArray[np.float64]:
    grad = np.zeros_like(theta)
    for i in range(theta.shape[0]):
        h = 1e-6 * (1.0 + abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (f(up) - f(down)) / (2.0 * h)
    return grad
