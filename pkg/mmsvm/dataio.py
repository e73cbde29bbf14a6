"""LIBSVM datasets: parsing, serialization, train/test splits and the design matrix."""

import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field

from mmsvm.core.errors import DatasetError, DimensionMismatchError, ParseError

logger = logging.getLogger(__name__)

# Raw label schemes found in LIBSVM mirrors, mapped onto {-1, +1}
LABEL_SCHEMES: tuple[dict[int, int], ...] = (
    {-1: -1, 1: 1},
    {0: -1, 1: 1},
    {2: -1, 1: 1},
)


@dataclass(frozen=True)
class Sample:
    label: int
    features: Mapping[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    num_features: int
    name: str = ""

    def __post_init__(self) -> None:
        highest = max((max(s.features, default=0) for s in self.samples), default=0)
        if self.num_features < highest:
            raise DimensionMismatchError(
                f"num_features={self.num_features} is below the highest feature index {highest}"
            )

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def labels(self) -> NDArray[np.float64]:
        return np.array([s.label for s in self.samples], dtype=np.float64)

    def with_num_features(self, num_features: int) -> "Dataset":
        return Dataset(samples=self.samples, num_features=num_features, name=self.name)


@dataclass(frozen=True)
class DesignMatrix:
    """L = Diag(y) [X | 1], one row per training sample."""

    matrix: NDArray[np.float64]

    @property
    def num_samples(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


class SplitSpec(BaseModel):
    train_fraction: float = Field(default=0.8, gt=0.0, le=1.0)
    seed: int = Field(default=0, ge=0)


def _parse_label(token: str, line_number: int) -> int:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"label {token!r} is not numeric", line_number)
    if not value.is_integer():
        raise ParseError(f"label {token!r} is not an integer", line_number)
    return int(value)


def _parse_features(tokens: Iterable[str], line_number: int) -> dict[int, float]:
    features: dict[int, float] = {}
    last = 0
    for token in tokens:
        idx_text, sep, val_text = token.partition(":")
        if not sep:
            raise ParseError(f"token {token!r} is not of the form index:value", line_number)
        try:
            idx = int(idx_text)
            val = float(val_text)
        except ValueError:
            raise ParseError(f"token {token!r} is not numeric", line_number)
        if idx < 1:
            raise ParseError(f"feature index {idx} is below 1", line_number)
        if idx <= last:
            raise ParseError(
                f"feature index {idx} does not increase (previous {last})", line_number
            )
        if not math.isfinite(val):
            raise ParseError(f"feature value {val_text!r} is not finite", line_number)
        features[idx] = val
        last = idx
    return features


def parse_libsvm(text: bytes | str, name: str = "") -> Dataset:
    """
    Parse LIBSVM text: one ``<label> <idx>:<val> ...`` sample per nonempty line,
    ``#`` lines are comments. Labels are normalized to {-1, +1}.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            line_number = text.count(b"\n", 0, e.start) + 1
            raise ParseError(f"invalid UTF-8 byte 0x{text[e.start]:02x}", line_number)

    raw: list[tuple[int, dict[int, float]]] = []
    schemes = list(LABEL_SCHEMES)
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        label_token, *feature_tokens = stripped.split()
        label = _parse_label(label_token, line_number)
        schemes = [s for s in schemes if label in s]
        if not schemes:
            raise ParseError(
                f"label {label} is not compatible with the labels seen so far", line_number
            )
        raw.append((label, _parse_features(feature_tokens, line_number)))

    if not raw:
        raise DatasetError(f"dataset {name or '<text>'} contains no samples")

    mapping = schemes[0]
    samples = tuple(Sample(label=mapping[label], features=feats) for label, feats in raw)
    num_features = max((max(f, default=0) for _, f in raw), default=0)
    return Dataset(samples=samples, num_features=num_features, name=name)


def serialize_libsvm(ds: Dataset) -> str:
    lines = []
    for sample in ds.samples:
        tokens = ["+1" if sample.label > 0 else "-1"]
        tokens += [f"{idx}:{val!r}" for idx, val in sorted(sample.features.items())]
        lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"


def load_dataset(path: Path | str, num_features: int | None = None) -> Dataset:
    path = Path(path)
    try:
        content = path.read_bytes()
    except OSError as e:
        raise DatasetError(f"cannot read dataset {path}: {e}")
    ds = parse_libsvm(content, name=path.stem)
    if num_features is not None:
        ds = ds.with_num_features(num_features)
    logger.info(f"Loaded {ds.name}: K={len(ds)}, N={ds.num_features}")
    return ds


def check_label_balance(ds: Dataset) -> None:
    labels = {s.label for s in ds.samples}
    if labels != {-1, 1}:
        logger.warning(f"Dataset {ds.name or '<unnamed>'} only has labels {sorted(labels)}")


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then cut at floor(train_fraction * K)."""
    if len(ds) == 0:
        raise DatasetError("cannot split an empty dataset")
    cut = math.floor(spec.train_fraction * len(ds) + 1e-9)
    if cut == 0:
        raise DatasetError(
            f"train_fraction={spec.train_fraction} leaves the training set empty (K={len(ds)})"
        )
    order = np.random.default_rng(spec.seed).permutation(len(ds))
    shuffled = [ds.samples[i] for i in order]
    train = Dataset(tuple(shuffled[:cut]), ds.num_features, f"{ds.name}-train")
    test = Dataset(tuple(shuffled[cut:]), ds.num_features, f"{ds.name}-test")
    check_label_balance(train)
    return train, test


def feature_matrix(ds: Dataset, num_features: int | None = None) -> NDArray[np.float64]:
    n = ds.num_features if num_features is None else num_features
    x = np.zeros((len(ds), n))
    for k, sample in enumerate(ds.samples):
        for idx, val in sample.features.items():
            if idx > n:
                raise DimensionMismatchError(
                    f"sample {k} has feature {idx} beyond N={n}"
                )
            x[k, idx - 1] = val
    return x


def build_design_matrix(ds: Dataset) -> DesignMatrix:
    if len(ds) == 0:
        raise DatasetError("cannot build a design matrix from an empty dataset")
    x = feature_matrix(ds)
    y = ds.labels
    matrix = y[:, None] * np.hstack([x, np.ones((len(ds), 1))])
    return DesignMatrix(matrix=matrix)
