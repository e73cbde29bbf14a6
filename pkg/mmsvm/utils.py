import csv
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ValidationError

from mmsvm.core.errors import ConfigError, DatasetError, ParseError
from mmsvm.metrics import UNDEFINED, MetricReport, OptimalityGap, ReferenceMinimum
from mmsvm.models import BenchmarkCell, SweepRow, WarmupResult
from mmsvm.objective import Regularizer, RegularizerKind
from mmsvm.solvers import Method, TrainTrace

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

MODEL_MAGIC = "# mmsvm model"
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")
FAILED = "failed"

# config-file key -> ExperimentConfig field
CONFIG_KEYS = {
    "data": "data",
    "test_data": "test_data",
    "split": "train_fraction",
    "seed": "seed",
    "method": "method",
    "reg": "reg",
    "lambda": "lam",
    "delta": "delta",
    "eta": "eta",
    "alpha": "alpha",
    "fg_alpha_auto": "fg_alpha_auto",
    "epochs": "epochs",
    "iota": "iota",
    "warmup_method": "warmup_method",
    "batch": "batch",
    "eps_curv": "eps_curv",
    "sparsity_tau": "sparsity_tau",
    "refmin": "refmin",
    "compute_refmin": "compute_refmin",
    "refmin_max_iter": "refmin_max_iter",
    "out": "out",
}


def read_config_file(path: Path) -> dict[str, str]:
    """
    Flat ``key = value`` file; blank lines and ``#`` comments are skipped.
    Keys may use dashes or underscores.
    """
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    values: dict[str, str] = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{line_number}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{line_number}: unknown key {key!r}")
        values[CONFIG_KEYS[key]] = value.strip()
    return values


def parse_float_list(text: str) -> list[float]:
    try:
        values = [float(token) for token in text.split(",") if token.strip()]
    except ValueError:
        raise ConfigError(f"{text!r} is not a comma-separated list of numbers")
    if not values:
        raise ConfigError("empty list of numbers")
    return values


def parse_methods(text: str) -> list[Method]:
    try:
        return [Method(token.strip().lower()) for token in text.split(",") if token.strip()]
    except ValueError as e:
        raise ConfigError(str(e))


def parse_regularizers(text: str) -> list[RegularizerKind]:
    try:
        return [
            RegularizerKind(token.strip().lower()) for token in text.split(",") if token.strip()
        ]
    except ValueError as e:
        raise ConfigError(str(e))


def write_model(path: Path, theta: NDArray[np.float64], reg: Regularizer) -> None:
    lines = [
        MODEL_MAGIC,
        f"# num_features = {theta.shape[0] - 1}",
        f"# regularizer = {reg.describe()}",
    ]
    lines += [repr(float(value)) for value in theta]
    path.write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote model to {path}")


def read_model(path: Path) -> NDArray[np.float64]:
    """Returns θ = [w, β]; the header's N must match the number of values."""
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read model {path}: {e}")
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise ParseError(f"{path} is not an mmsvm model file", 1)

    num_features: int | None = None
    values: list[float] = []
    for line_number, line in enumerate(lines[1:], start=2):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            key, _, value = stripped.lstrip("# ").partition("=")
            if key.strip() == "num_features":
                try:
                    num_features = int(value)
                except ValueError:
                    raise ParseError(f"bad num_features {value.strip()!r}", line_number)
            continue
        try:
            values.append(float(stripped))
        except ValueError:
            raise ParseError(f"value {stripped!r} is not numeric", line_number)

    if num_features is None:
        raise ParseError(f"{path} has no num_features header", 1)
    if len(values) != num_features + 1:
        raise ParseError(
            f"expected {num_features + 1} values for N={num_features}, found {len(values)}",
            len(lines),
        )
    theta = np.array(values, dtype=np.float64)
    if not np.all(np.isfinite(theta)):
        raise ParseError(f"{path} contains non-finite values", len(lines))
    return theta


def write_json(path: Path, record: BaseModel) -> None:
    path.write_text(record.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {path}")


def read_json(path: Path, model: type[ModelT]) -> ModelT:
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}")
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        raise DatasetError(f"{path} is not a valid {model.__name__}: {e}")


def read_refmin(path: Path) -> ReferenceMinimum:
    return read_json(path, ReferenceMinimum)


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info(f"Wrote {path}")


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as f:
        return list(csv.DictReader(f))


def _metric(value: float | None) -> str:
    return UNDEFINED if value is None else repr(value)


def write_trace_csv(path: Path, trace: TrainTrace, gap: OptimalityGap | None = None) -> None:
    header = ["epoch", "phi", "grad_norm", "seconds", "sample_grads"]
    if gap is not None:
        header += ["gap", "gap_clamped"]
    rows = []
    for i, r in enumerate(trace.records):
        row: list[Any] = [r.epoch, repr(r.phi), repr(r.grad_norm), f"{r.seconds:.6f}", r.sample_grads]
        if gap is not None:
            row += [repr(float(gap.raw[i])), repr(float(gap.clamped[i]))]
        rows.append(row)
    _write_csv(path, header, rows)


def write_gap_csv(path: Path, trace: TrainTrace, gap: OptimalityGap) -> None:
    _write_csv(
        path,
        ["epoch", "gap", "gap_clamped", "seconds"],
        (
            [r.epoch, repr(float(raw)), repr(float(clamped)), f"{r.seconds:.6f}"]
            for r, raw, clamped in zip(trace.records, gap.raw, gap.clamped)
        ),
    )


def write_report_csv(path: Path, report: MetricReport) -> None:
    rows = [[name, _metric(getattr(report, name))] for name in METRIC_NAMES]
    rows.append(["sparsity", f"{report.sparsity_count}/{report.sparsity_total}"])
    _write_csv(path, ["metric", "value"], rows)


def _cell_index(cells: Iterable[BenchmarkCell]) -> dict[tuple[Method, RegularizerKind], BenchmarkCell]:
    return {(c.method, c.reg): c for c in cells}


def write_summary_csv(
    path: Path,
    cells: Sequence[BenchmarkCell],
    methods: Sequence[Method],
    regs: Sequence[RegularizerKind],
) -> None:
    """Metric rows grouped per regularizer, one column per method."""
    index = _cell_index(cells)
    rows = []
    for name in METRIC_NAMES:
        for reg in regs:
            row = [name, reg.value]
            for method in methods:
                cell = index[(method, reg)]
                if cell.status == "failed" or cell.record is None:
                    row.append(FAILED)
                else:
                    row.append(_metric(getattr(cell.record.report, name)))
            rows.append(row)
    _write_csv(path, ["metric", "regularizer", *(m.value for m in methods)], rows)


def write_timing_csv(
    path: Path,
    cells: Sequence[BenchmarkCell],
    methods: Sequence[Method],
    regs: Sequence[RegularizerKind],
) -> None:
    index = _cell_index(cells)
    rows = []
    for reg in regs:
        row = [reg.value]
        for method in methods:
            record = index[(method, reg)].record
            row.append(FAILED if record is None else f"{record.train_seconds:.6f}")
        rows.append(row)
    _write_csv(path, ["regularizer", *(m.value for m in methods)], rows)


def write_sweep_csv(path: Path, rows: Sequence[SweepRow]) -> None:
    _write_csv(
        path,
        ["lambda", "delta", "sparsity", *METRIC_NAMES],
        (
            [
                repr(row.lam),
                repr(row.delta),
                f"{row.report.sparsity_count}/{row.report.sparsity_total}",
                *(_metric(getattr(row.report, name)) for name in METRIC_NAMES),
            ]
            for row in rows
        ),
    )


def write_warmup_csv(path: Path, results: Sequence[WarmupResult]) -> None:
    _write_csv(
        path,
        ["method", "alpha", "gap"],
        ([r.method.value, repr(r.alpha), repr(r.gap)] for r in results),
    )
