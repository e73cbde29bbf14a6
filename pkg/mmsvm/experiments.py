"""
Experiment orchestration shared by the CLI and the HTTP surface.

Every entry point loads and validates all of its inputs before it creates
the output directory, so a failed run leaves no partial outputs behind.
"""

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError

from mmsvm import utils
from mmsvm.core.config import settings
from mmsvm.core.errors import ConfigError, DatasetError, DimensionMismatchError, MMSVMError
from mmsvm.dataio import (
    Dataset,
    build_design_matrix,
    check_label_balance,
    load_dataset,
    serialize_libsvm,
    split,
)
from mmsvm.majorants import CurvatureFactorization, factorize
from mmsvm.metrics import (
    MetricReport,
    ReferenceMinimum,
    compute_reference_minimum,
    confusion,
    optimality_gap,
    report,
)
from mmsvm.models import (
    BenchmarkCell,
    ExperimentConfig,
    RunRecord,
    SweepRow,
    WarmupResult,
)
from mmsvm.objective import ObjectiveContext, RegularizerKind
from mmsvm.solvers import STOCHASTIC, Method, run

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# the method list compared in the benchmark tables
BENCHMARK_METHODS = (
    Method.FG,
    Method.MMI,
    Method.HYBRID_MMI,
    Method.MM,
    Method.HYBRID_MM,
    Method.SUB,
    Method.HYBRID_SUB,
)
BENCHMARK_REGULARIZERS = (
    RegularizerKind.HYPERBOLIC,
    RegularizerKind.WELSH,
    RegularizerKind.QUADRATIC,
)
SWEEP_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


@dataclass(frozen=True)
class Split:
    train: Dataset
    test: Dataset


def load_split(config: ExperimentConfig) -> Split:
    ds = load_dataset(config.data)
    if config.test_data is not None:
        test = load_dataset(config.test_data)
        n = max(ds.num_features, test.num_features)
        train, test = ds.with_num_features(n), test.with_num_features(n)
        check_label_balance(train)
    else:
        train, test = split(ds, config.split_spec())
    if len(test) == 0:
        raise DatasetError(
            f"train_fraction={config.train_fraction} leaves no test samples; pass a test dataset"
        )
    return Split(train=train, test=test)


def make_context(config: ExperimentConfig, data: Split) -> ObjectiveContext:
    return ObjectiveContext(build_design_matrix(data.train), config.regularizer())


def resolve_reference(
    config: ExperimentConfig, ctx: ObjectiveContext
) -> ReferenceMinimum | None:
    if config.refmin is not None:
        return utils.read_refmin(config.refmin)
    if config.compute_refmin:
        return compute_reference_minimum(ctx, config.eps_curv, max_iter=config.refmin_max_iter)
    return None


def evaluate_theta(theta: NDArray[np.float64], test: Dataset, sparsity_tau: float) -> MetricReport:
    n = theta.shape[0] - 1
    if test.num_features > n:
        raise DimensionMismatchError(
            f"model has N={n} features but {test.name or 'dataset'} has {test.num_features}"
        )
    counts = confusion(theta, test.with_num_features(n))
    return report(counts, len(test), theta[:-1], sparsity_tau)


def fit(
    *,
    config: ExperimentConfig,
    data: Split,
    ctx: ObjectiveContext,
    fact: CurvatureFactorization | None = None,
    reference: ReferenceMinimum | None = None,
) -> tuple[RunRecord, NDArray[np.float64]]:
    start = time.perf_counter()
    theta, trace = run(ctx, config.solver_config(), np.zeros(ctx.dim), fact)
    train_seconds = time.perf_counter() - start
    record = RunRecord(
        config=config,
        report=evaluate_theta(theta, data.test, config.sparsity_tau),
        trace=trace,
        reference=reference,
        train_seconds=train_seconds,
        total_seconds=time.perf_counter() - start,
    )
    return record, theta


def train(*, config: ExperimentConfig, write: bool = True) -> RunRecord:
    start = time.perf_counter()
    data = load_split(config)
    ctx = make_context(config, data)
    reference = resolve_reference(config, ctx)
    record, theta = fit(config=config, data=data, ctx=ctx, reference=reference)
    record.total_seconds = time.perf_counter() - start

    if write:
        out = config.out
        out.mkdir(parents=True, exist_ok=True)
        gap = optimality_gap(record.trace, reference) if reference is not None else None
        utils.write_trace_csv(out / "trace.csv", record.trace, gap)
        utils.write_model(out / "model.txt", theta, ctx.reg)
        utils.write_report_csv(out / "report.csv", record.report)
        utils.write_json(out / "run.json", record)
        if config.test_data is None:
            (out / "test.libsvm").write_text(serialize_libsvm(data.test))
    return record


def evaluate(
    *,
    model_path: Path,
    data_path: Path,
    sparsity_tau: float | None = None,
    out: Path | None = None,
) -> MetricReport:
    theta = utils.read_model(model_path)
    ds = load_dataset(data_path)
    tau = settings.SPARSITY_TAU if sparsity_tau is None else sparsity_tau
    result = evaluate_theta(theta, ds, tau)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        utils.write_report_csv(out / "report.csv", result)
    return result


def refmin(*, config: ExperimentConfig, write: bool = True) -> ReferenceMinimum:
    data = load_split(config)
    ctx = make_context(config, data)
    ref = compute_reference_minimum(ctx, config.eps_curv, max_iter=config.refmin_max_iter)
    if write:
        config.out.mkdir(parents=True, exist_ok=True)
        utils.write_json(config.out / "refmin.json", ref)
    return ref


def _parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    workers = max(1, min(settings.THREADS, len(items)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def derive_config(config: ExperimentConfig, **update: Any) -> ExperimentConfig:
    """Re-validated copy of ``config``; regularizer keys not in ``update`` are reset."""
    fields = config.model_dump(exclude={"lam", "delta", "eta"})
    fields.update(update)
    try:
        return ExperimentConfig.model_validate(fields)
    except ValidationError as e:
        raise ConfigError(str(e))


def _regularizer_update(config: ExperimentConfig, reg: RegularizerKind) -> dict[str, Any]:
    # a smooth-potential base config lends its λ, δ, η to the other smooth potentials
    if reg == RegularizerKind.QUADRATIC or config.reg == RegularizerKind.QUADRATIC:
        return {"reg": reg}
    return {"reg": reg, "lam": config.lam, "delta": config.delta, "eta": config.eta}


def _reference_or_none(config: ExperimentConfig, ctx: ObjectiveContext) -> ReferenceMinimum | None:
    try:
        return compute_reference_minimum(ctx, config.eps_curv, max_iter=config.refmin_max_iter)
    except MMSVMError as e:
        logger.warning(f"Reference minimum for {config.reg.value} failed: {e}")
        return None


def benchmark(
    *,
    config: ExperimentConfig,
    methods: Sequence[Method] = BENCHMARK_METHODS,
    regs: Sequence[RegularizerKind] = BENCHMARK_REGULARIZERS,
    write: bool = True,
) -> list[BenchmarkCell]:
    """
    Runs methods × regularizers on one shared split. A failing cell is
    recorded as failed and the others continue.
    """
    if not methods or not regs:
        raise ConfigError("benchmark needs at least one method and one regularizer")
    cell_configs = {
        (method, reg): derive_config(config, method=method, **_regularizer_update(config, reg))
        for reg in regs
        for method in methods
    }
    data = load_split(config)
    design = build_design_matrix(data.train)
    fact = factorize(design, config.eps_curv)
    contexts = {
        reg: ObjectiveContext(design, cell_configs[(methods[0], reg)].regularizer())
        for reg in regs
    }
    references = dict(
        zip(
            regs,
            _parallel_map(
                lambda reg: _reference_or_none(cell_configs[(methods[0], reg)], contexts[reg]),
                list(regs),
            ),
        )
    )

    def run_cell(key: tuple[Method, RegularizerKind]) -> BenchmarkCell:
        method, reg = key
        try:
            record, _ = fit(
                config=cell_configs[key],
                data=data,
                ctx=contexts[reg],
                fact=fact,
                reference=references[reg],
            )
        except MMSVMError as e:
            logger.warning(f"Benchmark cell {method.value}/{reg.value} failed: {e}")
            return BenchmarkCell(method=method, reg=reg, status="failed", error=str(e))
        return BenchmarkCell(method=method, reg=reg, status="ok", record=record)

    cells = _parallel_map(run_cell, list(cell_configs))

    if write:
        out = config.out
        out.mkdir(parents=True, exist_ok=True)
        utils.write_summary_csv(out / "summary.csv", cells, methods, regs)
        utils.write_timing_csv(out / "timing.csv", cells, methods, regs)
        for cell in cells:
            if cell.record is None:
                continue
            stem = f"{cell.method.value}-{cell.reg.value}"
            utils.write_json(out / f"run-{stem}.json", cell.record)
            ref = references[cell.reg]
            if ref is not None:
                utils.write_gap_csv(
                    out / f"gap-{stem}.csv", cell.record.trace, optimality_gap(cell.record.trace, ref)
                )
    return cells


def lambda_sweep(
    *,
    config: ExperimentConfig,
    lambdas: Sequence[float] = SWEEP_LAMBDAS,
    delta: float | None = None,
    write: bool = True,
) -> list[SweepRow]:
    """Hyperbolic potential with δ = λ unless ``delta`` is given."""
    eta = 0.0 if config.reg == RegularizerKind.QUADRATIC else config.eta
    sweep_configs = [
        derive_config(
            config,
            reg=RegularizerKind.HYPERBOLIC,
            lam=lam,
            delta=lam if delta is None else delta,
            eta=eta,
        )
        for lam in lambdas
    ]
    data = load_split(config)
    design = build_design_matrix(data.train)

    def run_one(cfg: ExperimentConfig) -> SweepRow:
        record, _ = fit(config=cfg, data=data, ctx=ObjectiveContext(design, cfg.regularizer()))
        return SweepRow(lam=cfg.lam, delta=cfg.delta, report=record.report)

    rows = _parallel_map(run_one, sweep_configs)
    if write:
        config.out.mkdir(parents=True, exist_ok=True)
        utils.write_sweep_csv(config.out / "sweep.csv", rows)
    return rows


def warmup(
    *,
    config: ExperimentConfig,
    alphas: dict[Method, float | None] | None = None,
    write: bool = True,
) -> list[WarmupResult]:
    """
    Runs each stochastic method for ``config.iota`` epochs and compares the
    optimality gaps; the smallest gap picks the warm-up optimizer.
    """
    alphas = alphas or {}
    unknown = set(alphas) - STOCHASTIC
    if unknown:
        raise ConfigError(f"warm-up comparison only takes stochastic methods, got {unknown}")
    if config.iota == 0:
        raise ConfigError("warm-up comparison needs iota >= 1")
    data = load_split(config)
    ctx = make_context(config, data)
    reference = resolve_reference(config, ctx) or compute_reference_minimum(
        ctx, config.eps_curv, max_iter=config.refmin_max_iter
    )

    results = []
    for method in (Method.SG, Method.MOMENTUM, Method.ADAM):
        alpha = alphas.get(method) or config.alpha
        cfg = config.solver_config(method=method, max_epochs=config.iota, alpha=alpha)
        _, trace = run(ctx, cfg, np.zeros(ctx.dim))
        gap = optimality_gap(trace, reference)
        results.append(
            WarmupResult(
                method=method,
                alpha=cfg.stochastic_alpha(method),
                gap=float(gap.raw[-1]),
                trace=trace,
            )
        )
    best = min(results, key=lambda r: r.gap)
    logger.info(f"Best warm-up method after {config.iota} epochs: {best.method.value}")

    if write:
        out = config.out
        out.mkdir(parents=True, exist_ok=True)
        for r in results:
            utils.write_gap_csv(out / f"gap-{r.method.value}.csv", r.trace, optimality_gap(r.trace, reference))
        utils.write_warmup_csv(out / "warmup.csv", results)
    return results
