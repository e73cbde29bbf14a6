"""
Command-line front end.

Exit codes: 0 success, 2 usage/config, 3 I/O or parse, 4 solver divergence,
5 internal invariant violation.
"""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import typer
from pydantic import ValidationError

from mmsvm import experiments, utils
from mmsvm.core.config import settings
from mmsvm.core.errors import ConfigError, MMSVMError
from mmsvm.models import ExperimentConfig
from mmsvm.solvers import Method

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="mmsvm",
    help="Majorization-minimization solvers for sparse linear SVMs.",
    no_args_is_help=True,
    add_completion=False,
)

ConfigOpt = Annotated[
    Path | None, typer.Option("--config", help="Flat 'key = value' experiment file.")
]
DataOpt = Annotated[Path | None, typer.Option("--data", help="LIBSVM training data.")]
TestDataOpt = Annotated[
    Path | None, typer.Option("--test-data", help="Held-out LIBSVM data; disables --split.")
]
SplitOpt = Annotated[float | None, typer.Option("--split", help="Train fraction.")]
SeedOpt = Annotated[int | None, typer.Option("--seed")]
MethodOpt = Annotated[
    str | None,
    typer.Option(
        "--method",
        help="fg, mm, mmi, sub, gradmm, sg, momentum, adam, h-mm, h-mmi or h-sub "
        "(hybrid_mm style spellings also accepted).",
    ),
]
RegOpt = Annotated[str | None, typer.Option("--reg", help="hyperbolic, welsh or quadratic.")]
LambdaOpt = Annotated[float | None, typer.Option("--lambda")]
DeltaOpt = Annotated[float | None, typer.Option("--delta")]
EtaOpt = Annotated[float | None, typer.Option("--eta")]
AlphaOpt = Annotated[float | None, typer.Option("--alpha")]
FgAlphaAutoOpt = Annotated[
    bool | None,
    typer.Option(
        "--fg-alpha-auto/--no-fg-alpha-auto", help="FG stepsize 1.9/μ; default unless --alpha."
    ),
]
EpochsOpt = Annotated[int | None, typer.Option("--epochs")]
IotaOpt = Annotated[int | None, typer.Option("--iota", help="Warm-up epochs.")]
WarmupMethodOpt = Annotated[str | None, typer.Option("--warmup-method")]
BatchOpt = Annotated[int | None, typer.Option("--batch")]
EpsCurvOpt = Annotated[float | None, typer.Option("--eps-curv")]
SparsityTauOpt = Annotated[float | None, typer.Option("--sparsity-tau")]
RefminOpt = Annotated[
    Path | None, typer.Option("--refmin", help="Reference minimum file for gap columns.")
]
ComputeRefminOpt = Annotated[
    bool | None,
    typer.Option("--compute-refmin/--no-compute-refmin", help="Compute the reference minimum."),
]
OutOpt = Annotated[Path | None, typer.Option("--out", help="Output directory.")]


@contextmanager
def exit_codes() -> Iterator[None]:
    try:
        yield
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        raise typer.Exit(code=ConfigError.exit_code)
    except MMSVMError as e:
        logger.error(str(e))
        raise typer.Exit(code=e.exit_code)
    except typer.Exit:
        raise
    except Exception as e:
        logger.exception(f"Internal error: {e}")
        raise typer.Exit(code=MMSVMError.exit_code)


def resolve_config(config_file: Path | None, **flags: Any) -> ExperimentConfig:
    """File keys first, then every flag that was actually given."""
    fields: dict[str, Any] = utils.read_config_file(config_file) if config_file else {}
    fields.update({key: value for key, value in flags.items() if value is not None})
    if "data" not in fields:
        raise ConfigError("no dataset given (--data or 'data' in the config file)")
    return ExperimentConfig.model_validate(fields)


@app.command()
def train(
    config: ConfigOpt = None,
    data: DataOpt = None,
    test_data: TestDataOpt = None,
    split: SplitOpt = None,
    seed: SeedOpt = None,
    method: MethodOpt = None,
    reg: RegOpt = None,
    lam: LambdaOpt = None,
    delta: DeltaOpt = None,
    eta: EtaOpt = None,
    alpha: AlphaOpt = None,
    fg_alpha_auto: FgAlphaAutoOpt = None,
    epochs: EpochsOpt = None,
    iota: IotaOpt = None,
    warmup_method: WarmupMethodOpt = None,
    batch: BatchOpt = None,
    eps_curv: EpsCurvOpt = None,
    sparsity_tau: SparsityTauOpt = None,
    refmin: RefminOpt = None,
    compute_refmin: ComputeRefminOpt = None,
    out: OutOpt = None,
) -> None:
    """Train one model and write run.json, trace.csv, model.txt and report.csv."""
    with exit_codes():
        cfg = resolve_config(
            config,
            data=data,
            test_data=test_data,
            train_fraction=split,
            seed=seed,
            method=method.lower() if method else None,
            reg=reg.lower() if reg else None,
            lam=lam,
            delta=delta,
            eta=eta,
            alpha=alpha,
            fg_alpha_auto=fg_alpha_auto,
            epochs=epochs,
            iota=iota,
            warmup_method=warmup_method.lower() if warmup_method else None,
            batch=batch,
            eps_curv=eps_curv,
            sparsity_tau=sparsity_tau,
            refmin=refmin,
            compute_refmin=compute_refmin,
            out=out,
        )
        record = experiments.train(config=cfg)
        _echo_report(record.report.formatted())


@app.command()
def evaluate(
    model: Annotated[Path, typer.Option("--model", help="model.txt written by train.")],
    data: Annotated[Path, typer.Option("--data")],
    sparsity_tau: SparsityTauOpt = None,
    out: OutOpt = None,
) -> None:
    """Evaluate a saved model on a LIBSVM dataset."""
    with exit_codes():
        result = experiments.evaluate(
            model_path=model,
            data_path=data,
            sparsity_tau=sparsity_tau,
            out=out,
        )
        _echo_report(result.formatted())


@app.command()
def refmin(
    config: ConfigOpt = None,
    data: DataOpt = None,
    test_data: TestDataOpt = None,
    split: SplitOpt = None,
    seed: SeedOpt = None,
    reg: RegOpt = None,
    lam: LambdaOpt = None,
    delta: DeltaOpt = None,
    eta: EtaOpt = None,
    eps_curv: EpsCurvOpt = None,
    max_iter: Annotated[int | None, typer.Option("--max-iter")] = None,
    out: OutOpt = None,
) -> None:
    """Estimate min Φ with a long exact-MM run and write refmin.json."""
    with exit_codes():
        cfg = resolve_config(
            config,
            data=data,
            test_data=test_data,
            train_fraction=split,
            seed=seed,
            reg=reg.lower() if reg else None,
            lam=lam,
            delta=delta,
            eta=eta,
            eps_curv=eps_curv,
            refmin_max_iter=max_iter,
            out=out,
        )
        ref = experiments.refmin(config=cfg)
        typer.echo(
            f"phi_star = {ref.phi_star!r} ({ref.produced_by}, {ref.iterations} iterations, "
            f"|grad| = {ref.gradient_norm_at_star:.3e})"
        )


@app.command()
def benchmark(
    config: ConfigOpt = None,
    data: DataOpt = None,
    test_data: TestDataOpt = None,
    split: SplitOpt = None,
    seed: SeedOpt = None,
    lam: LambdaOpt = None,
    delta: DeltaOpt = None,
    eta: EtaOpt = None,
    alpha: AlphaOpt = None,
    fg_alpha_auto: FgAlphaAutoOpt = None,
    epochs: EpochsOpt = None,
    iota: IotaOpt = None,
    warmup_method: WarmupMethodOpt = None,
    batch: BatchOpt = None,
    eps_curv: EpsCurvOpt = None,
    sparsity_tau: SparsityTauOpt = None,
    out: OutOpt = None,
    methods: Annotated[
        str | None, typer.Option("--methods", help="Comma-separated method list.")
    ] = None,
    regs: Annotated[
        str | None, typer.Option("--regs", help="Comma-separated regularizer list.")
    ] = None,
    lambda_sweep: Annotated[
        str | None,
        typer.Option("--lambda-sweep", help="Comma-separated λ values (Hyperbolic sweep)."),
    ] = None,
    method: MethodOpt = None,
) -> None:
    """Run the method × regularizer matrix, or a λ sweep with --lambda-sweep."""
    with exit_codes():
        cfg = resolve_config(
            config,
            data=data,
            test_data=test_data,
            train_fraction=split,
            seed=seed,
            method=method.lower() if method else None,
            lam=lam,
            delta=delta if lambda_sweep is None else None,
            eta=eta,
            alpha=alpha,
            fg_alpha_auto=fg_alpha_auto,
            epochs=epochs,
            iota=iota,
            warmup_method=warmup_method.lower() if warmup_method else None,
            batch=batch,
            eps_curv=eps_curv,
            sparsity_tau=sparsity_tau,
            out=out,
        )
        if lambda_sweep is not None:
            rows = experiments.lambda_sweep(
                config=cfg, lambdas=utils.parse_float_list(lambda_sweep), delta=delta
            )
            for row in rows:
                typer.echo(
                    f"lambda={row.lam!r}: sparsity "
                    f"{row.report.sparsity_count}/{row.report.sparsity_total}"
                )
            return
        cells = experiments.benchmark(
            config=cfg,
            methods=utils.parse_methods(methods) if methods else experiments.BENCHMARK_METHODS,
            regs=utils.parse_regularizers(regs) if regs else experiments.BENCHMARK_REGULARIZERS,
        )
        failed = [c for c in cells if c.status == "failed"]
        typer.echo(f"{len(cells) - len(failed)}/{len(cells)} cells completed")


@app.command()
def warmup(
    config: ConfigOpt = None,
    data: DataOpt = None,
    test_data: TestDataOpt = None,
    split: SplitOpt = None,
    seed: SeedOpt = None,
    reg: RegOpt = None,
    lam: LambdaOpt = None,
    delta: DeltaOpt = None,
    eta: EtaOpt = None,
    iota: IotaOpt = None,
    batch: BatchOpt = None,
    eps_curv: EpsCurvOpt = None,
    refmin: RefminOpt = None,
    out: OutOpt = None,
    alpha_sg: Annotated[float | None, typer.Option("--alpha-sg")] = None,
    alpha_momentum: Annotated[float | None, typer.Option("--alpha-momentum")] = None,
    alpha_adam: Annotated[float | None, typer.Option("--alpha-adam")] = None,
) -> None:
    """Compare SG, Momentum and Adam over the warm-up epochs."""
    with exit_codes():
        cfg = resolve_config(
            config,
            data=data,
            test_data=test_data,
            train_fraction=split,
            seed=seed,
            reg=reg.lower() if reg else None,
            lam=lam,
            delta=delta,
            eta=eta,
            iota=iota,
            batch=batch,
            eps_curv=eps_curv,
            refmin=refmin,
            out=out,
        )
        results = experiments.warmup(
            config=cfg,
            alphas={
                Method.SG: alpha_sg,
                Method.MOMENTUM: alpha_momentum,
                Method.ADAM: alpha_adam,
            },
        )
        for r in results:
            typer.echo(f"{r.method.value}: alpha={r.alpha!r} gap={r.gap!r}")


def _echo_report(formatted: dict[str, str]) -> None:
    for name, value in formatted.items():
        typer.echo(f"{name}: {value}")


@app.callback()
def _configure_logging() -> None:
    logging.basicConfig(level=settings.LOG_LEVEL)


def main() -> None:
    app()
