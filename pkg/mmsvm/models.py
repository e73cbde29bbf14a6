from pathlib import Path
from typing import Literal

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from typing_extensions import Self

from mmsvm.core.config import settings
from mmsvm.dataio import SplitSpec
from mmsvm.metrics import REFMIN_MAX_ITER, MetricReport, ReferenceMinimum
from mmsvm.objective import Regularizer, RegularizerKind
from mmsvm.solvers import Method, SolverConfig, TrainTrace, coerce_method

# ℓ2-only runs use η = 1e-4 with λ = δ = 0 unless eta is given
QUADRATIC_DEFAULT_ETA = 1e-4


class ExperimentConfig(BaseModel):
    """
    One fully resolved experiment. Field names double as config-file keys,
    except ``lam`` (``lambda``) and ``train_fraction`` (``split``).
    """

    data: Path
    test_data: Path | None = None
    train_fraction: float = Field(default=0.8, gt=0.0, le=1.0)
    seed: int = Field(default=0, ge=0)
    method: Method = Method.HYBRID_MMI
    reg: RegularizerKind = RegularizerKind.HYPERBOLIC
    lam: float = Field(default=1e-4, ge=0.0)
    delta: float = Field(default=1e-4, ge=0.0)
    eta: float = Field(default=0.0, ge=0.0)
    alpha: float | None = Field(default=None, gt=0.0)
    # unset: FG takes 1.9/μ unless alpha is given
    fg_alpha_auto: bool | None = None
    epochs: int = Field(default=100, ge=0)
    iota: int = Field(default=10, ge=0)
    warmup_method: Method = Method.ADAM
    batch: int = Field(default=1, ge=1)
    eps_curv: float = Field(default_factory=lambda: settings.EPSILON_CURV, gt=0.0)
    sparsity_tau: float = Field(default_factory=lambda: settings.SPARSITY_TAU, ge=0.0)
    refmin: Path | None = None
    compute_refmin: bool = False
    refmin_max_iter: int = Field(default=REFMIN_MAX_ITER, ge=1)
    out: Path = Field(default_factory=lambda: settings.OUTPUT_DIR)

    @field_validator("method", "warmup_method", mode="before")
    @classmethod
    def _method_alias(cls, value: object) -> object:
        return coerce_method(value)

    @model_validator(mode="after")
    def _quadratic_protocol(self) -> Self:
        if self.reg != RegularizerKind.QUADRATIC:
            return self
        for name in ("lam", "delta"):
            if name in self.model_fields_set and getattr(self, name) != 0.0:
                raise ValueError(f"quadratic regularizer does not take {name}")
        self.lam = 0.0
        self.delta = 0.0
        if "eta" not in self.model_fields_set:
            self.eta = QUADRATIC_DEFAULT_ETA
        return self

    @model_validator(mode="after")
    def _solver_consistency(self) -> Self:
        try:
            self.regularizer()
            self.solver_config()
        except ValidationError as e:
            raise ValueError(str(e))
        if self.refmin is not None and self.compute_refmin:
            raise ValueError("refmin and compute_refmin are mutually exclusive")
        return self

    def regularizer(self) -> Regularizer:
        return Regularizer(kind=self.reg, lam=self.lam, delta=self.delta, eta=self.eta)

    def solver_config(self, **overrides: object) -> SolverConfig:
        fields: dict[str, object] = {
            "method": self.method,
            "alpha": self.alpha,
            "max_epochs": self.epochs,
            "warmup_iota": self.iota,
            "warmup_method": self.warmup_method,
            "batch_size": self.batch,
            "seed": self.seed,
            "epsilon_curv": self.eps_curv,
            "fg_alpha_auto": self.fg_alpha_auto,
        }
        fields.update(overrides)
        return SolverConfig.model_validate(fields)

    def split_spec(self) -> SplitSpec:
        return SplitSpec(train_fraction=self.train_fraction, seed=self.seed)


class RunRecord(BaseModel):
    config: ExperimentConfig
    report: MetricReport
    trace: TrainTrace
    reference: ReferenceMinimum | None = None
    train_seconds: float
    total_seconds: float


class EvaluateRequest(BaseModel):
    model_path: Path
    data_path: Path
    sparsity_tau: float = Field(default_factory=lambda: settings.SPARSITY_TAU, ge=0.0)


class BenchmarkCell(BaseModel):
    method: Method
    reg: RegularizerKind
    status: Literal["ok", "failed"]
    record: RunRecord | None = None
    error: str | None = None


class SweepRow(BaseModel):
    lam: float
    delta: float
    report: MetricReport


class WarmupResult(BaseModel):
    method: Method
    alpha: float
    gap: float
    trace: TrainTrace
