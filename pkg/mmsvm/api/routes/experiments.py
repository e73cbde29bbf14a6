from fastapi import APIRouter

from mmsvm import experiments
from mmsvm.metrics import MetricReport, ReferenceMinimum
from mmsvm.models import EvaluateRequest, ExperimentConfig, RunRecord

router = APIRouter(prefix="/experiments", tags=["experiments"])


@router.post("/train", response_model=RunRecord)
def train(config: ExperimentConfig) -> RunRecord:
    """
    Train one model; outputs are written under ``config.out`` as with the CLI.
    """
    return experiments.train(config=config)


@router.post("/refmin", response_model=ReferenceMinimum)
def refmin(config: ExperimentConfig) -> ReferenceMinimum:
    return experiments.refmin(config=config)


@router.post("/evaluate", response_model=MetricReport)
def evaluate(request: EvaluateRequest) -> MetricReport:
    return experiments.evaluate(
        model_path=request.model_path,
        data_path=request.data_path,
        sparsity_tau=request.sparsity_tau,
    )
