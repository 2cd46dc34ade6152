from .losses import softmax_ce
from .models import DenseHead, ModelAssembly, Variant
from .optim import OptimizerState, adam_step
from .pca import PCABasis, pca_fit, pca_project
from .train import (
    MetricRow,
    TrainConfig,
    TrainResult,
    evaluate,
    finetune_stage2,
    fit,
    pretrain_stage1,
    train_e2e,
    train_pca_vqc,
)

__all__ = [
    "softmax_ce",
    "DenseHead",
    "ModelAssembly",
    "Variant",
    "OptimizerState",
    "adam_step",
    "PCABasis",
    "pca_fit",
    "pca_project",
    "MetricRow",
    "TrainConfig",
    "TrainResult",
    "evaluate",
    "finetune_stage2",
    "fit",
    "pretrain_stage1",
    "train_e2e",
    "train_pca_vqc",
]
