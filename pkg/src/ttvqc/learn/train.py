"""Minibatch Adam training for the three pipelines."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..qsim import PQCParams
from ..tt import TTLayer
from .losses import batch_softmax_ce
from .models import DenseHead, ModelAssembly, Variant
from .optim import OptimizerState, adam_step
from .pca import PCABasis

log = logging.getLogger(__name__)

EVAL_CHUNK = 500


@dataclass
class TrainConfig:
    batch_size: int = 50
    learning_rate: float = 1e-3
    epochs: int = 10
    seed: int = 0
    loss: str = "cross_entropy"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        # zero is accepted so a run can be replayed without updates
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.loss != "cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")


@dataclass
class MetricRow:
    epoch: int
    split: str
    ce: float
    accuracy: float


@dataclass
class TrainResult:
    model: ModelAssembly
    trace: list[MetricRow] = field(default_factory=list)
    best_epoch: int | None = None


def evaluate(model: ModelAssembly, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean cross-entropy and accuracy; argmax ties go to the lower class index."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    total = 0.0
    correct = 0
    # fixed chunking keeps the summation order independent of the caller
    for start in range(0, y.shape[0], EVAL_CHUNK):
        logits = model.logits(x[start : start + EVAL_CHUNK])
        losses, _ = batch_softmax_ce(logits, y[start : start + EVAL_CHUNK])
        total += float(losses.sum())
        correct += int(np.sum(np.argmax(logits, axis=1) == y[start : start + EVAL_CHUNK]))
    return total / y.shape[0], correct / y.shape[0]


def _check_nonempty(x, y):
    if len(y) == 0:
        raise ValueError("training set is empty")
    if x.shape[0] != len(y):
        raise ValueError(f"{x.shape[0]} inputs but {len(y)} labels")


def fit(
    model: ModelAssembly,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    eval_sets: dict[str, tuple[np.ndarray, np.ndarray]] | None = None,
    keep_best: bool = False,
) -> TrainResult:
    """Optimize the model's trainable parameters in place.

    After every epoch the full training set (split ``train``) and each entry of
    ``eval_sets`` are evaluated. With ``keep_best`` the parameters from the
    epoch with the lowest training CE are restored at the end.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    _check_nonempty(x, y)
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    names = model.trainable_names()
    state = OptimizerState(learning_rate=cfg.learning_rate)
    result = TrainResult(model)
    best_ce = np.inf
    best_params = None
    n = y.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            _, grads = model.loss_and_grads(x[idx], y[idx])
            adam_step(params, {k: grads[k] for k in names}, state)
        ce, acc = evaluate(model, x, y)
        result.trace.append(MetricRow(epoch, "train", ce, acc))
        for split, (ex, ey) in (eval_sets or {}).items():
            tce, tacc = evaluate(model, ex, ey)
            result.trace.append(MetricRow(epoch, split, tce, tacc))
        log.info("epoch %d train ce %.5f acc %.4f", epoch, ce, acc)
        if keep_best and ce < best_ce:
            best_ce = ce
            result.best_epoch = epoch
            best_params = {k: params[k].copy() for k in names}
    if keep_best and best_params is not None:
        for k, v in best_params.items():
            params[k][...] = v
    return result


def pretrain_stage1(
    x: np.ndarray,
    y: np.ndarray,
    ttn: TTLayer,
    head: DenseHead,
    cfg: TrainConfig,
    eval_sets=None,
) -> TrainResult:
    """Fit TTN and dense head jointly on the source set; returns the best-CE epoch."""
    model = ModelAssembly(Variant.TTN_HEAD, head.weight.shape[0], ttn=ttn, head=head)
    return fit(model, x, y, cfg, eval_sets, keep_best=True)


def finetune_stage2(
    x: np.ndarray,
    y: np.ndarray,
    ttn_frozen: TTLayer,
    pqc: PQCParams,
    num_classes: int,
    cfg: TrainConfig,
    readout_gain: float = 5.0,
    readout: DenseHead | None = None,
    ring: bool = False,
    eval_sets=None,
) -> TrainResult:
    """Train circuit angles (and the optional affine readout) on frozen TTN features."""
    model = ModelAssembly(
        Variant.TTN_VQC,
        num_classes,
        ttn=ttn_frozen,
        pqc=pqc,
        freeze_ttn=True,
        readout_gain=readout_gain,
        readout=readout,
        ring=ring,
    )
    before = model.ttn_digest()
    result = fit(model, x, y, cfg, eval_sets)
    if model.ttn_digest() != before:
        raise RuntimeError("frozen TTN parameters changed during fine-tuning")
    return result


def train_e2e(
    x: np.ndarray,
    y: np.ndarray,
    ttn: TTLayer,
    pqc: PQCParams,
    num_classes: int,
    cfg: TrainConfig,
    readout_gain: float = 5.0,
    readout: DenseHead | None = None,
    ring: bool = False,
    eval_sets=None,
) -> TrainResult:
    """TTN-VQC baseline: gradients flow into the TTN cores as well."""
    model = ModelAssembly(
        Variant.TTN_VQC,
        num_classes,
        ttn=ttn,
        pqc=pqc,
        readout_gain=readout_gain,
        readout=readout,
        ring=ring,
    )
    return fit(model, x, y, cfg, eval_sets)


def train_pca_vqc(
    x: np.ndarray,
    y: np.ndarray,
    pca: PCABasis,
    pqc: PQCParams,
    num_classes: int,
    cfg: TrainConfig,
    readout_gain: float = 5.0,
    readout: DenseHead | None = None,
    ring: bool = False,
    eval_sets=None,
) -> TrainResult:
    model = ModelAssembly(
        Variant.PCA_VQC,
        num_classes,
        pca=pca,
        pqc=pqc,
        readout_gain=readout_gain,
        readout=readout,
        ring=ring,
    )
    return fit(model, x, y, cfg, eval_sets)
