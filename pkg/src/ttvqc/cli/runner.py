"""Executes the pipeline steps named in a resolved config and writes run artifacts."""

from __future__ import annotations

import csv
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import checkpoint, diag
from ..data import (
    Dataset,
    DotGenConfig,
    SplitSpec,
    build_splits,
    find_mnist,
    gen_charge_diagrams,
    load_idx,
    read_ttqd,
    stratified_split,
    write_ttqd,
)
from ..learn import (
    DenseHead,
    ModelAssembly,
    MetricRow,
    TrainConfig,
    Variant,
    evaluate,
    finetune_stage2,
    pca_fit,
    pretrain_stage1,
    train_e2e,
    train_pca_vqc,
)
from ..learn.pca import PCABasis
from ..qsim import PQCParams, sigmoid
from ..tt import TTLayer, TTShape, tt_forward
from .config import ResolvedConfig

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("stage", "epoch", "split", "ce", "accuracy")
MODEL_NAMES = {
    "pretrain": "TTN+Dense",
    "finetune": "Pre+TTN-VQC",
    "e2e": "TTN-VQC",
    "vqc_pca": "PCA+VQC",
}
# per-step seed streams
STREAMS = {"split": 0, "pretrain": 1, "finetune": 2, "e2e": 3, "vqc_pca": 4, "diagnose": 5}


def fmt(x: float) -> str:
    """17 significant digits: round-trips any float64."""
    return f"{x:.17g}"


def derive_seed(seed: int, stream: str) -> int:
    return int(np.random.SeedSequence([seed, STREAMS[stream]]).generate_state(1)[0])


class RunError(RuntimeError):
    pass


@dataclass
class Splits:
    source: Dataset  # pre-training set
    target: Dataset  # fine-tuning set
    test: Dataset
    joint: Dataset  # training set of the end-to-end baselines


def _concat(a: Dataset, b: Dataset) -> Dataset:
    return Dataset(
        np.concatenate([a.images, b.images]),
        np.concatenate([a.labels, b.labels]),
        classes=b.classes,
    )


def load_splits(cfg: ResolvedConfig) -> Splits:
    seed = derive_seed(cfg.seed, "split")
    if cfg.data == "mnist":
        root = cfg.mnist_dir or os.environ.get("TTQ_MNIST_DIR", "")
        train = load_idx(*find_mnist(root, "train"))
        pool = load_idx(*find_mnist(root, "test"))
        spec = SplitSpec(cfg.source_classes, cfg.source_count, cfg.target_classes, cfg.target_count, seed)
        s0, st, test = build_splits(train, spec, pool)
        # baselines train on S0 and ST together, restricted to the target classes
        original = np.array(s0.classes)[s0.labels]
        keep = np.flatnonzero(np.isin(original, spec.target_classes))
        lut = {c: i for i, c in enumerate(spec.target_classes)}
        extra = Dataset(
            s0.images[keep],
            np.array([lut[int(c)] for c in original[keep]], dtype=np.int64),
            classes=spec.target_classes,
        )
        return Splits(s0, st, test, _concat(extra, st))
    if cfg.data == "dots":
        target = gen_charge_diagrams(_dot_config(cfg, cfg.dots_count_per_class, stream=0))
        train, test = stratified_split(target, cfg.train_fraction, seed)
        source = gen_charge_diagrams(_dot_config(cfg, cfg.dots_source_count_per_class, stream=1))
        return Splits(source, train, test, train)
    ds = read_ttqd(cfg.dataset_path)
    train, test = stratified_split(ds, cfg.train_fraction, seed)
    return Splits(train, train, test, train)


def _dot_config(cfg: ResolvedConfig, count: int, stream: int) -> DotGenConfig:
    return DotGenConfig(
        lines_range=tuple(cfg.dots_lines),
        noise_level=cfg.dots_noise,
        background=cfg.dots_background,
        count_per_class=count,
        seed=cfg.seed,
        stream=stream,
    )


def _num_classes(ds: Dataset) -> int:
    if ds.classes is not None:
        return len(ds.classes)
    return int(ds.labels.max()) + 1 if len(ds) else 0


def model_from_params(params: dict[str, np.ndarray], cfg: ResolvedConfig) -> ModelAssembly:
    """Rebuild a model from checkpoint blocks; the variant follows from the block names."""
    ttn = None
    cores = [params[f"ttn.core{k}"] for k in range(len(cfg.tt_input_dims)) if f"ttn.core{k}" in params]
    if cores:
        ttn = TTLayer(TTShape(cfg.tt_input_dims, cfg.tt_output_dims, cfg.tt_ranks), cores)
    readout = None
    if "readout.weight" in params:
        readout = DenseHead(params["readout.weight"], params["readout.bias"])
    if "head.weight" in params:
        head = DenseHead(params["head.weight"], params["head.bias"])
        return ModelAssembly(Variant.TTN_HEAD, head.weight.shape[0], ttn=ttn, head=head)
    pqc = PQCParams(params["pqc.angles"])
    c = readout.weight.shape[0] if readout else len(cfg.target_classes)
    common = dict(pqc=pqc, readout=readout, readout_gain=cfg.readout_gain, ring=cfg.ring)
    if "pca.basis" in params:
        pca = PCABasis(params["pca.basis"], params["pca.mean"], np.zeros(params["pca.basis"].shape[1]))
        return ModelAssembly(Variant.PCA_VQC, c, pca=pca, **common)
    if ttn is None:
        raise RunError("checkpoint holds neither TTN cores nor a PCA basis")
    return ModelAssembly(Variant.TTN_VQC, c, ttn=ttn, **common)


class Run:
    """One run directory: lock, resolved config, metrics, timings, checkpoints."""

    def __init__(self, cfg: ResolvedConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.metrics: list[tuple[str, MetricRow]] = []
        self.timing: list[tuple[str, int, float]] = []
        self.models: dict[str, ModelAssembly] = {}
        self.model_rows: list[tuple[str, str, int]] = []
        self._splits: Splits | None = None

    @property
    def splits(self) -> Splits:
        if self._splits is None:
            self._splits = load_splits(self.cfg)
        return self._splits

    def execute(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        lock = self.out / "run.lock"
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunError(f"{self.out} is locked by another run (delete {lock} if it is stale)") from None
        try:
            os.write(fd, f"{os.getpid()}\n".encode())
            os.close(fd)
            (self.out / "config.resolved").write_text(self.cfg.snapshot(), encoding="utf-8")
            for step in self.cfg.pipeline:
                log.info("step %s", step)
                getattr(self, f"step_{step}")()
                self._flush()
        finally:
            lock.unlink(missing_ok=True)

    def _flush(self) -> None:
        with open(self.out / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRIC_COLUMNS)
            for stage, r in self.metrics:
                w.writerow([stage, r.epoch, r.split, fmt(r.ce), fmt(r.accuracy)])
        with open(self.out / "timing.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("stage", "epoch", "seconds"))
            for stage, epoch, sec in self.timing:
                w.writerow([stage, epoch, f"{sec:.3f}"])
        with open(self.out / "models.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("stage", "model", "params", "depth"))
            for stage, name, count in self.model_rows:
                w.writerow([stage, name, count, self.cfg.depth])

    def _train_cfg(self, stage: str, pre: bool = False) -> TrainConfig:
        cfg = self.cfg
        return TrainConfig(
            batch_size=cfg.batch_size,
            learning_rate=cfg.pretrain_learning_rate if pre else cfg.learning_rate,
            epochs=cfg.pretrain_epochs if pre else cfg.epochs,
            seed=derive_seed(cfg.seed, stage),
        )

    def _record(self, stage: str, model: ModelAssembly, trace: list[MetricRow], seconds: float) -> None:
        self.metrics += [(stage, r) for r in trace]
        epochs = max((r.epoch for r in trace), default=0)
        # wall time is kept apart from metrics.csv so that file stays reproducible
        self.timing += [(stage, e, seconds / max(epochs, 1)) for e in range(1, epochs + 1)]
        self.models[stage] = model
        self.model_rows.append((stage, MODEL_NAMES.get(stage, stage), model.param_count()))
        checkpoint.save(self.out / f"{stage}.ckpt", model.parameters())

    def _rng(self, stage: str, part: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, STREAMS[stage], part])

    def _tt_shape(self) -> TTShape:
        return TTShape(self.cfg.tt_input_dims, self.cfg.tt_output_dims, self.cfg.tt_ranks)

    def _readout(self, stage: str, c: int) -> DenseHead | None:
        if not self.cfg.trainable_readout:
            return None
        return DenseHead.random(self.cfg.qubits, c, self._rng(stage, 2))

    def _pretrained_ttn(self) -> TTLayer:
        if "pretrain" in self.models:
            return self.models["pretrain"].ttn.copy()
        if self.cfg.checkpoint:
            params = checkpoint.load(self.cfg.checkpoint)
            cores = [params.get(f"ttn.core{k}") for k in range(len(self.cfg.tt_input_dims))]
            if any(c is None for c in cores):
                raise RunError(f"{self.cfg.checkpoint} has no TTN cores")
            return TTLayer(self._tt_shape(), cores)
        raise RunError("finetune needs a pretrain step earlier in the pipeline or a checkpoint")

    def _x(self, ds: Dataset, pca: bool = False) -> np.ndarray:
        if pca:
            return ds.flat
        return ds.images.reshape((len(ds),) + tuple(self.cfg.tt_input_dims))

    def step_pretrain(self) -> None:
        src = self.splits.source
        c = _num_classes(src)
        t0 = time.perf_counter()
        res = pretrain_stage1(
            self._x(src),
            src.labels,
            TTLayer.random(self._tt_shape(), self._rng("pretrain", 0)),
            DenseHead.random(self.cfg.qubits, c, self._rng("pretrain", 1)),
            self._train_cfg("pretrain", pre=True),
        )
        self._record("pretrain", res.model, res.trace, time.perf_counter() - t0)

    def step_finetune(self) -> None:
        sp = self.splits
        c = _num_classes(sp.target)
        t0 = time.perf_counter()
        res = finetune_stage2(
            self._x(sp.target),
            sp.target.labels,
            self._pretrained_ttn(),
            PQCParams.random(self.cfg.depth, self.cfg.qubits, self._rng("finetune", 0)),
            c,
            self._train_cfg("finetune"),
            readout_gain=self.cfg.readout_gain,
            readout=self._readout("finetune", c),
            ring=self.cfg.ring,
            eval_sets={"test": (self._x(sp.test), sp.test.labels)},
        )
        self._record("finetune", res.model, res.trace, time.perf_counter() - t0)

    def step_e2e(self) -> None:
        sp = self.splits
        c = _num_classes(sp.joint)
        t0 = time.perf_counter()
        res = train_e2e(
            self._x(sp.joint),
            sp.joint.labels,
            TTLayer.random(self._tt_shape(), self._rng("e2e", 0)),
            PQCParams.random(self.cfg.depth, self.cfg.qubits, self._rng("e2e", 1)),
            c,
            self._train_cfg("e2e"),
            readout_gain=self.cfg.readout_gain,
            readout=self._readout("e2e", c),
            ring=self.cfg.ring,
            eval_sets={"test": (self._x(sp.test), sp.test.labels)},
        )
        self._record("e2e", res.model, res.trace, time.perf_counter() - t0)

    def step_vqc_pca(self) -> None:
        sp = self.splits
        c = _num_classes(sp.joint)
        t0 = time.perf_counter()
        basis = pca_fit(sp.joint.flat, self.cfg.qubits)
        res = train_pca_vqc(
            sp.joint.flat,
            sp.joint.labels,
            basis,
            PQCParams.random(self.cfg.depth, self.cfg.qubits, self._rng("vqc_pca", 1)),
            c,
            self._train_cfg("vqc_pca"),
            readout_gain=self.cfg.readout_gain,
            readout=self._readout("vqc_pca", c),
            ring=self.cfg.ring,
            eval_sets={"test": (sp.test.flat, sp.test.labels)},
        )
        self._record("vqc_pca", res.model, res.trace, time.perf_counter() - t0)

    def step_eval(self) -> None:
        if self.cfg.checkpoint:
            model = model_from_params(checkpoint.load(self.cfg.checkpoint), self.cfg)
        elif self.models:
            model = list(self.models.values())[-1]
        else:
            raise RunError("eval needs a trained model earlier in the pipeline or a checkpoint")
        sp = self.splits
        ds, split = (sp.source, "source") if model.variant == Variant.TTN_HEAD else (sp.test, "test")
        ce, acc = evaluate(model, self._x(ds, model.variant == Variant.PCA_VQC), ds.labels)
        self.metrics.append(("eval", MetricRow(0, split, ce, acc)))

    def step_gen_dots(self) -> None:
        ds = gen_charge_diagrams(_dot_config(self.cfg, self.cfg.dots_count_per_class, stream=0))
        write_ttqd(self.out / "dots.ttqd", ds, num_classes=2)

    def step_diagnose(self) -> None:
        rows = diagnostics(self.cfg, self.splits, self.models, self._pretrained_or_none())
        diag.write_diag_csv(self.out / "diagnostics.csv", rows)

    def _pretrained_or_none(self) -> TTLayer | None:
        try:
            return self._pretrained_ttn()
        except RunError:
            return None


def _ttn_features(ttn: TTLayer):
    dims = ttn.shape.input_dims

    def h(x):
        x = np.asarray(x, dtype=np.float64)
        return sigmoid(tt_forward(ttn, x.reshape((x.shape[0],) + dims)))

    return h


def diagnostics(
    cfg: ResolvedConfig,
    splits: Splits,
    models: dict[str, ModelAssembly],
    pretrained: TTLayer | None,
) -> list[diag.DiagRow]:
    rows: list[diag.DiagRow] = []
    seed = derive_seed(cfg.seed, "diagnose")
    sample = splits.target.flat[: cfg.diag_sample_size]
    if cfg.diag_family == "head_on_frozen":
        if pretrained is None:
            raise RunError("diag_family=head_on_frozen needs a pretrained TTN (pretrain step or checkpoint)")
        family = diag.FunctionFamilyHandle.head_on_frozen(
            _ttn_features(pretrained), restarts=cfg.diag_restarts, steps=cfg.diag_steps
        )
    else:
        family = diag.FunctionFamilyHandle(cfg.diag_family, radius=cfg.diag_radius)
    est, err = diag.rademacher_estimate(family, sample, cfg.diag_trials, seed)
    rows.append(
        diag.DiagRow(
            "rademacher",
            est,
            err,
            f"{family.settings()};trials={cfg.diag_trials};n={sample.shape[0]};bound={family.bound(sample):g}",
        )
    )

    shape = TTShape(cfg.tt_input_dims, cfg.tt_output_dims, cfg.tt_ranks)
    c_ttn = sum(int(np.prod(shape.core_shape(k))) for k in range(shape.order))
    c_src = _num_classes(splits.source)
    inputs = diag.BoundInputs(
        c_ttn=c_ttn,
        c_head=cfg.qubits * c_src + c_src,
        c_vqc=cfg.depth * cfg.qubits * 3,
        n_source=max(len(splits.source), 1),
        n_target=max(len(splits.target), 1),
        B=cfg.bound_B,
        L=cfg.bound_L,
        delta=cfg.bound_delta,
        nu=cfg.bound_nu,
    )
    leading, explicit = diag.bound_rhs(inputs)
    settings = (
        f"B={cfg.bound_B:g};L={cfg.bound_L:g};delta={cfg.bound_delta:g};nu={cfg.bound_nu:g};"
        f"C_TTN={inputs.c_ttn:g};C_A={inputs.c_head:g};C_VQC={inputs.c_vqc:g};"
        f"S0={inputs.n_source};ST={inputs.n_target};B_L_placeholder;epsilon_omitted"
    )
    rows.append(diag.DiagRow("bound_leading", leading, 0.0, settings))
    rows.append(diag.DiagRow("bound_constant_explicit", explicit, 0.0, settings))

    stage = next((s for s in ("finetune", "e2e", "vqc_pca") if s in models), None)
    if stage is not None:
        trained = models[stage]
        pca = trained.variant == Variant.PCA_VQC
        dims = tuple(cfg.tt_input_dims)
        x_test = splits.test.flat if pca else splits.test.images.reshape((len(splits.test),) + dims)
        ref = diag.PixelClassifier.train(splits.joint.flat, splits.joint.labels, _num_classes(splits.joint), seed=seed)
        trained_ce = diag.mean_ce(trained, x_test, splits.test.labels)
        ref_ce = diag.mean_ce(ref, splits.test.flat, splits.test.labels)
        rows.append(
            diag.DiagRow(
                "transfer_risk_proxy",
                trained_ce - ref_ce,
                0.0,
                f"proxy;trained={stage};reference=pixel_softmax;ref_steps=500",
            )
        )

    if pretrained is not None and "e2e" in models:
        heads = diag.HeadFamily(seed=seed)
        x = splits.target.images
        h_ref = _ttn_features(pretrained)
        h_new = _ttn_features(models["e2e"].ttn)
        c = _num_classes(splits.target)
        _, ref_head = heads.fit(h_ref(x), splits.target.labels, c)
        d = diag.representation_difference(h_new, h_ref, ref_head, x, splits.target.labels, heads)
        rows.append(diag.DiagRow("representation_difference", d, 0.0, f"new=e2e;ref=pretrain;{heads.settings()}"))
        worst, _ = diag.worst_case_difference(h_new, h_ref, x, cfg.diag_probes, c, heads, seed=seed)
        rows.append(
            diag.DiagRow(
                "worst_case_difference",
                worst,
                0.0,
                f"new=e2e;ref=pretrain;probes={cfg.diag_probes};lower_bound;{heads.settings()}",
            )
        )
    return rows
