"""Empirical estimators for the generalization quantities of two-stage training.

Covers the empirical Rademacher complexity of a function family, the
representation difference between two feature maps (for a fixed reference head
and in the worst case over probe heads), a test-risk proxy for transfer, and
the closed-form risk bound evaluated at given sample sizes.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .learn.losses import batch_softmax_ce, log_softmax, soft_target_ce, softmax
from .learn.models import DenseHead
from .learn.optim import OptimizerState, adam_step


class FamilyKind(str, enum.Enum):
    ZERO = "zero"
    SIGN_CONSTANT = "sign_constant"
    LINEAR_BALL = "linear_ball"
    HEAD_ON_FROZEN = "head_on_frozen"


@dataclass(frozen=True)
class FunctionFamilyHandle:
    """A real-valued function family on which a Rademacher sup can be taken.

    ``LINEAR_BALL`` is ``{x -> <w, x> : |w| <= radius}``. ``HEAD_ON_FROZEN`` is
    ``{x -> tanh(<w, h(x)> + b)}`` for a fixed ``representation`` h; its sup has
    no closed form and is approximated by ``restarts`` runs of ``steps`` Adam
    ascent steps.
    """

    kind: FamilyKind
    radius: float = 1.0
    representation: Callable[[np.ndarray], np.ndarray] | None = None
    restarts: int = 8
    steps: int = 200
    ascent_rate: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.kind == FamilyKind.LINEAR_BALL and not self.radius > 0:
            raise ValueError("radius must be > 0")
        if self.kind == FamilyKind.HEAD_ON_FROZEN:
            if self.representation is None:
                raise ValueError("head_on_frozen needs a representation")
            if self.restarts < 1 or self.steps < 0:
                raise ValueError("restarts must be >= 1 and steps >= 0")

    @classmethod
    def zero(cls):
        return cls(FamilyKind.ZERO)

    @classmethod
    def sign_constant(cls):
        return cls(FamilyKind.SIGN_CONSTANT)

    @classmethod
    def linear_ball(cls, radius: float = 1.0):
        return cls(FamilyKind.LINEAR_BALL, radius=radius)

    @classmethod
    def head_on_frozen(cls, representation, restarts: int = 8, steps: int = 200):
        return cls(FamilyKind.HEAD_ON_FROZEN, representation=representation, restarts=restarts, steps=steps)

    def features(self, sample: np.ndarray) -> np.ndarray:
        x = np.asarray(sample, dtype=np.float64)
        if self.kind == FamilyKind.HEAD_ON_FROZEN:
            x = np.asarray(self.representation(x), dtype=np.float64)
        return x.reshape(x.shape[0], -1)

    def bound(self, sample: np.ndarray) -> float:
        """Largest |f(x)| any member can reach on the sample (D_S)."""
        if self.kind == FamilyKind.ZERO:
            return 0.0
        if self.kind == FamilyKind.LINEAR_BALL:
            z = self.features(sample)
            return float(self.radius * np.max(np.linalg.norm(z, axis=1)))
        return 1.0

    def settings(self) -> str:
        if self.kind == FamilyKind.LINEAR_BALL:
            return f"family={self.kind.value};radius={self.radius:g}"
        if self.kind == FamilyKind.HEAD_ON_FROZEN:
            return f"family={self.kind.value};restarts={self.restarts};steps={self.steps}"
        return f"family={self.kind.value}"

    def sup_correlation(self, z: np.ndarray, sigma: np.ndarray, rng: np.random.Generator) -> float:
        """``sup_f (1/n) sum sigma_i f(x_i)`` on precomputed features ``z``."""
        n = z.shape[0]
        if self.kind == FamilyKind.ZERO:
            return 0.0
        if self.kind == FamilyKind.SIGN_CONSTANT:
            return abs(float(sigma.sum())) / n
        if self.kind == FamilyKind.LINEAR_BALL:
            return self.radius * float(np.linalg.norm(sigma @ z)) / n
        return self._ascent(z, sigma, rng)

    def _ascent(self, z, sigma, rng) -> float:
        n, d = z.shape
        best = 0.0
        for _ in range(self.restarts):
            params = {"w": rng.normal(0.0, d**-0.5, size=d), "b": np.zeros(1)}
            state = OptimizerState(learning_rate=self.ascent_rate)
            for _ in range(self.steps):
                t = np.tanh(z @ params["w"] + params["b"])
                s = sigma * (1.0 - t * t) / n
                # minimize the negated objective
                adam_step(params, {"w": -(s @ z), "b": -np.array([s.sum()])}, state)
            value = float(sigma @ np.tanh(z @ params["w"] + params["b"])) / n
            # the family is closed under negation, so -f is a member too
            best = max(best, abs(value))
        return best


def rademacher_estimate(
    family: FunctionFamilyHandle, sample: np.ndarray, trials: int, seed: int = 0
) -> tuple[float, float]:
    """Monte-Carlo estimate of the empirical Rademacher complexity and its standard error.

    Trial t draws its signs (and any ascent restarts) from ``default_rng([seed, t])``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sample = np.asarray(sample, dtype=np.float64)
    if sample.ndim == 0 or sample.shape[0] == 0:
        raise ValueError("sample is empty")
    z = family.features(sample)
    values = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        sigma = rng.choice(np.array([-1.0, 1.0]), size=z.shape[0])
        values[t] = family.sup_correlation(z, sigma, rng)
    err = float(values.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return float(values.mean()), err


@dataclass(frozen=True)
class HeadFamily:
    """Affine softmax heads, fitted by full-batch Adam from several seeded starts."""

    restarts: int = 4
    max_steps: int = 5000
    grad_tol: float = 1e-6
    learning_rate: float = 0.05
    seed: int = 0

    def settings(self) -> str:
        return (
            f"restarts={self.restarts};max_steps={self.max_steps};"
            f"grad_tol={self.grad_tol:g};lr={self.learning_rate:g}"
        )

    def fit(self, z: np.ndarray, targets: np.ndarray, num_classes: int) -> tuple[float, DenseHead]:
        """Lowest mean CE reached over the restarts, and the head reaching it.

        ``targets`` are integer labels or rows of class probabilities.
        """
        z = np.asarray(z, dtype=np.float64)
        n, d = z.shape
        soft = np.ndim(targets) == 2
        best_loss, best_head = np.inf, None
        for r in range(self.restarts):
            head = DenseHead.random(d, num_classes, np.random.default_rng([self.seed, r]))
            params = {"w": head.weight, "b": head.bias}
            state = OptimizerState(learning_rate=self.learning_rate)
            for _ in range(self.max_steps):
                g = _ce(z @ head.weight.T + head.bias, targets, soft)[1] / n
                grads = {"w": g.T @ z, "b": g.sum(axis=0)}
                if math.sqrt(sum(float(np.sum(v * v)) for v in grads.values())) < self.grad_tol:
                    break
                adam_step(params, grads, state)
            loss = float(_ce(z @ head.weight.T + head.bias, targets, soft)[0].mean())
            if loss < best_loss:
                best_loss, best_head = loss, head
        return best_loss, best_head


def _ce(logits, targets, soft):
    if soft:
        return soft_target_ce(logits, targets)
    return batch_softmax_ce(logits, targets)


def _apply(h, x) -> np.ndarray:
    z = np.asarray(h(x) if callable(h) else h, dtype=np.float64)
    return z.reshape(z.shape[0], -1)


def _check_dims(z_new, z_ref, d=None):
    if z_new.shape[0] != z_ref.shape[0]:
        raise ValueError(f"representations give {z_new.shape[0]} and {z_ref.shape[0]} rows")
    if z_new.shape[0] == 0:
        raise ValueError("data is empty")
    d = z_ref.shape[1] if d is None else d
    if z_new.shape[1] != d or z_ref.shape[1] != d:
        raise ValueError(
            f"dimension mismatch: new {z_new.shape[1]}, reference {z_ref.shape[1]}, head expects {d}"
        )


def representation_difference(
    h_new,
    h_ref,
    ref_head: DenseHead,
    x: np.ndarray,
    y: np.ndarray,
    heads: HeadFamily = HeadFamily(),
) -> float:
    """Best head loss on ``h_new`` features minus the loss of ``ref_head`` on ``h_ref``.

    ``h_new`` and ``h_ref`` are callables on ``x`` or precomputed feature arrays.
    """
    z_new, z_ref = _apply(h_new, x), _apply(h_ref, x)
    _check_dims(z_new, z_ref, ref_head.weight.shape[1])
    y = np.asarray(y, dtype=np.int64)
    ref_loss = float(batch_softmax_ce(z_ref @ ref_head.weight.T + ref_head.bias, y)[0].mean())
    best, _ = heads.fit(z_new, y, ref_head.weight.shape[0])
    return best - ref_loss


def worst_case_difference(
    h_new,
    h_ref,
    x: np.ndarray,
    probe_heads: int,
    num_classes: int = 2,
    heads: HeadFamily = HeadFamily(),
    probe_scale: float = 3.0,
    seed: int = 0,
) -> tuple[float, list[float]]:
    """Max over seeded probe heads of the representation difference they induce.

    Probe p is a random affine head drawn from ``default_rng([seed, p])``; its
    softmax on ``h_ref`` features serves as the target distribution, so the
    reference loss is the probe's own entropy and a head fitted on ``h_ref``
    can recover it exactly. The maximum over finitely many probes is a lower
    bound on the true sup. Returns the maximum and the per-probe values.
    """
    if probe_heads < 1:
        raise ValueError("probe_heads must be >= 1")
    z_new, z_ref = _apply(h_new, x), _apply(h_ref, x)
    _check_dims(z_new, z_ref)
    values = []
    for p in range(probe_heads):
        probe = DenseHead.random(z_ref.shape[1], num_classes, np.random.default_rng([seed, p]))
        logits = probe_scale * (z_ref @ probe.weight.T + probe.bias)
        targets = softmax(logits)
        ref_loss = float(-np.sum(targets * log_softmax(logits), axis=1).mean())
        best, _ = heads.fit(z_new, targets, num_classes)
        values.append(best - ref_loss)
    return max(values), values


def mean_ce(model, x: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax CE of anything exposing ``logits(x)``."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] == 0:
        raise ValueError("test data is empty")
    return float(batch_softmax_ce(model.logits(x), y)[0].mean())


def transfer_risk_proxy(model_trained, model_reference, x: np.ndarray, y: np.ndarray) -> float:
    """Test CE of the trained model minus test CE of the reference model."""
    return mean_ce(model_trained, x, y) - mean_ce(model_reference, x, y)


@dataclass
class PixelClassifier:
    """Softmax regression on flattened inputs; the default reference for the risk proxy."""

    head: DenseHead

    def logits(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x.reshape(x.shape[0], -1) @ self.head.weight.T + self.head.bias

    @classmethod
    def train(cls, x, y, num_classes: int, steps: int = 500, seed: int = 0) -> "PixelClassifier":
        x = np.asarray(x, dtype=np.float64)
        fam = HeadFamily(restarts=1, max_steps=steps, learning_rate=0.01, seed=seed)
        _, head = fam.fit(x.reshape(x.shape[0], -1), np.asarray(y, dtype=np.int64), num_classes)
        return cls(head)


@dataclass(frozen=True)
class BoundInputs:
    """Inputs of the transfer-risk bound. ``B`` and ``L`` default to placeholders."""

    c_ttn: float
    c_head: float
    c_vqc: float
    n_source: int
    n_target: int
    B: float = 10.0
    L: float = 1.0
    delta: float = 0.05
    nu: float = 1.0

    def __post_init__(self):
        if self.n_source <= 0 or self.n_target <= 0:
            raise ValueError("sample sizes must be positive")
        if not (self.B > 0 and self.L > 0):
            raise ValueError("B and L must be > 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.nu > 0:
            raise ValueError("nu must be > 0")
        if min(self.c_ttn, self.c_head, self.c_vqc) < 0:
            raise ValueError("complexity terms must be >= 0")


def bound_rhs(inp: BoundInputs) -> tuple[float, float]:
    """Leading-order bound and the version with explicit constants."""
    src = math.sqrt((inp.c_ttn + inp.c_head) / inp.n_source)
    tgt = math.sqrt(inp.c_vqc / inp.n_target)
    leading = src / inp.nu + tgt
    conf = math.log(2.0 / inp.delta)
    explicit = (
        (16 * inp.L * src + 8 * inp.B * math.sqrt(conf / inp.n_source)) / inp.nu
        + 16 * inp.L * tgt
        + 8 * inp.B * math.sqrt(conf / inp.n_target)
    )
    return leading, explicit


@dataclass
class DiagRow:
    quantity: str
    value: float
    std_error: float = 0.0
    settings: str = ""


DIAG_COLUMNS = ("quantity", "value", "std_error", "settings")


def write_diag_csv(path, rows: list[DiagRow]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DIAG_COLUMNS)
        for r in rows:
            w.writerow([r.quantity, repr(float(r.value)), repr(float(r.std_error)), r.settings])
