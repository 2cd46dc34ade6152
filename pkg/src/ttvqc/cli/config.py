"""Flat ``key = value`` experiment configs with ``#`` comments and typed keys."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

PIPELINES = ("pretrain", "finetune", "e2e", "vqc_pca", "gen_dots", "diagnose", "eval")
DATA_SOURCES = ("mnist", "dots", "ttqd")
FAMILIES = ("zero", "sign_constant", "linear_ball", "head_on_frozen")


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _choice(options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _pipeline(text: str) -> tuple[str, ...]:
    steps = _names(text)
    if not steps:
        raise ValueError("pipeline is empty")
    for s in steps:
        _choice(PIPELINES)(s)
    return steps


# key -> (parser, default text)
KEYS: dict[str, tuple] = {
    "pipeline": (_pipeline, "pretrain,finetune"),
    "seed": (int, "0"),
    "out": (str, "runs/default"),
    "data": (_choice(DATA_SOURCES), "mnist"),
    "mnist_dir": (str, ""),
    "dataset_path": (str, ""),
    "checkpoint": (str, ""),
    "source_classes": (_ints, "1,2,3,4,5,6"),
    "source_count": (int, "18000"),
    "target_classes": (_ints, "2,5"),
    "target_count": (int, "2000"),
    "dots_count_per_class": (int, "400"),
    "dots_source_count_per_class": (int, "2000"),
    "dots_noise": (float, "0.0"),
    "dots_background": (float, "0.5"),
    "dots_lines": (_floats, "3.0,4.0"),
    "train_fraction": (float, "0.8"),
    "tt_input_dims": (_ints, "7,16,7"),
    "tt_output_dims": (_ints, "2,2,2"),
    "tt_ranks": (_ints, "1,3,3,1"),
    "qubits": (int, "8"),
    "depth": (int, "2"),
    "ring": (_bool, "false"),
    "readout_gain": (float, "5.0"),
    "trainable_readout": (_bool, "false"),
    "batch_size": (int, "50"),
    "learning_rate": (float, "0.001"),
    "epochs": (int, "10"),
    "pretrain_epochs": (int, "10"),
    "pretrain_learning_rate": (float, "0.001"),
    "diag_family": (_choice(FAMILIES), "linear_ball"),
    "diag_radius": (float, "1.0"),
    "diag_trials": (int, "1000"),
    "diag_sample_size": (int, "200"),
    "diag_restarts": (int, "8"),
    "diag_steps": (int, "200"),
    "diag_probes": (int, "4"),
    "bound_B": (float, "10.0"),
    "bound_L": (float, "1.0"),
    "bound_delta": (float, "0.05"),
    "bound_nu": (float, "1.0"),
}


@dataclass
class ResolvedConfig:
    """Typed values plus the exact text each came from, in key order."""

    values: dict
    text: dict[str, str]

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def snapshot(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.text.items())


def parse_lines(text: str, source: str) -> list[tuple[str, str, str]]:
    """``(key, value, location)`` for every assignment, in file order."""
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {body!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{n}: missing key")
        out.append((key, value, f"{source}:{n}"))
    return out


def recipe_names() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("ttvqc.recipes").iterdir() if p.name.endswith(".cfg"))


def read_config_text(ref: str) -> tuple[str, str]:
    """Text and display name of a config file, or of a bundled recipe by name."""
    path = Path(ref)
    if path.is_file():
        return path.read_text(encoding="utf-8"), str(path)
    name = ref[:-4] if ref.endswith(".cfg") else ref
    res = resources.files("ttvqc.recipes") / f"{name}.cfg"
    if res.is_file():
        return res.read_text(encoding="utf-8"), f"{name}.cfg"
    raise ConfigError(f"config {ref!r} not found (bundled recipes: {', '.join(recipe_names())})")


def resolve(
    config_ref: str | None = None,
    overrides: list[tuple[str, str]] | None = None,
) -> ResolvedConfig:
    """Defaults, then the config file, then overrides; later assignments win."""
    assignments = [(k, d, "default") for k, (_, d) in KEYS.items()]
    if config_ref is not None:
        text, source = read_config_text(config_ref)
        assignments += parse_lines(text, source)
    assignments += [(k, v, f"--{k}") for k, v in overrides or []]
    raw: dict[str, str] = {}
    where: dict[str, str] = {}
    for key, value, loc in assignments:
        if key not in KEYS:
            raise ConfigError(f"{loc}: unknown key {key!r}")
        raw[key] = value
        where[key] = loc
    values = {}
    for key, value in raw.items():
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{where[key]}: bad value for {key}: {exc}") from None
    cfg = ResolvedConfig(values, raw)
    _validate(cfg, where)
    return cfg


def _validate(cfg: ResolvedConfig, where: dict[str, str]) -> None:
    def fail(key, msg):
        raise ConfigError(f"{where[key]}: {msg}")

    for key in ("batch_size", "depth", "qubits", "diag_trials", "diag_sample_size", "diag_probes"):
        if cfg.values[key] < 1:
            fail(key, f"{key} must be >= 1")
    for key in ("epochs", "pretrain_epochs", "source_count", "target_count"):
        if cfg.values[key] < 0:
            fail(key, f"{key} must be >= 0")
    for key in ("learning_rate", "pretrain_learning_rate"):
        if not cfg.values[key] >= 0:
            fail(key, f"{key} must be >= 0")
    if not 0 < cfg.train_fraction < 1:
        fail("train_fraction", "train_fraction must lie in (0, 1)")
    if len(cfg.dots_lines) != 2:
        fail("dots_lines", "dots_lines needs two values: low,high")
    uses_ttn = any(p in cfg.pipeline for p in ("pretrain", "finetune", "e2e"))
    out_dims = cfg.tt_output_dims
    if uses_ttn:
        size = 1
        for d in out_dims:
            size *= d
        if size != cfg.qubits:
            fail("qubits", f"qubits={cfg.qubits} but tt_output_dims multiply to {size}")
        if len(cfg.tt_input_dims) != len(out_dims) or len(cfg.tt_ranks) != len(out_dims) + 1:
            fail("tt_ranks", "tt_input_dims, tt_output_dims and tt_ranks disagree in length")
    if cfg.data == "mnist" and any(p != "gen_dots" for p in cfg.pipeline):
        if not (cfg.mnist_dir or os.environ.get("TTQ_MNIST_DIR")):
            fail("mnist_dir", "data=mnist needs mnist_dir (or the TTQ_MNIST_DIR environment variable)")
    if cfg.data == "ttqd" and not cfg.dataset_path:
        fail("dataset_path", "data=ttqd needs dataset_path")
    for key in ("mnist_dir", "dataset_path", "checkpoint"):
        if cfg.values[key] and not Path(cfg.values[key]).exists():
            fail(key, f"{key} {cfg.values[key]!r} does not exist")
