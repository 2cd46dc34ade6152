"""Synthetic charge stability diagrams for single (label 0) and double (label 1) dots.

Each diagram is the charge-transition map of a constant-interaction model over a
window of two gate voltages: the ground-state occupation is found on a
supersampled grid and pixels light up where the occupation changes. A single
dot yields one family of parallel lines; two capacitively coupled dots yield
two line families joined at anticrossing (triple-point) vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .types import Dataset

SUPERSAMPLE = 4
MAX_CHARGE = 8


@dataclass(frozen=True)
class DotGenConfig:
    grid_size: int = 28
    # charge transitions per dot crossed along the window diagonal
    lines_range: tuple[float, float] = (3.0, 4.0)
    noise_level: float = 0.0
    # peak-to-peak amplitude of the smooth background, relative to noise_level
    background: float = 0.5
    count_per_class: int = 400
    seed: int = 0
    # distinct streams give independent datasets from one seed
    stream: int = 0

    def __post_init__(self):
        if self.grid_size < 8:
            raise ValueError("grid_size must be >= 8")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")
        if self.count_per_class < 0:
            raise ValueError("count_per_class must be >= 0")
        lo, hi = self.lines_range
        if not 0 < lo <= hi:
            raise ValueError(f"invalid lines_range {self.lines_range}")


def _voltage_grid(n: int):
    t = (np.arange(n * SUPERSAMPLE) + 0.5) / (n * SUPERSAMPLE)
    vx, vy = np.meshgrid(t, t[::-1], indexing="xy")
    return vx, vy


def _transitions(occ: np.ndarray, n: int) -> np.ndarray:
    edge = np.zeros(occ.shape, dtype=bool)
    edge[:, :-1] |= occ[:, :-1] != occ[:, 1:]
    edge[:-1, :] |= occ[:-1, :] != occ[1:, :]
    img = edge.reshape(n, SUPERSAMPLE, n, SUPERSAMPLE).mean(axis=(1, 3))
    peak = img.max()
    return img / peak if peak > 0 else img


def _single_dot(cfg: DotGenConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.grid_size
    vx, vy = _voltage_grid(n)
    # lever arms set the line slope; charging energy 1, so the window diagonal
    # crosses ``lines`` transitions
    angle = rng.uniform(0.2, 0.3) * np.pi
    lines = rng.uniform(*cfg.lines_range)
    a1, a2 = np.cos(angle), np.sin(angle)
    a1, a2 = lines * a1 / (a1 + a2), lines * a2 / (a1 + a2)
    # window starts near the empty-dot corner
    offset = rng.uniform(-0.6, -0.2)
    mu = a1 * vx + a2 * vy + offset
    occ = np.floor(mu).astype(np.int64)
    return _transitions(occ, n)


def _double_dot(cfg: DotGenConfig, rng: np.random.Generator) -> np.ndarray:
    n = cfg.grid_size
    vx, vy = _voltage_grid(n)
    l1 = rng.uniform(*cfg.lines_range)
    l2 = rng.uniform(*cfg.lines_range)
    cross = rng.uniform(0.1, 0.35, size=2)
    # dot 1 is mostly tuned by the x gate, dot 2 by the y gate
    g1 = l1 * (vx + cross[0] * vy) + rng.uniform(-0.1, 0.3)
    g2 = l2 * (vy + cross[1] * vx) + rng.uniform(-0.1, 0.3)
    coupling = rng.uniform(0.2, 0.45)
    best = np.full(vx.shape, np.inf)
    occ = np.zeros(vx.shape, dtype=np.int64)
    for n1, n2 in product(range(MAX_CHARGE), repeat=2):
        e = 0.5 * n1 * n1 + 0.5 * n2 * n2 + coupling * n1 * n2 - n1 * g1 - n2 * g2
        better = e < best
        best[better] = e[better]
        occ[better] = n1 * MAX_CHARGE + n2
    return _transitions(occ, n)


def _noisy(img: np.ndarray, cfg: DotGenConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.noise_level == 0:
        return img
    n = img.shape[0]
    t = np.linspace(-0.5, 0.5, n)
    gx, gy = np.meshgrid(t, t, indexing="xy")
    direction = rng.uniform(0, 2 * np.pi)
    amp = cfg.background * cfg.noise_level * rng.uniform(0.0, 1.0)
    ramp = amp * (np.cos(direction) * gx + np.sin(direction) * gy) + 0.5 * amp
    out = img + ramp + rng.normal(0.0, cfg.noise_level, size=img.shape)
    return np.clip(out, 0.0, 1.0)


def gen_charge_diagrams(cfg: DotGenConfig) -> Dataset:
    """``count_per_class`` diagrams per label, interleaved 0, 1, 0, 1, ...

    Every item draws from its own generator seeded by
    ``(seed, stream, label, item)``, so output is independent of generation order.
    """
    images = []
    labels = []
    for i in range(cfg.count_per_class):
        for label, make in ((0, _single_dot), (1, _double_dot)):
            rng = np.random.default_rng([cfg.seed, cfg.stream, label, i])
            images.append(_noisy(make(cfg, rng), cfg, rng))
            labels.append(label)
    if not images:
        return Dataset(np.zeros((0, cfg.grid_size, cfg.grid_size)), np.zeros(0, dtype=np.int64), classes=(0, 1))
    return Dataset(np.stack(images), np.array(labels), classes=(0, 1))
