"""Random environment models: target mobility, pointing error, detector noise.

All draws go through :class:`RandomStream`, a seeded wrapper around numpy's
PCG64 generator. Independent sub-streams for trials are derived with
:meth:`RandomStream.spawn`, which keys numpy's ``SeedSequence`` on
``(master_seed, index)``; sub-stream ``i`` is the same no matter how many
others are drawn or in which order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import Vec2

__all__ = [
    "MobilitySpec",
    "PointingSpec",
    "NoiseSpec",
    "RandomStream",
    "sample_target_step",
    "sample_pointing_offset",
    "sample_noise",
]


@dataclass(frozen=True)
class MobilitySpec:
    """Per-axis standard deviation (m) of the target's step per feedback interval."""

    sigma_t: float

    def __post_init__(self):
        if not self.sigma_t >= 0:
            raise ValueError(f"sigma_t must be >= 0, got {self.sigma_t}")


@dataclass(frozen=True)
class PointingSpec:
    """Rayleigh scale (m) of the main-beam pointing error."""

    sigma_p: float

    def __post_init__(self):
        if not self.sigma_p >= 0:
            raise ValueError(f"sigma_p must be >= 0, got {self.sigma_p}")


@dataclass(frozen=True)
class NoiseSpec:
    """Standard deviation (W) of the additive power-measurement noise."""

    sigma_n: float

    def __post_init__(self):
        if not self.sigma_n >= 0:
            raise ValueError(f"sigma_n must be >= 0, got {self.sigma_n}")


class RandomStream:
    """Seeded, single-owner source of random draws."""

    def __init__(self, seed: int = 0, _spawn_key: tuple[int, ...] = ()):
        seed = int(seed)
        if not 0 <= seed < 2 ** 64:
            raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.spawn_key = tuple(_spawn_key)
        seq = np.random.SeedSequence(entropy=seed, spawn_key=self.spawn_key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def spawn(self, index: int) -> "RandomStream":
        """Independent child stream number ``index``."""
        if index < 0:
            raise ValueError("spawn index must be non-negative")
        return RandomStream(self.seed, self.spawn_key + (int(index),))

    def normal(self, scale: float, size=None):
        return self.generator.normal(0.0, scale, size)

    def rayleigh(self, scale: float, size=None):
        return self.generator.rayleigh(scale, size)

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, spawn_key={self.spawn_key})"


def sample_target_step(prev, mob: MobilitySpec, rng: RandomStream, size: int | None = None):
    """Brownian step of the target: ``prev`` plus an isotropic Gaussian offset.

    With ``size`` set, returns an array of ``size`` independent candidates of
    shape ``(size, 2)`` (all stepping from ``prev``).
    """
    shape = (2,) if size is None else (size, 2)
    moved = np.asarray(prev, dtype=float) + rng.normal(mob.sigma_t, shape)
    if size is None:
        return Vec2(float(moved[0]), float(moved[1]))
    return moved


def sample_pointing_offset(pt: PointingSpec, rng: RandomStream, size: int | None = None):
    """Pointing-error offset: Rayleigh radius, uniform angle on [0, 2 pi)."""
    radius = rng.rayleigh(pt.sigma_p, size)
    angle = rng.uniform(0.0, 2.0 * np.pi, size)
    dx, dy = radius * np.cos(angle), radius * np.sin(angle)
    if size is None:
        return Vec2(float(dx), float(dy))
    return np.stack([dx, dy], axis=-1)


def sample_noise(ns: NoiseSpec, rng: RandomStream, size=None):
    """Zero-mean Gaussian measurement noise (W). May be negative."""
    n = rng.normal(ns.sigma_n, size)
    return float(n) if size is None else n
