"""Synthetic test images with a regular gamma-boundary.

The default ``blobs`` phantom (seed 42, values in [44, 239]) has about 42% of
its pixels above 125.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .grid import GridShape, GridSignal

KINDS = ("blobs", "steps", "ramp")


@dataclass(frozen=True)
class PhantomSpec:
    kind: str = "blobs"
    low: float = 44.0
    high: float = 239.0
    features: int = 6
    seed: int = 42

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phantom kind {self.kind!r}")
        if self.high < self.low:
            raise ValueError("amplitude range is empty")
        if self.features < 0:
            raise ValueError("feature count must be nonnegative")


def _coords(shape: GridShape) -> list[np.ndarray]:
    """Pixel-center coordinates in [0, 1] per dimension, broadcastable."""
    axes = [(np.arange(s) + 0.5) / s for s in shape.sides]
    return np.meshgrid(*axes, indexing="ij")


def make_phantom(spec: PhantomSpec, shape: GridShape) -> GridSignal:
    lo, hi = spec.low, spec.high
    gen = _rng.stream(spec.seed, 0, 0, _rng.PHANTOM)
    if spec.kind == "ramp":
        pos = [np.arange(s) / max(s - 1, 1) for s in shape.sides]
        t = sum(np.meshgrid(*pos, indexing="ij")) / shape.d
        return GridSignal(shape, lo + (hi - lo) * t)

    coords = _coords(shape)
    f = np.full(shape.sides, lo)
    for _ in range(spec.features):
        center = gen.uniform(0.15, 0.85, shape.d)
        if spec.kind == "blobs":
            width = gen.uniform(0.06, 0.14)
            amp = gen.uniform(0.5, 1.0) * (hi - lo) * 1.2
            r2 = sum((c - m) ** 2 for c, m in zip(coords, center))
            f += amp * np.exp(-r2 / (2 * width ** 2))
        else:
            half = gen.uniform(0.05, 0.2, shape.d)
            level = gen.uniform(lo + 0.4 * (hi - lo), hi)
            box = np.ones(shape.sides, dtype=bool)
            for c, m, h in zip(coords, center, half):
                box &= np.abs(c - m) <= h
            f = np.where(box, np.maximum(f, level), f)
    return GridSignal(shape, np.clip(f, lo, hi))
