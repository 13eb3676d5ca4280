"""Level-set risk and excess risk against ground truth."""

from __future__ import annotations

import math

import numpy as np

from .grid import DimensionMismatchError, GridSignal, LevelSetMask


def true_level_set(f: GridSignal, gamma: float) -> LevelSetMask:
    """S*_N = {i : f_i > gamma} (strict)."""
    return LevelSetMask(f.shape, f.values > gamma)


def _check(mask: LevelSetMask, f: GridSignal) -> None:
    if mask.shape.N != f.shape.N:
        raise DimensionMismatchError(f"mask has N={mask.shape.N}, signal has N={f.shape.N}")


def excess_risk(mask: LevelSetMask, f: GridSignal, gamma: float) -> float:
    """(1/N) * sum over the symmetric difference of |gamma - f_i|."""
    _check(mask, f)
    diff = mask.inside != (f.values > gamma)
    return math.fsum(np.abs(gamma - f.values[diff])) / f.shape.N


def risk(mask: LevelSetMask, f: GridSignal, gamma: float) -> float:
    """(1/N) * sum_i (gamma - f_i) * (+1 if i in S else -1)."""
    _check(mask, f)
    sign = np.where(mask.inside, 1.0, -1.0)
    return math.fsum((gamma - f.values) * sign) / f.shape.N
