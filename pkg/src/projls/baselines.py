"""Plug-in and thresholding baselines.

Estimated sets use ``>= gamma`` while the true set uses ``> gamma``.
"""

from __future__ import annotations

import itertools
import math
from typing import Sequence

import numpy as np
from scipy import linalg

from .grid import GridShape, GridSignal, LevelSetMask
from .metrics import excess_risk
from .operators import MeasurementOperator


class PluginError(RuntimeError):
    pass


def threshold_estimate(z: GridSignal, gamma: float) -> LevelSetMask:
    return LevelSetMask(z.shape, z.values >= gamma)


def risk_optimal_threshold(z: GridSignal, f_true: GridSignal, gamma: float) -> tuple[float, LevelSetMask]:
    """Threshold of ``z`` with the smallest excess risk against the truth.

    Candidates are -inf, +inf and midpoints between consecutive distinct
    values of ``z``; ties go to the smallest threshold.
    """
    v = z.values
    order = np.argsort(v, kind="stable")
    sv = v[order]
    w = np.abs(gamma - f_true.values[order])
    truth = f_true.values[order] > gamma
    # cut k: the k smallest values are outside, the rest inside
    miss = np.concatenate([[0.0], np.cumsum(np.where(truth, w, 0.0))])
    false_pos = np.concatenate([np.cumsum(np.where(truth, 0.0, w)[::-1])[::-1], [0.0]])
    n = sv.size
    cuts = np.concatenate([[0], np.flatnonzero(np.diff(sv) > 0) + 1, [n]])
    err = miss[cuts] + false_pos[cuts]
    best = int(np.argmin(err))
    k = int(cuts[best])
    if k == 0:
        thr = -math.inf
    elif k == n:
        thr = math.inf
    else:
        thr = 0.5 * (sv[k - 1] + sv[k])
    return thr, LevelSetMask(z.shape, v >= thr)


# Haar -------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)


def haar_forward(x: np.ndarray) -> np.ndarray:
    """Full-depth orthonormal separable Haar transform (pyramid layout)."""
    out = np.array(x, dtype=np.float64, copy=True)
    ext = list(out.shape)
    while any(e > 1 for e in ext):
        region = tuple(slice(0, e) for e in ext)
        block = out[region]
        for ax, e in enumerate(ext):
            if e > 1:
                even = np.take(block, np.arange(0, e, 2), axis=ax)
                odd = np.take(block, np.arange(1, e, 2), axis=ax)
                block = np.concatenate([(even + odd) / _SQRT2, (even - odd) / _SQRT2], axis=ax)
        out[region] = block
        ext = [e // 2 if e > 1 else e for e in ext]
    return out


def haar_inverse(c: np.ndarray) -> np.ndarray:
    out = np.array(c, dtype=np.float64, copy=True)
    exts = []
    ext = list(out.shape)
    while any(e > 1 for e in ext):
        exts.append(list(ext))
        ext = [e // 2 if e > 1 else e for e in ext]
    for ext in reversed(exts):
        region = tuple(slice(0, e) for e in ext)
        block = out[region]
        for ax in reversed(range(len(ext))):
            e = ext[ax]
            if e > 1:
                h = e // 2
                avg = np.take(block, np.arange(h), axis=ax)
                det = np.take(block, np.arange(h, e), axis=ax)
                even = (avg + det) / _SQRT2
                odd = (avg - det) / _SQRT2
                shape = list(block.shape)
                merged = np.empty(shape)
                idx = [slice(None)] * block.ndim
                idx[ax] = slice(0, None, 2)
                merged[tuple(idx)] = even
                idx[ax] = slice(1, None, 2)
                merged[tuple(idx)] = odd
                block = merged
        out[region] = block
    return out


def soft_threshold(x: np.ndarray, thr: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def _shifts(shape: GridShape, spins: int) -> list[tuple[int, ...]]:
    m = 1
    while m ** shape.d < spins:
        m += 1
    grid = itertools.product(*(range(min(m, s)) for s in shape.sides))
    return list(itertools.islice(grid, spins))


def haar_denoise(z: GridSignal, thr: float, cycle_spins: int = 1) -> np.ndarray:
    """Soft-threshold every detail coefficient, averaged over circular shifts."""
    if thr < 0 or cycle_spins < 1:
        raise ValueError("need thr >= 0 and cycle_spins >= 1")
    x = z.grid
    axes = tuple(range(z.shape.d))
    acc = np.zeros(z.shape.sides)
    shifts = _shifts(z.shape, cycle_spins)
    for shift in shifts:
        c = haar_forward(np.roll(x, shift, axis=axes))
        approx = c.flat[0]
        c = soft_threshold(c, thr)
        c.flat[0] = approx
        acc += np.roll(haar_inverse(c), tuple(-s for s in shift), axis=axes)
    return (acc / len(shifts)).ravel()


def haar_plugin(z: GridSignal, gamma: float, thr: float, cycle_spins: int = 1) -> LevelSetMask:
    return LevelSetMask(z.shape, haar_denoise(z, thr, cycle_spins) >= gamma)


# SVD-type plug-ins ------------------------------------------------------------

def _core_y(op: MeasurementOperator, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if op.has_mean_row and y.size == op.K:
        y = y[1:]
    return op.core, y


def tsvd_solution(op: MeasurementOperator, y: np.ndarray, rank: int) -> np.ndarray:
    a, y = _core_y(op, y)
    if not 1 <= rank <= min(a.shape):
        raise ValueError(f"rank must be in [1, {min(a.shape)}]")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise PluginError(f"SVD failed: {exc}") from exc
    if s[rank - 1] <= 0:
        raise PluginError(f"rank {rank} exceeds numerical rank (sigma_r = {s[rank - 1]:g})")
    return vt[:rank].T @ ((u[:, :rank].T @ y) / s[:rank])


def tikhonov_solution(op: MeasurementOperator, y: np.ndarray, alpha: float) -> np.ndarray:
    """Dual form f = A^T (A A^T + alpha I)^-1 y."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    a, y = _core_y(op, y)
    gram = a @ a.T
    gram[np.diag_indices_from(gram)] += alpha
    try:
        w = linalg.cho_solve(linalg.cho_factor(gram), y)
    except linalg.LinAlgError as exc:
        cond = np.linalg.cond(gram)
        raise PluginError(f"Cholesky failed (condition number {cond:.3g})") from exc
    return a.T @ w


def tsvd_plugin(op: MeasurementOperator, y: np.ndarray, rank: int, gamma: float,
                shape: GridShape | None = None) -> LevelSetMask:
    shape = shape or GridShape.of(op.N)
    return LevelSetMask(shape, tsvd_solution(op, y, rank) >= gamma)


def tikhonov_plugin(op: MeasurementOperator, y: np.ndarray, alpha: float, gamma: float,
                    shape: GridShape | None = None) -> LevelSetMask:
    shape = shape or GridShape.of(op.N)
    return LevelSetMask(shape, tikhonov_solution(op, y, alpha) >= gamma)


class SVDPath:
    """One thin SVD reused for every TSVD rank and Tikhonov alpha on a tuning grid."""

    def __init__(self, op: MeasurementOperator, y: np.ndarray):
        a, y = _core_y(op, y)
        self.u, self.s, self.vt = np.linalg.svd(a, full_matrices=False)
        self.uty = self.u.T @ y

    def tsvd(self, rank: int) -> np.ndarray:
        if not 1 <= rank <= self.s.size:
            raise ValueError(f"rank must be in [1, {self.s.size}]")
        return self.vt[:rank].T @ (self.uty[:rank] / self.s[:rank])

    def tikhonov(self, alpha: float) -> np.ndarray:
        if alpha <= 0:
            raise ValueError("alpha must be positive")
        return self.vt.T @ (self.s / (self.s ** 2 + alpha) * self.uty)


def oracle_grid(candidates: Sequence[float], masks, f_true: GridSignal, gamma: float):
    """Pick the candidate whose mask has the smallest excess risk (first on ties)."""
    best = None
    for value, mask in zip(candidates, masks):
        err = excess_risk(mask, f_true, gamma)
        if best is None or err < best[0]:
            best = (err, value, mask)
    if best is None:
        raise ValueError("empty tuning grid")
    return best[1], best[2], best[0]
