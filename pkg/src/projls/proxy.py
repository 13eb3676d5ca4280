"""Proxy observations z = A^T y and projected offset subtraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DimensionMismatchError, GridShape, GridSignal
from .operators import MeasurementOperator

MODES = ("none", "projected_mean", "oracle_median")


@dataclass(frozen=True, eq=False)
class ProxyResult:
    z: GridSignal
    lambda_hat: float
    gamma_effective: float
    mode: str

    def sidecar(self) -> str:
        return (f"lambda_hat = {self.lambda_hat!r}\n"
                f"gamma_effective = {self.gamma_effective!r}\n"
                f"mode = {self.mode}\n")


def _shape_for(op: MeasurementOperator, shape: GridShape | None) -> GridShape:
    shape = shape or GridShape.of(op.N)
    if shape.N != op.N:
        raise DimensionMismatchError(f"grid has N={shape.N}, operator has N={op.N}")
    return shape


def compute_proxy(op: MeasurementOperator, y: np.ndarray, shape: GridShape | None = None) -> GridSignal:
    """Back-project ``y`` with the core block: z = A^T y.

    For an augmented operator, ``y`` may include the mean-row observation;
    it is dropped.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    core = op.core
    if op.has_mean_row and y.size == op.K:
        y = y[1:]
    if y.size != core.shape[0]:
        raise DimensionMismatchError(f"expected {core.shape[0]} observations, got {y.size}")
    return GridSignal(_shape_for(op, shape), core.T @ y)


def projected_mean_subtract(op: MeasurementOperator, y: np.ndarray, gamma: float,
                            shape: GridShape | None = None) -> ProxyResult:
    """Estimate the mean from the all-ones row and remove its projection."""
    if not op.has_mean_row:
        raise ValueError("projected mean subtraction needs an operator with a mean row")
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.size != op.K:
        raise DimensionMismatchError(f"expected {op.K} observations, got {y.size}")
    lam = y[0] / op.N
    core = op.core
    y_tilde = y[1:] - lam * core.sum(axis=1)
    z = GridSignal(_shape_for(op, shape), core.T @ y_tilde)
    return ProxyResult(z, float(lam), gamma - float(lam), "projected_mean")


def oracle_median_offset(f: GridSignal | np.ndarray) -> float:
    """Lower median: the (N/2)-th order statistic."""
    v = f.values if isinstance(f, GridSignal) else np.asarray(f, dtype=np.float64).reshape(-1)
    s = np.sort(v)
    return float(s[(s.size - 1) // 2])


def oracle_median_subtract(op: MeasurementOperator, y: np.ndarray, f_true: GridSignal, gamma: float,
                           shape: GridShape | None = None) -> ProxyResult:
    """Projected subtraction with the true median (ground-truth experiments only)."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    core = op.core
    if op.has_mean_row and y.size == op.K:
        y = y[1:]
    lam = oracle_median_offset(f_true)
    z = GridSignal(_shape_for(op, shape), core.T @ (y - lam * core.sum(axis=1)))
    return ProxyResult(z, lam, gamma - lam, "oracle_median")


def plain_proxy(op: MeasurementOperator, y: np.ndarray, gamma: float,
                shape: GridShape | None = None) -> ProxyResult:
    return ProxyResult(compute_proxy(op, y, shape), 0.0, gamma, "none")
