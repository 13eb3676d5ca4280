"""Per-leaf penalty: prefix-code lengths, Gram sums and the penalty formula.

The Gram sum of a cell L is ``G_L = sum_{i,j in L} <A_i, A_j> = ||A 1_L||^2``.
Row k of ``A 1_L`` is a rectangle sum of row k of A laid out on the grid, so
one summed-area table per operator row answers any cell in O(K).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import DimensionMismatchError, DyadicCell, GridShape, PartitionEstimate
from .operators import MeasurementOperator


def bits(depth: int, d: int) -> int:
    """Prefix-code length j*(log2 d + 2) + 1 of a depth-j leaf."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    return depth * ((d - 1) + 2) + 1  # log2(d) == d - 1 for d in {1, 2}


@dataclass(frozen=True)
class PenaltyParams:
    delta: float
    c: float = 0.5
    c_s: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta <= 0.5:
            raise ValueError("delta must lie in (0, 1/2]")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.c_s < 0 or self.tau < 0:
            raise ValueError("c_s and tau must be nonnegative")

    @classmethod
    def default(cls, N: int, c_s: float, tau: float = 1.0) -> "PenaltyParams":
        return cls(delta=min(0.5, 1.0 / N), c=0.5, c_s=c_s, tau=tau)

    def with_tau(self, tau: float) -> "PenaltyParams":
        return PenaltyParams(self.delta, self.c, self.c_s, tau)


def leaf_penalty(gram, depth, params: PenaltyParams, N: int, d: int):
    """tau/N * sqrt([ln(2/delta) + bits*ln 2] * c_s^2 * G_L / (2c)).

    Vectorized over ``gram`` (and ``depth``).
    """
    b = np.asarray(depth) * ((d - 1) + 2) + 1
    conf = math.log(2.0 / params.delta) + b * math.log(2.0)
    g = np.maximum(np.asarray(gram, dtype=np.float64), 0.0)
    out = params.tau / N * np.sqrt(conf * params.c_s ** 2 * g / (2.0 * params.c))
    return float(out) if np.ndim(out) == 0 else out


class RowSATs:
    """Zero-padded inclusive summed-area table for every operator row.

    ``table[k]`` has shape ``[s + 1 for s in sides]``; the entry at the full
    extent equals the row sum of row k.  Tables are built and queried in row
    chunks to bound temporary memory.
    """

    def __init__(self, op: MeasurementOperator, shape: GridShape, chunk: int = 256,
                 dtype=np.float64):
        if op.N != shape.N:
            raise DimensionMismatchError(f"operator has N={op.N}, grid has N={shape.N}")
        self.shape = shape
        self.chunk = chunk
        core = op.core
        K = core.shape[0]
        pad = tuple(s + 1 for s in shape.sides)
        self.table = np.zeros((K,) + pad, dtype=dtype)
        inner = (slice(None),) + (slice(1, None),) * shape.d
        for start in range(0, K, chunk):
            rows = core[start:start + chunk].reshape((-1,) + shape.sides)
            block = rows
            for ax in range(1, shape.d + 1):
                block = np.cumsum(block, axis=ax)
            self.table[start:start + chunk][inner] = block
        self._gram: dict[tuple[int, ...], np.ndarray] = {}

    @property
    def K(self) -> int:
        return self.table.shape[0]

    def rect_sums(self, cell: DyadicCell) -> np.ndarray:
        """Vector ``A 1_L`` (length K) via inclusion-exclusion on the corners."""
        cell.check(self.shape)
        (a0, b0), *rest = cell.ranges(self.shape)
        t = self.table
        if not rest:
            return t[:, b0] - t[:, a0]
        (a1, b1), = rest
        return t[:, b0, b1] - t[:, a0, b1] - t[:, b0, a1] + t[:, a0, a1]

    def gram_table(self, levels: tuple[int, ...]) -> np.ndarray:
        """G_L for every cell at the given per-dimension levels (cached).

        Returns an array of shape ``(2**l0, 2**l1, ...)``.
        """
        levels = tuple(levels)
        hit = self._gram.get(levels)
        if hit is not None:
            return hit
        steps = tuple(s >> lv for s, lv in zip(self.shape.sides, levels))
        corner = (slice(None),) + tuple(slice(None, None, h) for h in steps)
        out = np.zeros(tuple(1 << lv for lv in levels))
        for start in range(0, self.K, self.chunk):
            c = self.table[start:start + self.chunk][corner]
            for ax in range(1, self.shape.d + 1):
                c = np.diff(c, axis=ax)
            out += np.einsum("k...,k...->...", c, c)
        self._gram[levels] = out
        return out


def build_row_sats(op: MeasurementOperator, shape: GridShape, **kwargs) -> RowSATs:
    return RowSATs(op, shape, **kwargs)


def gram_sum(sats: RowSATs, cell: DyadicCell) -> float:
    s = sats.rect_sums(cell)
    return float(s @ s)


def partition_penalty(est: PartitionEstimate, sats: RowSATs, params: PenaltyParams) -> float:
    shape = est.shape
    return math.fsum(
        leaf_penalty(gram_sum(sats, leaf.cell), leaf.cell.depth, params, shape.N, shape.d)
        for leaf in est.leaves()
    )


def kraft_sum(est: PartitionEstimate) -> float:
    return math.fsum(2.0 ** -bits(leaf.cell.depth, est.shape.d) for leaf in est.leaves())
