"""Penalized empirical-risk minimization over recursive dyadic partitions.

``fit`` solves the problem exactly with a bottom-up dynamic program over all
dyadic cells.  Cells sharing a per-dimension level vector form one stratum
and are processed together as arrays; strata are visited in decreasing total
depth so every child is final before its parent.

Tie-breaking is fixed: a leaf beats a split of equal cost, a lower split
dimension beats a higher one, and an exact vote tie labels the leaf outside.
Costs within a relative ``TIE_RTOL`` count as equal, since the same partition
reached through different split orders only differs by rounding.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .grid import (
    DyadicCell,
    GridShape,
    GridSignal,
    Leaf,
    Node,
    PartitionEstimate,
    Split,
    cell_pixels,
    count_dyadic_cells,
    partition_to_mask,
)
from .metrics import excess_risk
from .penalty import PenaltyParams, RowSATs, gram_sum, leaf_penalty

FREE = "free_orientation"
SQUARE = "square_only"

LEAF = 0
QUAD = 3  # split every splittable dimension at once (square_only)

TIE_RTOL = 1e-12


@dataclass(frozen=True)
class FitConfig:
    gamma: float
    params: PenaltyParams
    max_level: tuple[int, ...] | None = None
    tree_family: str = FREE

    def __post_init__(self):
        if self.tree_family not in (FREE, SQUARE):
            raise ValueError(f"unknown tree family {self.tree_family!r}")

    def caps(self, shape: GridShape) -> tuple[int, ...]:
        if self.max_level is None:
            return shape.levels
        caps = tuple(int(c) for c in self.max_level)
        if len(caps) != shape.d or any(c < 0 or c > m for c, m in zip(caps, shape.levels)):
            raise ValueError(f"max_level {caps} exceeds grid depth {shape.levels}")
        return caps

    def with_tau(self, tau: float) -> "FitConfig":
        return FitConfig(self.gamma, self.params.with_tau(tau), self.max_level, self.tree_family)


def leaf_vote(z: GridSignal, cell: DyadicCell, gamma: float) -> tuple[bool, float]:
    """Majority-style vote on one cell: (inside?, leaf empirical risk)."""
    gap = math.fsum(gamma - z.values[cell_pixels(cell, z.shape)])
    return gap < 0, -abs(gap) / z.shape.N


def _padded_sat(grid: np.ndarray) -> np.ndarray:
    out = np.zeros(tuple(s + 1 for s in grid.shape))
    block = grid
    for ax in range(grid.ndim):
        block = np.cumsum(block, axis=ax)
    out[(slice(1, None),) * grid.ndim] = block
    return out


def _block_sums(sat: np.ndarray, sides: tuple[int, ...], levels: tuple[int, ...]) -> np.ndarray:
    c = sat[tuple(slice(None, None, s >> lv) for s, lv in zip(sides, levels))]
    for ax in range(len(sides)):
        c = np.diff(c, axis=ax)
    return c


def _pair_sum(a: np.ndarray, dim: int) -> np.ndarray:
    lo = [slice(None)] * a.ndim
    hi = [slice(None)] * a.ndim
    lo[dim] = slice(0, None, 2)
    hi[dim] = slice(1, None, 2)
    return a[tuple(lo)] + a[tuple(hi)]


def _strictly_below(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a < b - TIE_RTOL * (1.0 + np.abs(b))


def _strata(caps: tuple[int, ...], family: str) -> list[tuple[int, ...]]:
    if family == FREE:
        return sorted(itertools.product(*(range(c + 1) for c in caps)), key=sum, reverse=True)
    out = []
    for lv in range(max(caps), -1, -1):
        s = tuple(min(lv, c) for c in caps)
        if s not in out:
            out.append(s)
    return out


def fit(z: GridSignal, cfg: FitConfig, sats: RowSATs) -> PartitionEstimate:
    """Exact minimizer of empirical risk + tau * penalty over the tree family."""
    shape = z.shape
    if sats.shape != shape:
        raise ValueError(f"penalty tables are for {sats.shape}, signal is {shape}")
    caps = cfg.caps(shape)
    N, d = shape.N, shape.d
    sat = _padded_sat((cfg.gamma - z.values).reshape(shape.sides))

    tables: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    visited = 0
    for lv in _strata(caps, cfg.tree_family):
        gap = _block_sums(sat, shape.sides, lv)
        inside = gap < 0
        phi = leaf_penalty(sats.gram_table(lv), sum(lv), cfg.params, N, d)
        cost = -np.abs(gap) / N + phi
        action = np.zeros(cost.shape, dtype=np.int8)
        if cfg.tree_family == FREE:
            for dim in range(d):
                if lv[dim] < caps[dim]:
                    child = tables[lv[:dim] + (lv[dim] + 1,) + lv[dim + 1:]][0]
                    split = _pair_sum(child, dim)
                    better = _strictly_below(split, cost)
                    cost = np.where(better, split, cost)
                    action[better] = dim + 1
        else:
            dims = [k for k in range(d) if lv[k] < caps[k]]
            if dims:
                split = tables[tuple(l + 1 if k in dims else l for k, l in enumerate(lv))][0]
                for dim in dims:
                    split = _pair_sum(split, dim)
                better = _strictly_below(split, cost)
                cost = np.where(better, split, cost)
                action[better] = QUAD
        tables[lv] = (cost, action, inside)
        visited += cost.size

    def build(cell: DyadicCell) -> Node:
        _, action, inside = tables[cell.levels]
        act = int(action[cell.indices])
        if act == LEAF:
            return Leaf(cell, bool(inside[cell.indices]))
        if act == QUAD:
            dims = [k for k in range(d) if cell.levels[k] < caps[k]]
            return _quad(cell, dims, build)
        dim = act - 1
        left, right = cell.children(dim)
        return Split(cell, dim, (build(left), build(right)))

    root = DyadicCell.root(d)
    root_cost = float(tables[root.levels][0][root.indices])
    return PartitionEstimate(shape, build(root), objective=root_cost, cells_visited=visited)


def _quad(cell: DyadicCell, dims: Sequence[int], build) -> Node:
    if not dims:
        return build(cell)
    kids = cell.children(dims[0])
    return Split(cell, dims[0], tuple(_quad(k, dims[1:], build) for k in kids))


def objective(est: PartitionEstimate, z: GridSignal, cfg: FitConfig, sats: RowSATs) -> float:
    """Penalized empirical risk of a given tree, evaluated leaf by leaf."""
    shape = est.shape
    total = []
    for leaf in est.leaves():
        gap = math.fsum(cfg.gamma - z.values[cell_pixels(leaf.cell, shape)])
        sign = 1.0 if leaf.inside else -1.0
        total.append(sign * gap / shape.N)
        total.append(leaf_penalty(gram_sum(sats, leaf.cell), leaf.cell.depth, cfg.params,
                                  shape.N, shape.d))
    return math.fsum(total)


# exhaustive oracle ------------------------------------------------------------

_MAX_PARTITIONS = 250_000


def _count_trees(shape: GridShape, caps, family) -> int:
    memo: dict[tuple[int, ...], int] = {}

    def count(lv):
        if lv in memo:
            return memo[lv]
        n = 1
        if family == FREE:
            for dim in range(shape.d):
                if lv[dim] < caps[dim]:
                    n += count(lv[:dim] + (lv[dim] + 1,) + lv[dim + 1:]) ** 2
        else:
            dims = [k for k in range(shape.d) if lv[k] < caps[k]]
            if dims:
                n += count(tuple(l + 1 if k in dims else l for k, l in enumerate(lv))) ** (2 ** len(dims))
        memo[lv] = n
        return n

    return count((0,) * shape.d)


def _enumerate(cell: DyadicCell, caps, family, memo) -> list[tuple[tuple[int, ...], tuple[DyadicCell, ...]]]:
    """Every partition of ``cell`` as (preorder action key, leaf cells)."""
    if cell in memo:
        return memo[cell]
    out = [((LEAF,), (cell,))]
    d = len(caps)
    if family == FREE:
        for dim in range(d):
            if cell.levels[dim] < caps[dim]:
                lo, hi = cell.children(dim)
                for (kl, ll), (kh, lh) in itertools.product(_enumerate(lo, caps, family, memo),
                                                            _enumerate(hi, caps, family, memo)):
                    out.append(((dim + 1,) + kl + kh, ll + lh))
    else:
        dims = [k for k in range(d) if cell.levels[k] < caps[k]]
        if dims:
            kids = [cell]
            for dim in dims:
                kids = [c for k in kids for c in k.children(dim)]
            parts = [_enumerate(k, caps, family, memo) for k in kids]
            for combo in itertools.product(*parts):
                key = (QUAD,) + tuple(t for k, _ in combo for t in k)
                out.append((key, tuple(c for _, ls in combo for c in ls)))
    memo[cell] = out
    return out


@functools.lru_cache(maxsize=16)
def _partition_table(shape: GridShape, caps: tuple[int, ...], family: str):
    """Sorted partition keys, the cells they use, and a partition x cell incidence matrix."""
    parts = _enumerate(DyadicCell.root(shape.d), caps, family, {})
    parts.sort(key=lambda p: p[0])
    cells = sorted({c for _, leaves in parts for c in leaves}, key=lambda c: (c.levels, c.indices))
    col = {c: i for i, c in enumerate(cells)}
    rows = np.repeat(np.arange(len(parts)), [len(leaves) for _, leaves in parts])
    cols = np.fromiter((col[c] for _, leaves in parts for c in leaves), dtype=np.int64)
    incidence = sparse.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(len(parts), len(cells)))
    return [k for k, _ in parts], cells, incidence


def brute_force_fit(z: GridSignal, cfg: FitConfig, sats: RowSATs) -> PartitionEstimate:
    """Exhaustive search over every partition in the tree family (N <= 64).

    The objective is additive over leaves, so each leaf takes the cheaper of
    its two labels; that equals enumerating all labelings.  Among partitions
    within rounding of the optimum the one whose preorder action sequence is
    lexicographically smallest wins, which reproduces ``fit``'s tie-breaking.
    """
    shape = z.shape
    if shape.N > 64:
        raise ValueError("brute_force_fit is limited to N <= 64")
    caps = cfg.caps(shape)
    n_trees = _count_trees(shape, caps, cfg.tree_family)
    if n_trees > _MAX_PARTITIONS:
        raise ValueError(f"{n_trees} partitions is too many to enumerate")

    keys, cells, incidence = _partition_table(shape, caps, cfg.tree_family)
    leaf_cost: dict[DyadicCell, tuple[float, bool]] = {}
    for cell in cells:
        gap = math.fsum(cfg.gamma - z.values[cell_pixels(cell, shape)])
        phi = leaf_penalty(gram_sum(sats, cell), cell.depth, cfg.params, shape.N, shape.d)
        cost_in = gap / shape.N + phi
        cost_out = -gap / shape.N + phi
        leaf_cost[cell] = (cost_in, True) if cost_in < cost_out else (cost_out, False)

    totals = incidence @ np.array([leaf_cost[c][0] for c in cells])
    best = totals.min()
    pick = int(np.flatnonzero(totals <= best + TIE_RTOL * (1.0 + abs(best)))[0])
    key = keys[pick]

    tokens = iter(key)

    def decode(cell: DyadicCell) -> Node:
        act = next(tokens)
        if act == LEAF:
            return Leaf(cell, leaf_cost[cell][1])
        if act == QUAD:
            dims = [k for k in range(shape.d) if cell.levels[k] < caps[k]]
            return _quad(cell, dims, decode)
        lo, hi = cell.children(act - 1)
        return Split(cell, act - 1, (decode(lo), decode(hi)))

    root = decode(DyadicCell.root(shape.d))
    return PartitionEstimate(shape, root, objective=float(totals[pick]), cells_visited=len(leaf_cost))


def oracle_tau_search(z: GridSignal, cfg: FitConfig, sats: RowSATs, f_true: GridSignal,
                      gamma_true: float, tau_grid: Sequence[float]) -> tuple[float, PartitionEstimate]:
    """Penalty scale minimizing the true excess risk over a grid (smallest tau on ties)."""
    grid = sorted(float(t) for t in tau_grid)
    if not grid:
        raise ValueError("tau grid is empty")
    best = None
    for tau in grid:
        est = fit(z, cfg.with_tau(tau), sats)
        err = excess_risk(partition_to_mask(est), f_true, gamma_true)
        if best is None or err < best[0]:
            best = (err, tau, est)
    return best[1], best[2]


def dyadic_cell_count(shape: GridShape, cfg: FitConfig) -> int:
    """Cells the DP visits for ``cfg`` (all dyadic rectangles in free mode)."""
    caps = cfg.caps(shape)
    if cfg.tree_family == FREE:
        return count_dyadic_cells(shape, caps)
    return sum(int(np.prod([1 << l for l in lv])) for lv in _strata(caps, SQUARE))
