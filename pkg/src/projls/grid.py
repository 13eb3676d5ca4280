"""Grids, signals, dyadic cells and recursive dyadic partitions.

Pixels are flattened in row-major (C) order everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np


class DimensionMismatchError(ValueError):
    pass


class InvariantViolationError(ValueError):
    pass


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridShape:
    sides: tuple[int, ...]

    def __post_init__(self):
        sides = tuple(int(s) for s in self.sides)
        object.__setattr__(self, "sides", sides)
        if len(sides) not in (1, 2):
            raise ValueError(f"only 1-D and 2-D grids are supported, got d={len(sides)}")
        for s in sides:
            if not _is_pow2(s):
                raise ValueError(f"grid side {s} is not a power of two")

    @classmethod
    def of(cls, *sides: int) -> "GridShape":
        return cls(tuple(sides))

    @classmethod
    def parse(cls, text: str) -> "GridShape":
        """Parse ``"64x64"`` or ``"16"``."""
        return cls(tuple(int(p) for p in text.lower().replace("×", "x").split("x")))

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def N(self) -> int:
        return int(np.prod(self.sides))

    @property
    def levels(self) -> tuple[int, ...]:
        """Maximum dyadic level per dimension (log2 of each side)."""
        return tuple(s.bit_length() - 1 for s in self.sides)

    def __str__(self):
        return "x".join(str(s) for s in self.sides)


@dataclass(frozen=True, eq=False)
class GridSignal:
    shape: GridShape
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.shape.N:
            raise DimensionMismatchError(f"expected {self.shape.N} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("signal values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        return self.values.reshape(self.shape.sides)


@dataclass(frozen=True, eq=False)
class LevelSetMask:
    shape: GridShape
    inside: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.inside, dtype=bool).reshape(-1)
        if m.size != self.shape.N:
            raise DimensionMismatchError(f"expected {self.shape.N} mask entries, got {m.size}")
        object.__setattr__(self, "inside", m)

    @property
    def grid(self) -> np.ndarray:
        return self.inside.reshape(self.shape.sides)

    def __eq__(self, other):
        if not isinstance(other, LevelSetMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.inside, other.inside))

    __hash__ = None


@dataclass(frozen=True)
class DyadicCell:
    """Per-dimension (level, index) pairs; level 0 is the whole extent."""

    levels: tuple[int, ...]
    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.indices):
            raise ValueError("levels and indices must have the same length")
        for lv, ix in zip(self.levels, self.indices):
            if lv < 0 or ix < 0 or ix >= (1 << lv):
                raise ValueError(f"invalid dyadic pair (level={lv}, index={ix})")

    @classmethod
    def root(cls, d: int) -> "DyadicCell":
        return cls((0,) * d, (0,) * d)

    @property
    def depth(self) -> int:
        return sum(self.levels)

    def check(self, shape: GridShape) -> None:
        if len(self.levels) != shape.d:
            raise DimensionMismatchError(f"cell has {len(self.levels)} dims, grid has {shape.d}")
        for lv, cap in zip(self.levels, shape.levels):
            if lv > cap:
                raise DimensionMismatchError(f"cell level {lv} exceeds grid level {cap}")

    def ranges(self, shape: GridShape) -> tuple[tuple[int, int], ...]:
        """Half-open pixel range per dimension."""
        self.check(shape)
        out = []
        for lv, ix, side in zip(self.levels, self.indices, shape.sides):
            w = side >> lv
            out.append((ix * w, (ix + 1) * w))
        return tuple(out)

    def slices(self, shape: GridShape) -> tuple[slice, ...]:
        return tuple(slice(a, b) for a, b in self.ranges(shape))

    def size(self, shape: GridShape) -> int:
        return int(np.prod([b - a for a, b in self.ranges(shape)]))

    def children(self, dim: int) -> tuple["DyadicCell", "DyadicCell"]:
        lv = list(self.levels)
        ix = list(self.indices)
        lv[dim] += 1
        ix[dim] *= 2
        left = DyadicCell(tuple(lv), tuple(ix))
        ix[dim] += 1
        return left, DyadicCell(tuple(lv), tuple(ix))


def cell_pixels(cell: DyadicCell, shape: GridShape) -> np.ndarray:
    """Flat row-major pixel indices covered by ``cell``."""
    return np.arange(shape.N).reshape(shape.sides)[cell.slices(shape)].ravel()


@dataclass(frozen=True)
class Leaf:
    cell: DyadicCell
    inside: bool


@dataclass(frozen=True)
class Split:
    cell: DyadicCell
    dim: int
    children: tuple["Node", "Node"]


Node = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class PartitionEstimate:
    """A recursive dyadic partition with binary leaf labels.

    ``objective`` is filled in by the fitting routines (penalized empirical
    risk of this tree); it is NaN for hand-built trees.
    """

    shape: GridShape
    root: Node
    objective: float = float("nan")
    cells_visited: int = field(default=0, compare=False)

    def leaves(self) -> Iterator[Leaf]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.extend(reversed(node.children))

    @property
    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    def validate(self) -> None:
        if self.root.cell != DyadicCell.root(self.shape.d):
            raise InvariantViolationError("root node must be the whole grid")
        stack = [self.root]
        while stack:
            node = stack.pop()
            node.cell.check(self.shape)
            if isinstance(node, Split):
                if not 0 <= node.dim < self.shape.d:
                    raise InvariantViolationError(f"bad split dimension {node.dim}")
                expect = node.cell.children(node.dim)
                got = tuple(c.cell for c in node.children)
                if got != expect:
                    raise InvariantViolationError(f"children {got} do not halve {node.cell}")
                stack.extend(node.children)
        cover = np.zeros(self.shape.sides, dtype=np.int64)
        for leaf in self.leaves():
            cover[leaf.cell.slices(self.shape)] += 1
        if not np.all(cover == 1):
            raise InvariantViolationError("leaves do not tile the grid exactly once")

    def preorder(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Split):
                stack.extend(reversed(node.children))


def partition_to_mask(est: PartitionEstimate) -> LevelSetMask:
    est.validate()
    grid = np.zeros(est.shape.sides, dtype=bool)
    for leaf in est.leaves():
        if leaf.inside:
            grid[leaf.cell.slices(est.shape)] = True
    return LevelSetMask(est.shape, grid.ravel())


def pixel_partition(shape: GridShape, inside: Sequence[bool] | np.ndarray) -> PartitionEstimate:
    """Partition with one leaf per pixel, labelled by ``inside``."""
    labels = np.asarray(inside, dtype=bool).reshape(shape.sides)
    caps = shape.levels

    def build(cell: DyadicCell) -> Node:
        for dim in range(shape.d):
            if cell.levels[dim] < caps[dim]:
                kids = cell.children(dim)
                return Split(cell, dim, (build(kids[0]), build(kids[1])))
        pix = tuple(a for a, _ in cell.ranges(shape))
        return Leaf(cell, bool(labels[pix]))

    return PartitionEstimate(shape, build(DyadicCell.root(shape.d)))


def count_dyadic_cells(shape: GridShape, max_level: Sequence[int] | None = None) -> int:
    """Number of dyadic rectangles with per-dimension level <= max_level."""
    caps = shape.levels if max_level is None else tuple(max_level)
    return int(np.prod([(1 << (c + 1)) - 1 for c in caps]))


def tree_dump(est: PartitionEstimate) -> str:
    """Preorder text dump: one line per node with cell, action and label."""
    lines = []
    for node in est.preorder():
        cell = node.cell
        where = " ".join(f"{lv}:{ix}" for lv, ix in zip(cell.levels, cell.indices))
        if isinstance(node, Leaf):
            lines.append(f"{where} leaf {'in' if node.inside else 'out'}")
        else:
            lines.append(f"{where} split {node.dim}")
    return "\n".join(lines) + "\n"
