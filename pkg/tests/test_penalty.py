import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projls.grid import DyadicCell, GridShape, Leaf, PartitionEstimate, Split, cell_pixels, pixel_partition
from projls.operators import MeasurementOperator, gen_gaussian_operator, identity_operator
from projls.penalty import (
    PenaltyParams,
    bits,
    build_row_sats,
    gram_sum,
    kraft_sum,
    leaf_penalty,
    partition_penalty,
)

from oracles import all_cells, gram_double_loop


def test_bits():
    assert bits(0, 2) == 1
    assert bits(3, 2) == 10
    assert bits(2, 1) == 5
    with pytest.raises(ValueError):
        bits(-1, 2)


def test_leaf_penalty_direct_formula():
    # tau/N * sqrt((ln 32 + ln 2) * 16 / (2 * 0.5)); N = 16, G_L = 16
    p = PenaltyParams(delta=1 / 16, c=0.5, c_s=1.0, tau=1.0)
    phi = leaf_penalty(16.0, 0, p, N=16, d=2)
    assert phi == pytest.approx(0.5098334950844045, rel=1e-15)
    assert phi == pytest.approx(math.sqrt(math.log(64) * 16) / 16, rel=1e-15)


def test_leaf_penalty_zeros():
    assert leaf_penalty(5.0, 2, PenaltyParams(0.1, c_s=0.0), 16, 2) == 0.0
    assert leaf_penalty(0.0, 2, PenaltyParams(0.1), 16, 2) == 0.0
    assert leaf_penalty(5.0, 2, PenaltyParams(0.1, tau=0.0), 16, 2) == 0.0


def test_penalty_scales_linearly():
    p = PenaltyParams(0.01, c_s=2.0, tau=1.0)
    base = leaf_penalty(3.0, 4, p, 64, 2)
    assert leaf_penalty(3.0, 4, p.with_tau(2.5), 64, 2) == pytest.approx(2.5 * base)
    assert leaf_penalty(3.0, 4, PenaltyParams(0.01, c_s=6.0), 64, 2) == pytest.approx(3 * base)
    assert leaf_penalty(12.0, 4, p, 64, 2) == pytest.approx(2 * base)


def test_penalty_params_validation():
    with pytest.raises(ValueError):
        PenaltyParams(delta=0.0)
    with pytest.raises(ValueError):
        PenaltyParams(delta=0.1, c=0.0)
    assert PenaltyParams.default(1024, 1.0).delta == 1 / 1024


def test_rect_sums_identity_and_ones():
    shape = GridShape.of(4, 4)
    sats = build_row_sats(identity_operator(16), shape)
    ones = build_row_sats(MeasurementOperator(np.ones((1, 16))), shape)
    for cell in all_cells(shape):
        pix = set(cell_pixels(cell, shape))
        s = sats.rect_sums(cell)
        assert all(s[k] == (1.0 if k in pix else 0.0) for k in range(16))
        assert ones.rect_sums(cell)[0] == len(pix)
        assert gram_sum(sats, cell) == len(pix)


def test_rect_sums_vs_direct():
    a = np.random.default_rng(1).normal(size=(3, 4))
    shape = GridShape.of(4)
    sats = build_row_sats(MeasurementOperator(a), shape)
    for cell in all_cells(shape):
        assert np.allclose(sats.rect_sums(cell), a[:, cell_pixels(cell, shape)].sum(axis=1), atol=1e-12)


def test_single_pixel_gram_is_one():
    shape = GridShape.of(4, 2)
    sats = build_row_sats(gen_gaussian_operator(5, 8, seed=2), shape)
    for cell in all_cells(shape):
        if cell.size(shape) == 1:
            assert gram_sum(sats, cell) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([(8,), (4, 2), (2, 4), (4, 4)]), st.integers(1, 6), st.integers(0, 10_000),
       st.integers(1, 4))
def test_gram_double_loop(sides, K, seed, chunk):
    shape = GridShape(sides)
    op = gen_gaussian_operator(K, shape.N, seed)
    sats = build_row_sats(op, shape, chunk=chunk)
    for cell in all_cells(shape):
        ref = gram_double_loop(op.matrix, cell_pixels(cell, shape))
        assert gram_sum(sats, cell) == pytest.approx(ref, abs=1e-9)
        tab = sats.gram_table(cell.levels)
        assert tab[cell.indices] == pytest.approx(ref, abs=1e-9)


def test_gram_of_sum_of_cells():
    # G_{L1 u L2} = G_L1 + G_L2 + 2 <A 1_L1, A 1_L2>
    shape = GridShape.of(8, 8)
    sats = build_row_sats(gen_gaussian_operator(16, 64, seed=5), shape)
    parent = DyadicCell((1, 2), (1, 3))
    a, b = parent.children(0)
    cross = sats.rect_sums(a) @ sats.rect_sums(b)
    assert gram_sum(sats, parent) == pytest.approx(gram_sum(sats, a) + gram_sum(sats, b) + 2 * cross)


def test_partition_penalty_additive():
    shape = GridShape.of(4, 4)
    sats = build_row_sats(gen_gaussian_operator(8, 16, seed=3), shape)
    p = PenaltyParams(1 / 16)
    root = DyadicCell.root(2)
    single = PartitionEstimate(shape, Leaf(root, True))
    assert partition_penalty(single, sats, p) == pytest.approx(leaf_penalty(gram_sum(sats, root), 0, p, 16, 2))
    assert partition_penalty(single, sats, p.with_tau(0.0)) == 0.0
    a, b = root.children(1)
    two = PartitionEstimate(shape, Split(root, 1, (Leaf(a, True), Leaf(b, False))))
    expect = sum(leaf_penalty(gram_sum(sats, c), 1, p, 16, 2) for c in (a, b))
    assert partition_penalty(two, sats, p) == pytest.approx(expect)


def test_kraft_inequality():
    rng = np.random.default_rng(0)
    for shape in (GridShape.of(4, 4), GridShape.of(16), GridShape.of(8, 2)):
        assert kraft_sum(pixel_partition(shape, rng.random(shape.N) < 0.5)) <= 1.0
        assert kraft_sum(PartitionEstimate(shape, Leaf(DyadicCell.root(shape.d), True))) == 0.5
