import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projls.grid import DimensionMismatchError, GridShape, GridSignal
from projls.operators import (
    MeasurementOperator,
    NoiseModel,
    augment_mean_row,
    forward,
    gen_gaussian_operator,
    gen_orthonormal_operator,
    identity_operator,
)
from projls.proxy import (
    compute_proxy,
    oracle_median_offset,
    oracle_median_subtract,
    plain_proxy,
    projected_mean_subtract,
)


def test_identity_proxy_is_y():
    y = np.array([1.0, -2.0, 3.0, 0.5])
    assert np.array_equal(compute_proxy(identity_operator(4), y).values, y)


def test_hand_transpose_multiply():
    a = MeasurementOperator(np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert list(compute_proxy(a, [1.0, -1.0]).values) == [-2.0, -2.0]


def test_unitary_proxy():
    shape = GridShape.of(8, 8)
    f = GridSignal(shape, np.random.default_rng(0).uniform(44, 239, 64))
    op = gen_orthonormal_operator(64, seed=3)
    z = compute_proxy(op, forward(op, f, NoiseModel(), 0), shape)
    assert np.max(np.abs(z.values - f.values)) < 1e-9


def test_mean_row_dropped_and_length_checked():
    op = augment_mean_row(identity_operator(4))
    assert list(compute_proxy(op, [9.0, 1.0, 2.0, 3.0, 4.0]).values) == [1.0, 2.0, 3.0, 4.0]
    assert list(compute_proxy(op, [1.0, 2.0, 3.0, 4.0]).values) == [1.0, 2.0, 3.0, 4.0]
    with pytest.raises(DimensionMismatchError):
        compute_proxy(identity_operator(4), [1.0, 2.0])


def test_constant_signal_mean_recovery():
    shape = GridShape.of(4, 4)
    f = GridSignal(shape, np.full(16, 7.5))
    op = augment_mean_row(gen_gaussian_operator(8, 16, seed=2))
    pr = projected_mean_subtract(op, forward(op, f, NoiseModel(), 0), 10.0, shape)
    assert pr.lambda_hat == pytest.approx(7.5)
    assert np.max(np.abs(pr.z.values)) < 1e-12
    assert pr.gamma_effective == pytest.approx(2.5)


def test_zero_mean_matches_plain():
    f = np.array([1.0, -1.0, 2.0, -2.0])
    op = augment_mean_row(gen_gaussian_operator(3, 4, seed=4))
    y = forward(op, f, NoiseModel(), 0)
    pr = projected_mean_subtract(op, y, 0.0)
    assert pr.lambda_hat == 0.0
    assert np.allclose(pr.z.values, plain_proxy(op, y, 0.0).z.values, atol=0)


def test_noisy_mean_estimate():
    f = np.array([1.0, 2.0, 4.0, 9.0])
    op = augment_mean_row(gen_gaussian_operator(3, 4, seed=4))
    y = forward(op, f, NoiseModel(scale=0.5), seed=9)
    n0 = y[0] - f.sum()
    pr = projected_mean_subtract(op, y, 3.0)
    assert pr.lambda_hat == pytest.approx(f.mean() + n0 / 4, rel=1e-15)
    expect = op.core.T @ (y[1:] - pr.lambda_hat * op.core.sum(axis=1))
    assert np.allclose(pr.z.values, expect, rtol=0, atol=1e-12)


def test_mean_subtract_needs_mean_row():
    with pytest.raises(ValueError):
        projected_mean_subtract(identity_operator(2), [1.0, 2.0], 0.0)


def test_lower_median():
    assert oracle_median_offset(np.array([1.0, 2.0, 3.0, 4.0])) == 2.0
    assert oracle_median_offset(np.full(6, 3.0)) == 3.0


# integer-valued entries keep every subtraction and sum exact in float64
@settings(max_examples=1000, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=20).map(lambda v: v + v[:len(v) % 2]))
def test_median_contraction(vals):
    v = np.array(vals, dtype=np.float64)
    lam = oracle_median_offset(v)
    assert math.fsum(np.abs(v - lam)) <= math.fsum(np.abs(v))


def test_oracle_median_subtract():
    shape = GridShape.of(4)
    f = GridSignal(shape, [1.0, 5.0, 2.0, 8.0])
    op = identity_operator(4)
    pr = oracle_median_subtract(op, f.values, f, 4.0)
    assert pr.lambda_hat == 2.0 and pr.gamma_effective == 2.0
    assert list(pr.z.values) == [-1.0, 3.0, 0.0, 6.0]


def test_sidecar():
    pr = plain_proxy(identity_operator(2), [1.0, 2.0], 1.5)
    assert pr.sidecar() == "lambda_hat = 0.0\ngamma_effective = 1.5\nmode = none\n"
