import numpy as np
import pytest

from projls.grid import GridShape
from projls.phantom import PhantomSpec, make_phantom


def test_ramp_1d():
    f = make_phantom(PhantomSpec("ramp", low=0, high=7), GridShape.of(8))
    assert f.values.tolist() == [float(i) for i in range(8)]


def test_blobs_without_features_is_flat():
    f = make_phantom(PhantomSpec(features=0), GridShape.of(16, 16))
    assert np.all(f.values == 44.0)


def test_default_blobs_inside_fraction():
    f = make_phantom(PhantomSpec(), GridShape.of(64, 64))
    frac = float(np.mean(f.values > 125))
    assert 0.30 <= frac <= 0.55
    assert f.values.min() >= 44 and f.values.max() <= 239


def test_phantom_deterministic_and_seeded():
    shape = GridShape.of(32, 32)
    a = make_phantom(PhantomSpec("steps"), shape).values
    assert np.array_equal(a, make_phantom(PhantomSpec("steps"), shape).values)
    assert not np.array_equal(a, make_phantom(PhantomSpec("steps", seed=1), shape).values)


def test_bad_phantom_options():
    with pytest.raises(ValueError):
        PhantomSpec("stars")
    with pytest.raises(ValueError):
        PhantomSpec(low=5, high=1)
