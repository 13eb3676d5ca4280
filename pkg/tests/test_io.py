import numpy as np
import pytest

from projls import io as pio
from projls.grid import GridShape, GridSignal, LevelSetMask
from projls.operators import augment_mean_row, gen_gaussian_operator


def test_signal_roundtrip(tmp_path):
    for shape in (GridShape.of(8, 4), GridShape.of(16)):
        sig = GridSignal(shape, np.random.default_rng(0).normal(size=shape.N))
        pio.write_signal(tmp_path / "s.pls", sig)
        back = pio.read_signal(tmp_path / "s.pls")
        assert back.shape == shape and np.array_equal(back.values, sig.values)


def test_signal_layout():
    buf = pio.signal_bytes(GridSignal(GridShape.of(2, 1), [1.0, 2.0]))
    assert buf[:4] == b"PLS1"
    assert buf[4:16] == bytes([2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0])
    assert np.frombuffer(buf[16:], "<f8").tolist() == [1.0, 2.0]
    with pytest.raises(pio.FormatError):
        pio.signal_from_bytes(buf[:-1])
    with pytest.raises(pio.FormatError):
        pio.signal_from_bytes(b"XXXX" + buf[4:])


def test_vector_roundtrip(tmp_path):
    v = np.arange(13.0)
    pio.write_vector(tmp_path / "y.pls", v)
    assert np.array_equal(pio.read_vector(tmp_path / "y.pls"), v)


def test_operator_roundtrip(tmp_path):
    op = augment_mean_row(gen_gaussian_operator(5, 8, seed=1))
    pio.write_operator(tmp_path / "a.plsa", op)
    back = pio.read_operator(tmp_path / "a.plsa")
    assert back.has_mean_row and np.array_equal(back.matrix, op.matrix)


@pytest.mark.parametrize("sides", [(4, 4), (8, 16), (16, 8), (2, 4), (16,)])
def test_mask_roundtrip(tmp_path, sides):
    shape = GridShape(sides)
    mask = LevelSetMask(shape, np.random.default_rng(1).random(shape.N) < 0.5)
    pio.write_mask(tmp_path / "m", mask)
    back = pio.read_mask(tmp_path / "m")
    assert np.array_equal(back.inside, mask.inside) and back.shape.N == shape.N


def test_pbm_polarity(tmp_path):
    shape = GridShape.of(1, 8)
    pio.write_mask(tmp_path / "m.pbm", LevelSetMask(shape, [1, 0, 0, 0, 0, 0, 0, 1]))
    assert (tmp_path / "m.pbm").read_bytes() == b"P4\n8 1\n" + bytes([0b01111110])


def test_pgm_scaling(tmp_path):
    pio.write_pgm(tmp_path / "p.pgm", GridSignal(GridShape.of(1, 4), [0.0, 1.0, 2.0, 4.0]))
    assert (tmp_path / "p.pgm").read_bytes() == b"P5\n4 1\n255\n" + bytes([0, 64, 128, 255])
