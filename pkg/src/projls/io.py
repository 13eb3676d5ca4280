"""Binary file formats.

PLS1 signal: b"PLS1", u32 d, d x u32 sides, N x f64 (all little-endian, row-major).
PLSA operator: b"PLSA", u32 K, u32 N, u8 has_mean_row, K*N x f64 row-major.
Masks: binary PBM (P4) for 2-D grids, PLS1 with 0/1 values for 1-D.
Previews: 8-bit binary PGM (P5), min-max scaled.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import GridShape, GridSignal, LevelSetMask
from .operators import MeasurementOperator

SIGNAL_MAGIC = b"PLS1"
OPERATOR_MAGIC = b"PLSA"


class FormatError(ValueError):
    pass


def signal_bytes(sig: GridSignal) -> bytes:
    head = SIGNAL_MAGIC + struct.pack("<I", sig.shape.d) + struct.pack(f"<{sig.shape.d}I", *sig.shape.sides)
    return head + sig.values.astype("<f8").tobytes()


def signal_from_bytes(buf: bytes) -> GridSignal:
    if buf[:4] != SIGNAL_MAGIC:
        raise FormatError("not a PLS1 signal")
    (d,) = struct.unpack_from("<I", buf, 4)
    sides = struct.unpack_from(f"<{d}I", buf, 8)
    off = 8 + 4 * d
    shape = GridShape(tuple(sides))
    body = buf[off:]
    if len(body) != 8 * shape.N:
        raise FormatError(f"expected {8 * shape.N} payload bytes, found {len(body)}")
    return GridSignal(shape, np.frombuffer(body, dtype="<f8").astype(np.float64))


def write_signal(path, sig: GridSignal) -> None:
    Path(path).write_bytes(signal_bytes(sig))


def read_signal(path) -> GridSignal:
    return signal_from_bytes(Path(path).read_bytes())


def write_vector(path, v: np.ndarray) -> None:
    """Observation vectors are stored as 1-D PLS1 files of their own length."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    head = SIGNAL_MAGIC + struct.pack("<II", 1, v.size)
    Path(path).write_bytes(head + v.astype("<f8").tobytes())


def read_vector(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if buf[:4] != SIGNAL_MAGIC:
        raise FormatError("not a PLS1 file")
    (d,) = struct.unpack_from("<I", buf, 4)
    sides = struct.unpack_from(f"<{d}I", buf, 8)
    body = buf[8 + 4 * d:]
    n = int(np.prod(sides))
    if len(body) != 8 * n:
        raise FormatError("truncated PLS1 payload")
    return np.frombuffer(body, dtype="<f8").astype(np.float64)


def write_operator(path, op: MeasurementOperator) -> None:
    head = OPERATOR_MAGIC + struct.pack("<IIB", op.K, op.N, int(op.has_mean_row))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(op.matrix, dtype="<f8").tobytes())


def read_operator(path) -> MeasurementOperator:
    buf = Path(path).read_bytes()
    if buf[:4] != OPERATOR_MAGIC:
        raise FormatError("not a PLSA operator")
    K, N, flag = struct.unpack_from("<IIB", buf, 4)
    body = buf[13:]
    if len(body) != 8 * K * N:
        raise FormatError("truncated PLSA payload")
    mat = np.frombuffer(body, dtype="<f8").reshape(K, N).astype(np.float64)
    return MeasurementOperator(mat, has_mean_row=bool(flag))


def _pbm_bytes(mask: LevelSetMask) -> bytes:
    rows, cols = mask.shape.sides
    # PBM: 1 = black; inside pixels are written as white (0)
    packed = np.packbits(~mask.grid, axis=1)
    return f"P4\n{cols} {rows}\n".encode() + packed.tobytes()


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    while True:
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while buf[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        break
    start = pos
    while pos < len(buf) and not buf[pos:pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def _pbm_from_bytes(buf: bytes) -> LevelSetMask:
    magic, pos = _read_token(buf, 0)
    if magic != b"P4":
        raise FormatError("not a binary PBM")
    cols, pos = _read_token(buf, pos)
    rows, pos = _read_token(buf, pos)
    cols, rows = int(cols), int(rows)
    data = np.frombuffer(buf[pos + 1:], dtype=np.uint8)
    stride = (cols + 7) // 8
    bits = np.unpackbits(data[:rows * stride].reshape(rows, stride), axis=1)[:, :cols]
    return LevelSetMask(GridShape.of(rows, cols), bits == 0)


def write_mask(path, mask: LevelSetMask) -> None:
    if mask.shape.d == 2:
        Path(path).write_bytes(_pbm_bytes(mask))
    else:
        write_signal(path, GridSignal(mask.shape, mask.inside.astype(np.float64)))


def read_mask(path) -> LevelSetMask:
    buf = Path(path).read_bytes()
    if buf[:4] == SIGNAL_MAGIC:
        sig = signal_from_bytes(buf)
        return LevelSetMask(sig.shape, sig.values != 0)
    return _pbm_from_bytes(buf)


def write_pgm(path, sig: GridSignal) -> None:
    g = sig.grid if sig.shape.d == 2 else sig.values.reshape(1, -1)
    lo, hi = float(g.min()), float(g.max())
    scaled = np.zeros(g.shape) if hi == lo else (g - lo) / (hi - lo) * 255.0
    img = np.rint(scaled).astype(np.uint8)
    rows, cols = img.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode() + img.tobytes())
