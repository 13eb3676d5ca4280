"""Measurement operators, the forward model and operator diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .grid import DimensionMismatchError, GridSignal


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """Dense K x N operator.  With ``has_mean_row`` row 0 is all ones."""

    matrix: np.ndarray
    has_mean_row: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("operator matrix must be 2-D")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def K(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    @property
    def core(self) -> np.ndarray:
        """The projection block, without the augmented mean row."""
        return self.matrix[1:] if self.has_mean_row else self.matrix


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian"  # "gaussian" or "uniform_bounded"
    scale: float = 0.0  # sigma for gaussian, half-width a for uniform

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_bounded"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ValueError("noise scale must be nonnegative")

    @property
    def c_s(self) -> float:
        return float(self.scale)

    def draw(self, size: int, gen: np.random.Generator) -> np.ndarray:
        if self.scale == 0:
            return np.zeros(size)
        if self.kind == "gaussian":
            return self.scale * gen.standard_normal(size)
        return gen.uniform(-self.scale, self.scale, size)


@dataclass(frozen=True)
class OperatorDiagnostics:
    coherence: float
    spectral_norm: float
    coherence_bound: float
    spectral_norm_bound: float
    rate_term: float
    interference_term: float


def _column_norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def gen_gaussian_operator(K: int, N: int, seed: int, trial: int = 0) -> MeasurementOperator:
    """Gaussian N(0, 1/K) entries, then unit l2-norm columns."""
    if K < 1 or N < 1:
        raise ValueError("K and N must be positive")
    gen = _rng.stream(seed, trial, K, _rng.OPERATOR)
    a = gen.standard_normal((K, N))
    a *= 1.0 / math.sqrt(K)
    norms = _column_norms(a)
    redo = 0
    while np.any(norms == 0):
        # probability zero, but never divide by it
        bad = np.flatnonzero(norms == 0)
        g = _rng.stream(seed, trial, K, _rng.REGENERATE, redo)
        a[:, bad] = g.standard_normal((K, bad.size)) / math.sqrt(K)
        norms = _column_norms(a)
        redo += 1
    a /= norms
    return MeasurementOperator(a)


def gen_orthonormal_operator(N: int, seed: int, trial: int = 0) -> MeasurementOperator:
    """Random N x N orthogonal matrix (QR of a Gaussian draw)."""
    gen = _rng.stream(seed, trial, N, _rng.OPERATOR)
    q, r = np.linalg.qr(gen.standard_normal((N, N)))
    q *= np.where(np.diag(r) < 0, -1.0, 1.0)
    return MeasurementOperator(q)


def identity_operator(N: int) -> MeasurementOperator:
    return MeasurementOperator(np.eye(N))


def augment_mean_row(op: MeasurementOperator) -> MeasurementOperator:
    if op.has_mean_row:
        raise ValueError("operator already carries a mean row")
    return MeasurementOperator(np.vstack([np.ones((1, op.N)), op.matrix]), has_mean_row=True)


def forward(op: MeasurementOperator, f: GridSignal | np.ndarray, noise: NoiseModel, seed: int,
            trial: int = 0) -> np.ndarray:
    """Observations ``y = A f + n``; noise comes from the seeded noise substream."""
    values = f.values if isinstance(f, GridSignal) else np.asarray(f, dtype=np.float64)
    if values.size != op.N:
        raise DimensionMismatchError(f"operator has N={op.N}, signal has {values.size} samples")
    n = noise.draw(op.K, _rng.stream(seed, trial, op.K, _rng.NOISE))
    return op.matrix @ values + n


def coherence(op: MeasurementOperator, block: int = 1024) -> float:
    """Worst-case coherence of the core block, exact (blocked Gram products)."""
    a = op.core
    n = a.shape[1]
    if n < 2:
        raise ValueError("coherence needs at least two columns")
    best = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        g = np.abs(a[:, start:stop].T @ a)
        g[np.arange(stop - start), np.arange(start, stop)] = 0.0
        best = max(best, float(g.max()))
    return best


def spectral_norm(op: MeasurementOperator, tol: float = 1e-12, max_iter: int = 100_000,
                  seed: int = 0) -> float:
    """Largest singular value by power iteration on A^T A."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = op.core
    v = _rng.stream(seed, 0, 0, _rng.POWER_ITERATION).standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = a.T @ (a @ v)
        lam_new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(lam_new - lam) <= tol * abs(lam_new):
            return math.sqrt(lam_new)
        lam = lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps",
                           math.sqrt(max(lam, 0.0)))


def coherence_bound(K: int, N: int) -> float:
    """High-probability coherence bound for normalized Gaussian operators."""
    den = math.sqrt(K) - math.sqrt(12 * math.log(N))
    return math.sqrt(15 * math.log(N)) / den if den > 0 else math.inf


def spectral_norm_bound(K: int, N: int) -> float:
    """(sqrt K + sqrt N) / sqrt(K - sqrt(12 K log N)), absolute constant dropped."""
    den = K - math.sqrt(12 * K * math.log(N))
    return (math.sqrt(K) + math.sqrt(N)) / math.sqrt(den) if den > 0 else math.inf


def theory_bounds(op: MeasurementOperator, f: GridSignal, kappa: float = 1.0) -> OperatorDiagnostics:
    """Numeric values of the two excess-risk bound terms (no constants)."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    N, d = f.shape.N, f.shape.d
    mu = coherence(op) if op.N >= 2 else 0.0
    norm = spectral_norm(op)
    K = op.core.shape[0]
    expo = kappa / (2 * kappa + d - 2)
    rate = (norm ** 2 * math.log(N) / N) ** expo
    return OperatorDiagnostics(
        coherence=mu,
        spectral_norm=norm,
        coherence_bound=coherence_bound(K, N),
        spectral_norm_bound=spectral_norm_bound(K, N),
        rate_term=rate,
        interference_term=mu * float(np.abs(f.values).sum()),
    )
