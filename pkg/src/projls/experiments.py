"""Experiment protocol: repeated trials over operator/noise draws and K sweeps.

Configs are plain ``key = value`` text; see ``CONFIG_TEMPLATE``.  Each trial
draws its operator and noise from substreams keyed by (seed, trial, K), so
results do not depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import rng as _rng
from .baselines import SVDPath, haar_denoise, oracle_grid, risk_optimal_threshold, threshold_estimate
from .estimator import FREE, SQUARE, FitConfig, oracle_tau_search
from .grid import GridShape, GridSignal, LevelSetMask, partition_to_mask
from .metrics import excess_risk
from .operators import (
    MeasurementOperator,
    NoiseModel,
    augment_mean_row,
    gen_gaussian_operator,
    gen_orthonormal_operator,
    identity_operator,
)
from .penalty import PenaltyParams, RowSATs, build_row_sats
from .phantom import PhantomSpec, make_phantom
from .proxy import ProxyResult, plain_proxy, projected_mean_subtract

METHODS = ("threshold", "risk_optimal", "projective", "haar", "tsvd", "tikhonov")
OPERATORS = ("gaussian", "identity", "orthonormal")

DEFAULT_TAU_GRID = (0.0,) + tuple(float(t) for t in np.logspace(-1, 4, 21))
DEFAULT_HAAR_THRESHOLDS = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0)
DEFAULT_TSVD_FRACTIONS = (0.0625, 0.125, 0.25, 0.5, 0.75, 1.0)
DEFAULT_TIKHONOV_ALPHAS = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)

RESULT_COLUMNS = ("method", "tuning", "epsilon_N", "wall_time_s", "seed", "trial", "K", "N",
                  "mean_subtraction", "error")
SUMMARY_COLUMNS = ("method", "mean_subtraction", "K", "mean_epsilon_N", "std_epsilon_N", "trials")

CONFIG_TEMPLATE = """\
# projective level set experiment
shape = 64x64
gamma = 125
# noise: gaussian (sigma) or uniform_bounded (sigma is the half-width)
noise = gaussian
# sigma = 1 against a [44, 239] phantom: the interference term dominates and
# naive thresholding of the proxy fails, as in the reference experiments
sigma = 1.0
operator = gaussian
# K values; N/2 style fractions of the pixel count are allowed
k = N/2
trials = 25
methods = threshold, risk_optimal, projective
# off, on or both
mean_subtraction = both
seed = 1
phantom = blobs
phantom_features = 6
phantom_seed = 42
phantom_low = 44
phantom_high = 239
tree = free
workers = 1
timing = false
"""


@dataclass(frozen=True)
class ExperimentConfig:
    shape: GridShape = GridShape.of(64, 64)
    gamma: float = 125.0
    noise: str = "gaussian"
    sigma: float = 1.0
    operator: str = "gaussian"
    k_values: tuple[int, ...] = (2048,)
    trials: int = 25
    methods: tuple[str, ...] = ("threshold", "risk_optimal", "projective")
    mean_subtraction: str = "both"
    tau_grid: tuple[float, ...] = DEFAULT_TAU_GRID
    seed: int = 1
    phantom: PhantomSpec = PhantomSpec()
    tree: str = FREE
    workers: int = 1
    timing: bool = False
    haar_spins: int = 4
    haar_thresholds: tuple[float, ...] = DEFAULT_HAAR_THRESHOLDS
    tsvd_fractions: tuple[float, ...] = DEFAULT_TSVD_FRACTIONS
    tikhonov_alphas: tuple[float, ...] = DEFAULT_TIKHONOV_ALPHAS

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.k_values:
            raise ValueError("need at least one K value")
        for k in self.k_values:
            if not 1 <= k <= self.shape.N:
                raise ValueError(f"K={k} must lie in [1, N={self.shape.N}]")
            if self.operator != "gaussian" and k != self.shape.N:
                raise ValueError(f"{self.operator} operator requires K = N")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if self.operator not in OPERATORS:
            raise ValueError(f"unknown operator {self.operator!r}")
        if self.mean_subtraction not in ("off", "on", "both"):
            raise ValueError("mean_subtraction must be off, on or both")
        if self.tree not in (FREE, SQUARE):
            raise ValueError(f"unknown tree family {self.tree!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def noise_model(self) -> NoiseModel:
        return NoiseModel(self.noise, self.sigma)

    @property
    def subtraction_modes(self) -> tuple[bool, ...]:
        return {"off": (False,), "on": (True,), "both": (False, True)}[self.mean_subtraction]


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _k_value(token: str, N: int) -> int:
    token = token.strip().replace(" ", "")
    if token == "N":
        return N
    if token.startswith("N/"):
        return N // int(token[2:])
    return int(token)


_TREE_NAMES = {"free": FREE, FREE: FREE, "square": SQUARE, SQUARE: SQUARE}


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        raw[key] = value

    cfg = ExperimentConfig()
    shape = GridShape.parse(raw.pop("shape")) if "shape" in raw else cfg.shape
    ph = cfg.phantom
    phantom = PhantomSpec(
        kind=raw.pop("phantom", ph.kind),
        low=float(raw.pop("phantom_low", ph.low)),
        high=float(raw.pop("phantom_high", ph.high)),
        features=int(raw.pop("phantom_features", ph.features)),
        seed=int(raw.pop("phantom_seed", ph.seed)),
    )
    kw: dict = {"shape": shape, "phantom": phantom}
    if "k" in raw:
        kw["k_values"] = tuple(_k_value(t, shape.N) for t in raw.pop("k").split(",") if t.strip())
    elif cfg.k_values[0] > shape.N:
        kw["k_values"] = (shape.N // 2,)
    conv: dict[str, Callable[[str], object]] = {
        "gamma": float, "noise": str, "sigma": float, "operator": str, "trials": int,
        "methods": _words, "mean_subtraction": str, "tau_grid": _floats, "seed": int,
        "tree": lambda v: _TREE_NAMES[v], "workers": int,
        "timing": lambda v: v.lower() in ("1", "true", "yes", "on"),
        "haar_spins": int, "haar_thresholds": _floats, "tsvd_fractions": _floats,
        "tikhonov_alphas": _floats,
    }
    for key, value in raw.items():
        if key not in conv:
            raise ValueError(f"unknown config key {key!r}")
        kw[key] = conv[key](value)
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


@dataclass
class MethodResult:
    method: str
    mean_subtraction: bool
    K: int
    trial: int
    tuning: float = math.nan
    epsilon: float = math.nan
    wall_time: float = 0.0
    mask: LevelSetMask | None = field(default=None, repr=False)
    error: str = ""


@dataclass
class TrialData:
    """Everything one trial shares across methods."""

    f: GridSignal
    op: MeasurementOperator
    y: np.ndarray  # core observations
    y_mean: float  # observation of the all-ones row
    _sats: RowSATs | None = None

    def sats(self) -> RowSATs:
        if self._sats is None:
            self._sats = build_row_sats(self.op, self.f.shape)
        return self._sats


def make_operator(cfg: ExperimentConfig, K: int, trial: int) -> MeasurementOperator:
    N = cfg.shape.N
    if cfg.operator == "identity":
        return identity_operator(N)
    if cfg.operator == "orthonormal":
        return gen_orthonormal_operator(N, cfg.seed, trial)
    return gen_gaussian_operator(K, N, cfg.seed, trial)


def prepare_trial(cfg: ExperimentConfig, trial: int, K: int, f: GridSignal | None = None) -> TrialData:
    f = f if f is not None else make_phantom(cfg.phantom, cfg.shape)
    op = make_operator(cfg, K, trial)
    n = cfg.noise_model.draw(op.K + 1, _rng.stream(cfg.seed, trial, op.K, _rng.NOISE))
    y = op.matrix @ f.values + n[1:]
    return TrialData(f, op, y, float(f.values.sum() + n[0]))


def _proxy(cfg: ExperimentConfig, data: TrialData, mean_sub: bool) -> ProxyResult:
    if mean_sub:
        aug = augment_mean_row(data.op)
        return projected_mean_subtract(aug, np.concatenate([[data.y_mean], data.y]), cfg.gamma, cfg.shape)
    return plain_proxy(data.op, data.y, cfg.gamma, cfg.shape)


def _run_method(method: str, cfg: ExperimentConfig, data: TrialData, pr: ProxyResult):
    """Return (tuning value, mask) for one method on one proxy."""
    f, shape = data.f, cfg.shape
    g = pr.gamma_effective
    z = pr.z
    if method == "threshold":
        return g, threshold_estimate(z, g)
    if method == "risk_optimal":
        shifted = GridSignal(shape, f.values - pr.lambda_hat)
        return risk_optimal_threshold(z, shifted, g)
    if method == "projective":
        params = PenaltyParams.default(shape.N, cfg.noise_model.c_s)
        fc = FitConfig(g, params, tree_family=cfg.tree)
        tau, est = oracle_tau_search(z, fc, data.sats(), f, cfg.gamma, cfg.tau_grid)
        return tau, partition_to_mask(est)
    if method == "haar":
        # thresholds are multiples of a robust noise scale of z
        c = np.diff(z.grid, axis=0).ravel() if shape.d == 2 else np.diff(z.values)
        scale = float(np.median(np.abs(c))) / 0.6745 / math.sqrt(2)
        cands = [t * scale for t in cfg.haar_thresholds]
        masks = (LevelSetMask(shape, haar_denoise(z, t, cfg.haar_spins) >= g) for t in cands)
        thr, mask, _ = oracle_grid(cands, masks, f, cfg.gamma)
        return thr, mask
    if method in ("tsvd", "tikhonov"):
        y = data.y - pr.lambda_hat * data.op.core.sum(axis=1)
        path = SVDPath(data.op, y)
        if method == "tsvd":
            rmax = int(np.sum(path.s > path.s[0] * 1e-12))
            cands = sorted({max(1, min(rmax, int(round(fr * data.op.core.shape[0]))))
                            for fr in cfg.tsvd_fractions})
            masks = (LevelSetMask(shape, path.tsvd(r) >= g) for r in cands)
        else:
            top = float(path.s[0] ** 2)
            cands = [a * top for a in cfg.tikhonov_alphas]
            masks = (LevelSetMask(shape, path.tikhonov(a) >= g) for a in cands)
        value, mask, _ = oracle_grid(cands, masks, f, cfg.gamma)
        return float(value), mask
    raise ValueError(f"unknown method {method!r}")


def run_trial(cfg: ExperimentConfig, trial_index: int, K: int | None = None,
              f: GridSignal | None = None) -> list[MethodResult]:
    K = cfg.k_values[0] if K is None else K
    data = prepare_trial(cfg, trial_index, K, f)
    out = []
    for mean_sub in cfg.subtraction_modes:
        pr = _proxy(cfg, data, mean_sub)
        for method in cfg.methods:
            res = MethodResult(method, mean_sub, data.op.K, trial_index)
            t0 = time.perf_counter()
            try:
                res.tuning, res.mask = _run_method(method, cfg, data, pr)
                res.epsilon = excess_risk(res.mask, data.f, cfg.gamma)
            except Exception as exc:  # recorded per row; the trial goes on
                res.error = f"{type(exc).__name__}: {exc}"
            res.wall_time = time.perf_counter() - t0
            out.append(res)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def result_row(cfg: ExperimentConfig, r: MethodResult) -> list[str]:
    return [r.method, _fmt(r.tuning), _fmt(r.epsilon), _fmt(r.wall_time) if cfg.timing else "",
            str(cfg.seed), str(r.trial), str(r.K), str(cfg.shape.N), str(int(r.mean_subtraction)),
            r.error]


def summarize(rows: Iterable[MethodResult]) -> list[tuple[str, bool, int, float, float, int]]:
    groups: dict[tuple[str, bool, int], list[float]] = {}
    for r in rows:
        groups.setdefault((r.method, r.mean_subtraction, r.K), []).append(r.epsilon)
    out = []
    for (method, ms, K), errs in groups.items():
        vals = [e for e in errs if not math.isnan(e)]
        n = len(vals)
        mean = math.fsum(vals) / n if n else math.nan
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        out.append((method, ms, K, mean, std, n))
    return out


def sweep(cfg: ExperimentConfig, out_dir, workers: int | None = None,
          progress: Callable[[str], None] | None = None) -> tuple[Path, Path]:
    """Run every (K, trial) pair; write ``results.csv`` and ``summary.csv``.

    Rows are written in (K, trial) order as soon as each trial finishes, so
    an interrupted sweep leaves a valid partial results file.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = cfg.workers if workers is None else workers
    f = make_phantom(cfg.phantom, cfg.shape)
    tasks = [(k, t) for k in cfg.k_values for t in range(cfg.trials)]
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"
    collected: list[MethodResult] = []

    def job(task):
        k, t = task
        return run_trial(cfg, t, k, f)

    with open(results_path, "w", newline="") as fh, ThreadPoolExecutor(max_workers=workers) as pool:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for (k, t), rows in zip(tasks, pool.map(job, tasks)):
            for r in rows:
                r.mask = None
                writer.writerow(result_row(cfg, r))
            fh.flush()
            collected.extend(rows)
            if progress:
                progress(f"K={k} trial={t} done")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for method, ms, K, mean, std, n in summarize(collected):
        writer.writerow([method, int(ms), K, _fmt(mean), _fmt(std), n])
    summary_path.write_text(buf.getvalue())
    return results_path, summary_path


def read_summary(path) -> dict[tuple[str, bool, int], tuple[float, float, int]]:
    with open(path, newline="") as fh:
        return {(r["method"], r["mean_subtraction"] == "1", int(r["K"])):
                (float(r["mean_epsilon_N"]), float(r["std_epsilon_N"]), int(r["trials"]))
                for r in csv.DictReader(fh)}
