import csv

import numpy as np
import pytest

from projls.estimator import SQUARE
from projls.experiments import (
    CONFIG_TEMPLATE,
    METHODS,
    ExperimentConfig,
    parse_config,
    read_summary,
    run_trial,
    summarize,
    sweep,
)
from projls.grid import GridShape


def small(**kw):
    base = dict(shape=GridShape.of(16, 16), k_values=(128,), trials=2, tau_grid=(0.0, 1.0, 10.0))
    base.update(kw)
    return ExperimentConfig(**base)


def test_template_parses():
    cfg = parse_config(CONFIG_TEMPLATE)
    assert cfg.shape == GridShape.of(64, 64) and cfg.k_values == (2048,) and cfg.trials == 25
    assert cfg.subtraction_modes == (False, True)


def test_parse_options():
    cfg = parse_config("shape = 32x32\nk = N/8, N/4, 256, N  # sweep\ntree = square\ntiming = yes\n"
                       "methods = threshold, haar\n")
    assert cfg.k_values == (128, 256, 256, 1024)
    assert cfg.tree == SQUARE and cfg.timing and cfg.methods == ("threshold", "haar")
    assert parse_config("shape = 16x16").k_values == (128,)
    with pytest.raises(ValueError):
        parse_config("bogus = 1")
    with pytest.raises(ValueError):
        parse_config("shape = 16x16\nk = 999")
    with pytest.raises(ValueError):
        parse_config("shape = 16x16\noperator = identity\nk = N/2")
    with pytest.raises(ValueError):
        parse_config("methods = magic")


def test_identity_noiseless_threshold_is_exact():
    cfg = small(operator="identity", k_values=(256,), sigma=0.0, methods=("threshold", "projective"),
                mean_subtraction="off", trials=1)
    res = run_trial(cfg, 0)
    assert all(r.error == "" for r in res)
    assert [r.epsilon for r in res] == [0.0, 0.0]


def test_orthonormal_matches_identity_ordering():
    kw = dict(k_values=(256,), sigma=0.0, methods=("threshold", "risk_optimal", "projective"),
              mean_subtraction="off", trials=1)
    a = run_trial(small(operator="identity", **kw), 0)
    b = run_trial(small(operator="orthonormal", **kw), 0)
    assert [r.epsilon for r in b] == pytest.approx([r.epsilon for r in a], abs=1e-9)


def test_all_methods_run():
    res = run_trial(small(methods=METHODS, trials=1), 0)
    assert len(res) == 2 * len(METHODS)
    assert all(r.error == "" and np.isfinite(r.epsilon) for r in res)
    by = {(r.method, r.mean_subtraction): r.epsilon for r in res}
    for ms in (False, True):
        assert by[("risk_optimal", ms)] <= by[("threshold", ms)]


def test_sweep_outputs_and_determinism(tmp_path):
    cfg = small(trials=3)
    r1, s1 = sweep(cfg, tmp_path / "a", workers=1)
    r2, s2 = sweep(cfg, tmp_path / "b", workers=3)
    assert r1.read_bytes() == r2.read_bytes() and s1.read_bytes() == s2.read_bytes()
    rows = list(csv.DictReader(open(r1)))
    assert len(rows) == 3 * 2 * 3
    assert all(r["wall_time_s"] == "" and r["error"] == "" for r in rows)
    summary = read_summary(s1)
    assert len(summary) == 6 and all(v[2] == 3 for v in summary.values())


def test_sweep_timing_column(tmp_path):
    results, _ = sweep(small(trials=1, timing=True, methods=("threshold",)), tmp_path)
    rows = list(csv.DictReader(open(results)))
    assert all(float(r["wall_time_s"]) >= 0 for r in rows)


def test_single_trial_summary():
    res = run_trial(small(trials=1), 0)
    rows = summarize(res)
    assert len(rows) == 6 and all(r[5] == 1 and r[4] == 0.0 for r in rows)


def test_failing_method_is_recorded():
    cfg = small(trials=1, methods=("tikhonov",), tikhonov_alphas=(-1.0,), mean_subtraction="off")
    (res,) = run_trial(cfg, 0)
    assert res.error and np.isnan(res.epsilon)
