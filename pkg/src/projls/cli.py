"""Command-line interface: ``projls <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import io as pio
from .baselines import haar_plugin, risk_optimal_threshold, threshold_estimate, tikhonov_plugin, tsvd_plugin
from .estimator import FREE, SQUARE, FitConfig, fit
from .experiments import CONFIG_TEMPLATE, load_config, sweep
from .grid import GridShape, GridSignal, LevelSetMask, partition_to_mask, tree_dump
from .metrics import excess_risk, risk, true_level_set
from .operators import (
    MeasurementOperator,
    NoiseModel,
    augment_mean_row,
    forward,
    gen_gaussian_operator,
    gen_orthonormal_operator,
    identity_operator,
    theory_bounds,
)
from .penalty import PenaltyParams, build_row_sats, gram_sum, leaf_penalty
from .phantom import KINDS, PhantomSpec, make_phantom
from .proxy import plain_proxy, projected_mean_subtract

TREES = {"free": FREE, "square": SQUARE}


# operator records --------------------------------------------------------------

def write_record(path, **fields) -> None:
    Path(path).write_text("".join(f"{k} = {v}\n" for k, v in fields.items()))


def read_record(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (p.strip() for p in line.split("=", 1))
            out[k] = v
    return out


def operator_from_record(rec: dict[str, str]) -> MeasurementOperator:
    kind, K, N = rec["operator"], int(rec["K"]), int(rec["N"])
    seed, trial = int(rec.get("seed", 0)), int(rec.get("trial", 0))
    if kind == "identity":
        op = identity_operator(N)
    elif kind == "orthonormal":
        op = gen_orthonormal_operator(N, seed, trial)
    else:
        op = gen_gaussian_operator(K, N, seed, trial)
    return augment_mean_row(op) if rec.get("has_mean_row") == "1" else op


def _load_operator(args) -> tuple[MeasurementOperator, dict[str, str]]:
    if getattr(args, "operator_file", None):
        op = pio.read_operator(args.operator_file)
        # a sidecar record, when present, still supplies shape and sigma
        side = Path(args.record or f"{args.y}.op")
        rec = read_record(side) if args.y and side.exists() else {}
        return op, {"sigma": rec.get("sigma", "0"), "shape": rec.get("shape", "")}
    rec_path = args.record or f"{args.y}.op"
    rec = read_record(rec_path)
    return operator_from_record(rec), rec


def _shape(args, rec, N: int) -> GridShape:
    text = getattr(args, "shape", None) or rec.get("shape")
    shape = GridShape.parse(text) if text else GridShape.of(N)
    if shape.N != N:
        raise SystemExit(f"shape {shape} does not match N={N}")
    return shape


def _proxy(op, y, gamma, shape, mean_sub: bool):
    if mean_sub:
        if not op.has_mean_row:
            raise SystemExit("--mean-sub needs measurements taken with --mean-sub")
        return projected_mean_subtract(op, y, gamma, shape)
    return plain_proxy(op, y, gamma, shape)


# subcommands ---------------------------------------------------------------------

def cmd_phantom(args) -> int:
    shape = GridShape.parse(args.shape)
    spec = PhantomSpec(args.kind, args.low, args.high, args.features, args.seed)
    f = make_phantom(spec, shape)
    out = Path(args.out)
    pio.write_signal(out, f)
    pio.write_pgm(out.with_suffix(".pgm"), f)
    print(f"wrote {out} ({shape}, inside fraction at {args.gamma:g}: "
          f"{float(np.mean(f.values > args.gamma)):.4f})")
    return 0


def cmd_measure(args) -> int:
    f = pio.read_signal(args.signal)
    N = f.shape.N
    k = N if args.operator != "gaussian" else (args.k or N // 2)
    rec = dict(operator=args.operator, K=k, N=N, seed=args.seed, trial=args.trial,
               has_mean_row=int(args.mean_sub), noise=args.noise, sigma=args.sigma, shape=str(f.shape))
    op = operator_from_record({key: str(v) for key, v in rec.items()})
    y = forward(op, f, NoiseModel(args.noise, args.sigma), args.seed, args.trial)
    pio.write_vector(args.out, y)
    write_record(f"{args.out}.op", **rec)
    if args.save_operator:
        pio.write_operator(args.save_operator, op)
    print(f"wrote {args.out} ({op.K} observations) and {args.out}.op")
    return 0


def cmd_estimate(args) -> int:
    op, rec = _load_operator(args)
    y = pio.read_vector(args.y)
    shape = _shape(args, rec, op.N)
    pr = _proxy(op, y, args.gamma, shape, args.mean_sub)
    sigma = args.sigma if args.sigma is not None else float(rec.get("sigma", 0))
    params = PenaltyParams.default(shape.N, sigma, args.tau)
    sats = build_row_sats(op, shape)
    est = fit(pr.z, FitConfig(pr.gamma_effective, params, tree_family=TREES[args.tree]), sats)
    out = Path(args.out)
    pio.write_mask(out, partition_to_mask(est))
    Path(f"{out}.tree").write_text(tree_dump(est))
    pio.write_signal(f"{out}.proxy.pls", pr.z)
    Path(f"{out}.proxy.txt").write_text(pr.sidecar())
    if args.penalty_csv:
        with open(args.penalty_csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell", "depth", "G_L", "phi"])
            for leaf in est.leaves():
                g = gram_sum(sats, leaf.cell)
                cell = " ".join(f"{lv}:{ix}" for lv, ix in zip(leaf.cell.levels, leaf.cell.indices))
                w.writerow([cell, leaf.cell.depth, repr(g),
                            repr(leaf_penalty(g, leaf.cell.depth, params, shape.N, shape.d))])
    print(f"wrote {out}: {est.n_leaves} leaves, objective {est.objective:.6g}")
    return 0


def cmd_baseline(args) -> int:
    op, rec = _load_operator(args)
    y = pio.read_vector(args.y)
    shape = _shape(args, rec, op.N)
    pr = _proxy(op, y, args.gamma, shape, args.mean_sub)
    g = pr.gamma_effective
    if args.method == "threshold":
        mask = threshold_estimate(pr.z, g)
    elif args.method == "risk_optimal":
        if not args.truth:
            raise SystemExit("risk_optimal needs --truth")
        f = pio.read_signal(args.truth)
        thr, mask = risk_optimal_threshold(pr.z, GridSignal(shape, f.values - pr.lambda_hat), g)
        print(f"risk-optimal threshold {float(thr)!r}")
    elif args.method == "haar":
        mask = haar_plugin(pr.z, g, args.param or 0.0, args.spins)
    else:
        y_core = y[1:] if op.has_mean_row else y
        y_core = y_core - pr.lambda_hat * op.core.sum(axis=1)
        core = MeasurementOperator(op.core)
        if args.method == "tsvd":
            mask = tsvd_plugin(core, y_core, int(args.param or min(core.K, core.N)), g, shape)
        else:
            mask = tikhonov_plugin(core, y_core, args.param or 1.0, g, shape)
    pio.write_mask(args.out, mask)
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    f = pio.read_signal(args.truth)
    mask = pio.read_mask(args.mask)
    if mask.shape.N != f.shape.N:
        raise SystemExit("mask and truth sizes differ")
    mask = LevelSetMask(f.shape, mask.inside)
    eps = excess_risk(mask, f, args.gamma)
    gap = risk(mask, f, args.gamma) - risk(true_level_set(f, args.gamma), f, args.gamma)
    print(f"epsilon_N = {eps!r}")
    print(f"risk_gap = {gap!r}")
    return 0


def cmd_diagnose(args) -> int:
    if args.operator_file or args.record:
        op, _ = _load_operator(args)
    else:
        if not args.k or not args.n:
            raise SystemExit("give --record, --operator-file or --k/--n")
        op = gen_gaussian_operator(args.k, args.n, args.seed)
    f = pio.read_signal(args.signal) if args.signal else GridSignal(GridShape.of(op.N), np.zeros(op.N))
    diag = theory_bounds(op, f, args.kappa)
    for name in ("coherence", "spectral_norm", "coherence_bound", "spectral_norm_bound",
                 "rate_term", "interference_term"):
        print(f"{name} = {getattr(diag, name)!r}")
    return 0


def cmd_sweep(args) -> int:
    if args.template:
        sys.stdout.write(CONFIG_TEMPLATE)
        return 0
    if not args.config:
        raise SystemExit("sweep needs --config (or --template)")
    cfg = load_config(args.config)
    results, summary = sweep(cfg, args.out, workers=args.workers,
                             progress=(lambda m: print(m, file=sys.stderr)) if args.verbose else None)
    print(f"wrote {results} and {summary}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="projls", description="Level set estimation from projections")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("phantom", help="write a synthetic signal (PLS1) and PGM preview")
    s.add_argument("--shape", default="64x64")
    s.add_argument("--kind", choices=KINDS, default="blobs")
    s.add_argument("--features", type=int, default=6)
    s.add_argument("--low", type=float, default=44.0)
    s.add_argument("--high", type=float, default=239.0)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--gamma", type=float, default=125.0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_phantom)

    s = sub.add_parser("measure", help="simulate y = A f + n")
    s.add_argument("--signal", required=True)
    s.add_argument("--operator", choices=("gaussian", "identity", "orthonormal"), default="gaussian")
    s.add_argument("--k", type=int)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--trial", type=int, default=0)
    s.add_argument("--noise", choices=("gaussian", "uniform_bounded"), default="gaussian")
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--mean-sub", action="store_true", help="prepend the all-ones measurement row")
    s.add_argument("--save-operator")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_measure)

    def operator_args(s):
        s.add_argument("--y", required=True)
        s.add_argument("--record", help="operator record (default: <y>.op)")
        s.add_argument("--operator-file", help="PLSA operator instead of a record")
        s.add_argument("--shape")
        s.add_argument("--gamma", type=float, required=True)
        s.add_argument("--mean-sub", action="store_true")
        s.add_argument("--out", required=True)

    s = sub.add_parser("estimate", help="projective level set estimate")
    operator_args(s)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--sigma", type=float, help="noise scale for the penalty (default: from record)")
    s.add_argument("--tree", choices=sorted(TREES), default="free")
    s.add_argument("--penalty-csv", help="dump cell, depth, G_L, phi per leaf")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("baseline", help="baseline level set estimate")
    operator_args(s)
    s.add_argument("--method", choices=("threshold", "risk_optimal", "haar", "tsvd", "tikhonov"),
                   default="threshold")
    s.add_argument("--param", type=float, help="haar threshold, tsvd rank or tikhonov alpha")
    s.add_argument("--spins", type=int, default=1)
    s.add_argument("--truth")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("evaluate", help="excess risk of a mask against the truth")
    s.add_argument("--mask", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("diagnose", help="coherence, spectral norm and bound terms")
    s.add_argument("--record")
    s.add_argument("--operator-file")
    s.add_argument("--y", default="")
    s.add_argument("--k", type=int)
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--signal")
    s.add_argument("--kappa", type=float, default=1.0)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("sweep", help="run an experiment config, write CSVs")
    s.add_argument("--config")
    s.add_argument("--template", action="store_true", help="print a config template")
    s.add_argument("--out", default="results")
    s.add_argument("--workers", type=int)
    s.add_argument("--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
