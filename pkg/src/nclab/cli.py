"""``nclab`` command line: one subcommand per experiment.

Exit status is 0 on success, 1 on runtime failure (e.g. diverged training)
and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import kernel, svg
from .errors import DimensionError, NcLabError, ParameterError, TrainingDivergedError
from .etf import make_etf, verify_etf
from .gmm import LabeledDataset, ShiftSpec, make_shifted_domain, random_spec, sample_gmm
from .linalg import SeedSpec, load_matrix_csv, save_matrix_csv
from .metrics import nc_report, pooled_within_cov
from .mlp import HeadKind, MlpConfig, OptimizerSpec, init_state, save_log_csv, train
from .transfer import ConfigError, load_experiment, run_experiment


class UsageError(Exception):
    pass


def _seed(text) -> SeedSpec:
    parts = str(text).split(":")
    try:
        return SeedSpec(*(int(p) for p in parts))
    except (TypeError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}: use BASE or BASE:STREAM") from exc


def _out(args, name) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / name


def _load_dataset(path, labels_path=None) -> LabeledDataset:
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("f0"):
        return LabeledDataset.load_csv(path)
    if labels_path is None:
        raise UsageError("--labels is required when --features is a bare matrix CSV")
    x = load_matrix_csv(path)
    labels = np.array([int(v) for v in Path(labels_path).read_text().split()], dtype=np.int64)
    if labels.size != x.shape[0]:
        raise UsageError(f"{labels.size} labels for {x.shape[0]} feature rows")
    return LabeledDataset(x.T, labels, int(labels.max()) + 1)


def cmd_etf_check(args):
    if args.k > args.p:
        raise UsageError(f"--k {args.k} exceeds --p {args.p}")
    etf = make_etf(args.k, args.p, args.seed)
    report = verify_etf(etf.weights)
    print("\n".join(report.lines()))
    if args.dump:
        etf.save(args.dump)
    return 0 if report.is_etf else 1


def cmd_gen_data(args):
    spec = random_spec(args.k, args.p, args.seed, mean_norm=args.mean_norm,
                       cov_trace_ratio=args.cov_ratio, anisotropy=args.anisotropy)
    if args.shift:
        spec = make_shifted_domain(spec, ShiftSpec(*args.shift), args.seed.child(99))
    ds = sample_gmm(spec, args.n, args.seed.child(1), noise=args.noise)
    path = _out(args, args.name)
    ds.save_csv(path)
    if args.split_files:
        save_matrix_csv(_out(args, "features.csv"), ds.x.T)
        _out(args, "labels.csv").write_text("\n".join(str(int(v)) for v in ds.labels) + "\n")
    print(f"wrote {ds.n} samples (p={ds.p}, k={ds.k}) to {path}")
    return 0


def cmd_nc_report(args):
    ds = _load_dataset(args.data, args.labels)
    w = load_matrix_csv(args.weights) if args.weights else None
    report = nc_report(ds, w)
    report.save_csv(_out(args, "nc-report.csv"))
    cov = pooled_within_cov(ds)
    save_matrix_csv(_out(args, "cov.csv"), cov)
    _out(args, "cov.svg").write_text(svg.heatmap(cov, title=f"(1/p) tr C = {report.trace_ratio:.4g}"))
    for name, value in report.rows():
        print(f"{name:14s} {'-' if value is None else f'{value:.6g}'}")
    return 0


def cmd_kernel_probe(args):
    ds = _load_dataset(args.data, args.labels)
    act = kernel.PolyActivation(args.a1, args.a2)
    m = args.m or ds.p // 2
    est = kernel.rf_kernel_mc(ds.x, act, m, args.draws, args.seed, mode=args.mode)
    c, resid = kernel.linear_fit(est.gram, ds.x)
    d1, d2 = kernel.poly_coeffs(act)
    print(f"d1 {d1:.6g}\nd2 {d2:.6g}\nfitted_c {c:.6g}\nresidual {resid:.6g}")
    if args.dump:
        save_matrix_csv(args.dump, est.gram)
    return 0


def cmd_mse_sweep(args):
    try:
        grid = kernel.parse_grid(args.grid)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ds = _load_dataset(args.features, args.labels)
    rows = kernel.mse_sweep(ds.x, ds, grid, m=args.m, draws=args.draws, lam=args.lam,
                            split=args.split, seed=args.seed)
    kernel.save_sweep_csv(_out(args, "mse-sweep.csv"), rows, args.draws, args.lam, args.seed)
    _out(args, "mse-sweep.svg").write_text(
        svg.line_plot([r[0] for r in rows], [r[1] for r in rows], "a2", "MSE", "random-feature ridge, test MSE"))
    for a2, mse in rows:
        print(f"{a2:+.3f}  {mse:.6f}")
    return 0


def cmd_train(args):
    ds = _load_dataset(args.data, args.labels)
    cfg = MlpConfig(ds.p, tuple(args.hidden), args.feature_dim, ds.k, args.head, args.seed)
    opt = OptimizerSpec(args.lr, args.momentum, args.weight_decay, args.batch_size, args.epochs)
    state = train(init_state(cfg), ds, opt)
    state.save(Path(args.out_dir) / "checkpoint")
    save_log_csv(_out(args, "train-log.csv"), state.log)
    last = state.log[-1] if state.log else None
    if last:
        print(f"epoch {last.epoch}  loss {last.loss:.4f}  acc {last.acc:.4f}  nc1_trace {last.nc1_trace:.4f}")
    return 0


def cmd_transfer(args):
    spec = load_experiment(args.config)
    result = run_experiment(spec, out_dir=args.out_dir)
    out = Path(args.out_dir)
    for s in dict.fromkeys(c.strategy for c in result.cells):
        cov_path = out / f"cov_{s.value}.csv"
        if cov_path.exists():
            (out / f"cov_{s.value}.svg").write_text(
                svg.heatmap(load_matrix_csv(cov_path), title=f"{s.value}: median target nc1 "
                            f"{result.median(s, 'target_nc1'):.3g}"))
    print(f"domain: {spec.domain_label}")
    print(f"{'strategy':10s} {'cells':>5s} {'pretrain':>9s} {'target':>8s} {'src_nc1':>9s} {'tgt_nc1':>9s}")
    for r in result.summary():
        print(f"{r['strategy']:10s} {r['cells']:5d} {r['pretrain_acc']:9.4f} {r['target_acc']:8.4f} "
              f"{r['source_nc1']:9.4f} {r['target_nc1']:9.4f}")
    for c in result.failures():
        print(f"FAILED {c.strategy.value} seed {c.seed.base_seed}:{c.seed.stream_index}: {c.error}", file=sys.stderr)
    return 1 if result.failures() else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.set_defaults(func=func)
        return p

    p = add("etf-check", cmd_etf_check, "build and verify a fixed ETF classifier")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=SeedSpec(0))
    p.add_argument("--dump", help="write the weights to this CSV (plus a JSON sidecar)")

    p = add("gen-data", cmd_gen_data, "sample a synthetic mixture dataset")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--p", type=int, default=16)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=_seed, default=SeedSpec(0))
    p.add_argument("--mean-norm", type=float, default=3.0)
    p.add_argument("--cov-ratio", type=float, default=1.0)
    p.add_argument("--anisotropy", type=float, default=0.0)
    p.add_argument("--noise", choices=("sphere", "gaussian"), default="sphere")
    p.add_argument("--shift", type=float, nargs=3, metavar=("ROTATION", "OFFSET", "COV_SCALE"))
    p.add_argument("--name", default="data.csv")
    p.add_argument("--split-files", action="store_true", help="also write features.csv and labels.csv")

    p = add("nc-report", cmd_nc_report, "neural-collapse metrics of a labelled feature set")
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--weights", help="k x p classifier CSV for the alignment metric")

    p = add("kernel-probe", cmd_kernel_probe, "Monte-Carlo random-feature kernel diagnostics")
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=0.0)
    p.add_argument("--m", type=int)
    p.add_argument("--draws", type=int, default=500)
    p.add_argument("--mode", choices=kernel.MODES, default="plain")
    p.add_argument("--seed", type=_seed, default=SeedSpec(0))
    p.add_argument("--dump", help="write the kernel matrix to this CSV")

    p = add("mse-sweep", cmd_mse_sweep, "random-feature ridge regression test MSE over a2")
    p.add_argument("--features", required=True, help="dataset CSV, or n x p matrix CSV with --labels")
    p.add_argument("--labels", help="one integer label per line")
    p.add_argument("--grid", default="-1:0.2:1", help="start:step:stop, endpoints included")
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--m", type=int)
    p.add_argument("--lam", type=float, default=1e-2)
    p.add_argument("--split", type=float, default=0.7)
    p.add_argument("--seed", type=_seed, default=SeedSpec(0))

    p = add("train", cmd_train, "train the toy network with one head kind")
    p.add_argument("--data", required=True)
    p.add_argument("--labels")
    p.add_argument("--head", type=HeadKind.parse, default=HeadKind.TRAINABLE)
    p.add_argument("--hidden", type=int, nargs="*", default=[32])
    p.add_argument("--feature-dim", type=int, default=16)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--weight-decay", type=float, default=2e-4)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--seed", type=_seed, default=SeedSpec(0))

    p = add("transfer", cmd_transfer, "pretrain / fine-tune experiment from a JSON config")
    p.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"nclab: config error in field '{exc.field}': {exc}", file=sys.stderr)
        return 2
    except (UsageError, DimensionError, ParameterError, FileNotFoundError) as exc:
        print(f"nclab: {exc}", file=sys.stderr)
        return 2
    except (TrainingDivergedError, NcLabError, ValueError) as exc:
        print(f"nclab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
