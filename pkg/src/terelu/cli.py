"""Command-line entry point: ``train``, ``gradcheck``, ``plot-data``, ``data-info``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from terelu import data as datamod
from terelu import gradcheck
from terelu.activations import DEFAULT_SPECS, Kind, branch_points
from terelu.config import (FIELD_TYPES, ConfigError, ExperimentConfig, build_config, key_name,
                           read_config_file)
from terelu.data import Dataset
from terelu.metrics import MetricsWriter, SchemaError, long_rows, read_metrics, run_names, write_long
from terelu.network import (DivergenceError, MetricsRow, Model, TrainConfig, build_fcnn,
                            build_maxout_net, fit)
from terelu.numerics import Rng

log = logging.getLogger("terelu")


class MissingDataError(FileNotFoundError):
    pass


def load_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    if cfg.dataset == "blobs":
        total = cfg.train_size + cfg.val_size
        ds = datamod.synthetic_blobs(math.ceil(total / cfg.blob_classes), cfg.blob_classes,
                                     cfg.blob_dim, cfg.blob_separation, cfg.seed)
        idx = np.arange(len(ds))
        return (ds.take(idx[:cfg.train_size], "blobs-train"),
                ds.take(idx[cfg.train_size:total], "blobs-val"))
    paths = datamod.mnist_paths(cfg.data_dir)
    missing = [p for key, p in paths.items() if key.startswith("train") and not p.exists()]
    if missing:
        raise MissingDataError(
            f"MNIST files not found in {cfg.data_dir}: "
            + ", ".join(p.name for p in missing)
            + f". Expected {', '.join(datamod.MNIST_FILES.values())} "
            + f"(set --data-dir or ${datamod.DATA_DIR_ENV}; nothing is downloaded)")
    full = datamod.load_mnist_train(cfg.data_dir)
    rest, held = datamod.split(full, cfg.holdout, cfg.seed)
    return (datamod.subset(rest, cfg.train_size, cfg.seed),
            datamod.subset(held, cfg.val_size, cfg.seed + 1))


def build_model(cfg: ExperimentConfig, input_dim: int, classes: int) -> Model:
    if cfg.activation == "maxout":
        return build_maxout_net(cfg.depth, cfg.width, input_dim, classes, cfg.maxout_k,
                                use_bn=cfg.bn, seed=cfg.seed)
    return build_fcnn(cfg.depth, cfg.width, input_dim, classes, cfg.activation_spec(),
                      use_bn=cfg.bn, seed=cfg.seed)


def run_experiment(cfg: ExperimentConfig, out_csv=None, on_row=None) -> list[MetricsRow]:
    """Train per ``cfg``, streaming rows to ``out_csv`` if given.

    DivergenceError propagates; rows written before it stay in the CSV.
    """
    train, val = load_datasets(cfg)
    model = build_model(cfg, train.dim, train.class_count)
    tcfg = TrainConfig(cfg.learning_rate, cfg.momentum, cfg.batch_size, cfg.epochs, cfg.seed)
    rows = []
    writer = MetricsWriter(out_csv, cfg.items(), len(model.terelu_layers())) if out_csv else None
    try:
        for row in fit(model, train, val, tcfg):
            rows.append(row)
            if writer:
                writer.write(row)
            if on_row:
                on_row(row)
    finally:
        if writer:
            writer.close()
    return rows


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags override its entries")
    for name, kind in FIELD_TYPES.items():
        flag = "--" + key_name(name)
        if kind == "bool":
            p.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None)
        else:
            typ = {"int": int, "float": float}.get(kind, str)
            p.add_argument(flag, dest=name, type=typ, default=None)


def cmd_train(args) -> int:
    overrides = {name: getattr(args, name) for name in FIELD_TYPES}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(file_values, overrides)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    def progress(row: MetricsRow):
        log.info("epoch %d train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f",
                 row.epoch, row.train_loss, row.train_acc, row.val_loss, row.val_acc)

    try:
        rows = run_experiment(cfg, cfg.out_csv, progress)
    except MissingDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"diverged: {exc}; partial metrics in {cfg.out_csv}", file=sys.stderr)
        return 1
    last = rows[-1]
    beta = ""
    if last.beta_values:
        beta = f" beta[min/mean/max]={min(last.beta_values):.4f}/" \
               f"{np.mean(last.beta_values):.4f}/{max(last.beta_values):.4f}"
    print(f"{cfg.activation} depth={cfg.depth} epochs={last.epoch} "
          f"train_acc={last.train_acc:.4f} val_acc={last.val_acc:.4f} "
          f"val_loss={last.val_loss:.4f}{beta} -> {cfg.out_csv}")
    return 0


def cmd_gradcheck(args) -> int:
    kinds = [args.kind] if args.kind else None
    reports = gradcheck.run_suite(kinds, points=args.points, seed=args.seed)
    for r in reports:
        print(r.line())
    if args.kind:
        spec = DEFAULT_SPECS[Kind(args.kind)]
        xs = gradcheck.sample_away_from(branch_points(spec), args.points, Rng(args.seed))
        print(f"per-branch max rel err for {args.kind} over {args.points} points:")
        for label, err in gradcheck.per_branch(spec, xs).items():
            print(f"  {label:<10} {err:.3e}")
    failed = [r for r in reports if not r.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return 1 if failed else 0


def cmd_plot_data(args) -> int:
    try:
        runs = {name: read_metrics(p) for name, p in zip(run_names(args.csv), args.csv)}
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows = long_rows(runs, with_beta=args.with_beta)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            write_long(rows, fh)
    else:
        write_long(rows, sys.stdout)
    figure = args.figure
    if figure is None and args.out and not args.no_figure:
        figure = str(Path(args.out).with_suffix(".png"))
    if figure and not args.no_figure:
        from terelu.plotting import plot_runs
        plot_runs(runs, figure)
        print(f"figure written to {figure}", file=sys.stderr)
    return 0


def cmd_data_info(args) -> int:
    data_dir = Path(args.data_dir) if args.data_dir else datamod.default_data_dir()
    print(f"environment variable: {datamod.DATA_DIR_ENV}")
    print(f"data directory: {data_dir}")
    for path in datamod.mnist_paths(data_dir).values():
        if path.exists():
            try:
                magic, arr = datamod.read_idx(path)
                status = f"present, shape {arr.shape}"
            except (OSError, ValueError) as exc:
                status = f"unreadable ({exc})"
        else:
            status = "missing"
        print(f"  {path.name:<26} {status}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terelu", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an FCNN and write per-epoch metrics CSV")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="run the finite-difference gradient suite")
    p.add_argument("--kind", choices=[k.value for k in Kind])
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("plot-data", help="merge metrics CSVs to long format and plot them")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", help="merged CSV path (default: stdout)")
    p.add_argument("--figure", help="figure path (default: next to --out, .png)")
    p.add_argument("--no-figure", action="store_true")
    p.add_argument("--with-beta", action="store_true", help="also emit beta_* rows")
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("data-info", help="show where MNIST files are expected")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_data_info)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
