"""Command-line interface: ``gfstack {train,predict,cv,importance}``.

Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys

from .bundle import BundleError, ModelBundle, load_bundle, make_provenance, save_bundle
from .harness import run_cv_experiment
from .importance import compute_importance, format_rank_table, rank_report
from .metrics import dataset_stats, mse
from .preprocess import DEFAULT_VARIANCE_THRESHOLD, fit_pipeline, transform
from .stacknet import StackNetConfig, default_config, fit_stacknet, predict_stacknet
from .table import DataError, SeededRng, load_csv

logger = logging.getLogger("gfstack")

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 1, 2


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _load_config(path, seed, scale):
    if path is None:
        config = default_config(seed)
    else:
        try:
            config = StackNetConfig.from_json(path)
        except OSError as exc:
            raise CliError(f"cannot read config {path}: {exc}", EXIT_IO) from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise CliError(f"invalid config {path}: {exc}") from exc
        config = StackNetConfig(config.layers, config.restack, config.oof_folds, seed)
    if scale != 1.0:
        config = config.scaled(scale)
    return config


def _load_table(path, target):
    try:
        return load_csv(path, target)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_IO) from exc
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc


def _load_bundle(path) -> ModelBundle:
    try:
        return load_bundle(path)
    except OSError as exc:
        raise CliError(f"cannot read bundle {path}: {exc}", EXIT_IO) from exc


def cmd_train(args) -> int:
    table = _load_table(args.data, args.target)
    config = _load_config(args.config, args.seed, args.scale)
    mean, std = dataset_stats(table.target)
    print(f"dataset: n={table.n} p={table.p} target mean={mean:.4f} std={std:.4f}")
    pipe = fit_pipeline(table, args.select_k, args.variance_threshold)
    features = transform(pipe, table.values)
    net = fit_stacknet(config, features, table.target, SeededRng(args.seed))
    train_mse = mse(predict_stacknet(net, features), table.target)
    p, r, surviving, k = pipe.dims
    print(f"features: {p} -> {r} components -> {surviving} after variance filter -> {k} selected")
    print(f"models: {config.n_models} in {len(config.layers)} layers")
    print(f"training MSE: {train_mse:.4f}")
    bundle = ModelBundle(
        pipe,
        net,
        make_provenance(args.seed, config.digest(), table.columns, table.target_name, select_k=args.select_k),
    )
    try:
        save_bundle(bundle, args.out)
    except OSError as exc:
        raise CliError(f"cannot write bundle {args.out}: {exc}", EXIT_IO) from exc
    print(f"bundle written to {args.out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = _load_bundle(args.bundle)
    table = _load_table(args.data, None)
    target = bundle.provenance.get("target_name")
    if target is not None and target in table.columns and target not in bundle.feature_names:
        table = _load_table(args.data, target)
    matrix = table.matrix_for(bundle.feature_names, positional=args.positional)
    preds = bundle.predict(matrix)
    try:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["subject_id", "prediction"])
            for sid, value in zip(table.subject_ids, preds):
                writer.writerow([sid, repr(float(value))])
    except OSError as exc:
        raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    print(f"wrote {len(preds)} predictions to {args.out}")
    return EXIT_OK


def cmd_cv(args) -> int:
    table = _load_table(args.data, args.target)
    config = _load_config(args.config, args.seed, args.scale)
    if args.folds < 2 or 2 * args.folds > table.n:
        raise CliError(f"--folds {args.folds} needs 2 <= folds <= n/2 (n={table.n})")
    report = run_cv_experiment(
        table,
        config,
        k_folds=args.folds,
        select_k=args.select_k,
        seed=args.seed,
        paper_protocol=args.paper_protocol,
        variance_threshold=args.variance_threshold,
        per_model=args.per_model,
    )
    print(report.format_folds())
    print()
    print(report.format_table())
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(report.to_json() + "\n")
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    return EXIT_OK


def cmd_importance(args) -> int:
    bundle = _load_bundle(args.bundle)
    iv = compute_importance(bundle.pipeline, bundle.feature_names)
    p = len(iv.names)
    if args.top < 0 or args.bottom < 0 or args.top + args.bottom > p:
        raise CliError(f"--top {args.top} + --bottom {args.bottom} exceeds {p} features")
    top, bottom = rank_report(iv, args.top, args.bottom)
    if top:
        print(format_rank_table(top, f"Top {len(top)} most important variables"))
    if bottom:
        if top:
            print()
        print(format_rank_table(bottom, f"Top {len(bottom)} least important variables"))
    if args.out:
        try:
            iv.write_csv(args.out)
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}", EXIT_IO) from exc
    return EXIT_OK


def _add_model_args(p):
    p.add_argument("--data", required=True, help="CSV with subject id in the first column")
    p.add_argument("--target", required=True, help="name of the target column")
    p.add_argument("--config", help="StackNet config JSON (default: built-in 3-layer, 11-model net)")
    p.add_argument("--select-k", type=int, default=24, help="number of PCA components kept (default 24)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--variance-threshold",
        type=float,
        default=DEFAULT_VARIANCE_THRESHOLD,
        help="drop PCA components whose variance is at or below this value",
    )
    p.add_argument(
        "--scale",
        type=float,
        default=1.0,
        help="multiply every ensemble's n_estimators by this factor",
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gfstack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit preprocessing and StackNet, write a model bundle")
    _add_model_args(p)
    p.add_argument("--out", required=True, help="bundle path (JSON)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict with a trained bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output CSV (subject_id,prediction)")
    p.add_argument("--positional", action="store_true", help="match columns by position, not name")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("cv", help="k-fold cross-validation of the full pipeline")
    _add_model_args(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument(
        "--paper-protocol",
        action="store_true",
        help="fit preprocessing once on all rows before splitting (leaks selection statistics)",
    )
    p.add_argument("--per-model", action="store_true", help="also score every constituent model alone")
    p.add_argument("--out", help="write the report as JSON")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("importance", help="per-feature importance from a bundle's preprocessing")
    p.add_argument("--bundle", required=True)
    p.add_argument("--top", type=int, default=10)
    p.add_argument("--bottom", type=int, default=10)
    p.add_argument("--out", help="write all importances as CSV (name,importance)")
    p.set_defaults(func=cmd_importance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (DataError, BundleError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
