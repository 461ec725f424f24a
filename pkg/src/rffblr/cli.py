"""Command-line entry point: ``rffblr {train,predict,cv,sweep-m,bench,verify}``.

Exit codes: 0 success, 1 usage, 2 data, 3 numerical, 4 failed self-check.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_dataset, read_table
from .evaluation import SCHEMA_VERSION, bench, cross_validate, fold_workers, sweep_m
from .exceptions import (DataError, FormatError, InvalidArgument, NumericalFailure,
                         UndefinedMetric)
from .trainer import TrainConfig, fit, load_model, predict_with_noise_scale, save_model
from .verification import run_all

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4

logger = logging.getLogger("rffblr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _gamma0(text):
    if text == "median":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'median' or a positive number, got {text!r}")
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"gamma0 must be positive and finite, got {text!r}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _add_data_flags(p):
    p.add_argument("--data", required=True, type=Path, help="CSV or ARFF file")
    p.add_argument("--format", choices=("csv", "arff"), help="default: from the file suffix")
    p.add_argument("--targets", required=True, type=_positive_int,
                   help="number of target columns (the last C columns)")


def _add_fit_flags(p):
    d = TrainConfig()
    p.add_argument("--m", type=_positive_int, default=None,
                   help="initial feature count (default min(2N, 4000))")
    p.add_argument("--prune-threshold", type=float, default=d.prune_threshold)
    p.add_argument("--max-iter", type=_positive_int, default=d.max_iterations)
    p.add_argument("--gamma0", type=_gamma0, default=None, metavar="{median|VALUE}",
                   help="initial gamma (default: median heuristic)")


def _add_common(p, out_default):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")


def build_parser():
    parser = _Parser(prog="rffblr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit one model on a whole dataset")
    _add_data_flags(p)
    _add_fit_flags(p)
    _add_common(p, "rffblr-train")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--data", required=True, type=Path,
                   help="inputs only, or inputs followed by the target columns")
    p.add_argument("--format", choices=("csv", "arff"))
    p.add_argument("--out", type=Path, default=Path("predictions.csv"), help="output CSV")

    p = sub.add_parser("cv", help="k-fold cross-validated R^2")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--folds", type=int, default=10)
    _add_common(p, "rffblr-cv")

    p = sub.add_parser("sweep-m", help="cross-validate over several initial feature counts")
    _add_data_flags(p)
    _add_fit_flags(p)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--m-values", type=_positive_int, nargs="+", required=True)
    _add_common(p, "rffblr-sweep")

    p = sub.add_parser("bench", help="training time on synthetic data")
    p.add_argument("--n-values", type=_positive_int, nargs="+", default=[250, 500, 1000])
    p.add_argument("--c-values", type=_positive_int, nargs="+", default=[1, 4, 16])
    p.add_argument("--repeats", type=_positive_int, default=3)
    p.add_argument("--m", type=_positive_int, default=200)
    p.add_argument("--max-iter", type=_positive_int, default=50)
    _add_common(p, "rffblr-bench")

    p = sub.add_parser("verify", help="run the reference-oracle self-checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _config(args):
    return TrainConfig(m_initial=args.m, seed=args.seed, prune_threshold=args.prune_threshold,
                       max_iterations=args.max_iter, gamma0=args.gamma0)


def _clean(value):
    """JSON-safe copy: numpy scalars become Python numbers, NaN becomes null."""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_csv(path, rows, columns):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(float(r[c])) if isinstance(r[c], (float, np.floating)) else r[c]
                        for c in columns])


def _config_dict(cfg):
    return dict(m_initial=cfg.m_initial, seed=cfg.seed, prune_threshold=cfg.prune_threshold,
                prune_every=cfg.prune_every, max_iterations=cfg.max_iterations,
                elbo_rel_tol=cfg.elbo_rel_tol, gamma_steps_per_sweep=cfg.gamma_steps_per_sweep,
                warmup_sweeps=cfg.warmup_sweeps, gamma0=cfg.gamma0,
                scale_features=cfg.scale_features)


def cmd_train(args):
    data = load_dataset(args.data, args.targets, args.format)
    cfg = _config(args)
    t0 = time.perf_counter()
    model = fit(data.X, data.Y, cfg, data.feature_names, data.task_names)
    wall = time.perf_counter() - t0
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.npz")
    _, noise_sd = predict_with_noise_scale(model, data.X[:1])
    h = model.history
    write_json(out / "report.json", dict(
        schema_version=SCHEMA_VERSION, data=args.data.name, n_samples=data.n_samples,
        n_inputs=data.n_inputs, tasks=data.task_names, config=_config_dict(cfg),
        m_initial=h["active"][0], active_features=model.active_features, gamma=model.gamma,
        iterations=h["iterations"], noise_sd=list(noise_sd),
        elbo_trace=h["elbo"], gamma_trace=h["gamma"], active_trace=h["active"]))
    # kept apart from the report so the report is byte-reproducible
    write_json(out / "timing.json", dict(wall_time_seconds=wall))
    if args.figures:
        from .plotting import plot_history
        plot_history(h, out / "history.png")
    print(f"{model.active_features}/{h['active'][0]} features active, gamma={model.gamma:.6g}, "
          f"{h['iterations']} iterations, {wall:.1f}s -> {out}")
    return EXIT_OK


def cmd_predict(args):
    model = load_model(args.model)
    names, body = read_table(args.data, args.format)
    D, C = model.rff.input_dim, model.posterior.n_tasks
    if body.shape[1] not in (D, D + C):
        raise DataError(f"{args.data}: {body.shape[1]} columns, model expects {D} "
                        f"inputs (optionally followed by {C} targets)")
    mean, _ = predict_with_noise_scale(model, body[:, :D])
    tasks = model.task_names or [f"y{c}" for c in range(C)]
    rows = [dict(zip(tasks, row)) for row in mean]
    write_csv(args.out, rows, tasks)
    print(f"{len(rows)} predictions -> {args.out}")
    return EXIT_OK


def _check_folds(k, n):
    if not 2 <= k <= n:
        raise InvalidArgument(f"--folds must be between 2 and N={n}, got {k}")


FOLD_COLUMNS = ("fold", "task", "r2", "n_train", "n_test", "active_features", "gamma",
                "iterations")


def cmd_cv(args):
    data = load_dataset(args.data, args.targets, args.format)
    _check_folds(args.folds, data.n_samples)
    rows, summary = cross_validate(data, _config(args), args.folds, workers=fold_workers())
    out = args.out
    write_csv(out / "folds.csv", rows, FOLD_COLUMNS)
    table = [dict(task=t["task"], **{k: t[k] for k in ("mean_r2", "sd_r2", "n_scores")})
             for t in summary["per_task"]]
    table.append(dict(task="__all__", **summary["overall"]))
    write_csv(out / "summary.csv", table, ("task", "mean_r2", "sd_r2", "n_scores"))
    write_json(out / "summary.json", dict(data=args.data.name, **summary))
    if args.figures:
        from .plotting import plot_fold_scores
        plot_fold_scores(rows, data.task_names, out / "folds.png")
    o = summary["overall"]
    print(f"R2 {o['mean_r2']:.4f} +/- {o['sd_r2']:.4f} over {args.folds} folds "
          f"x {data.n_tasks} tasks -> {out}")
    return EXIT_OK


def cmd_sweep_m(args):
    data = load_dataset(args.data, args.targets, args.format)
    _check_folds(args.folds, data.n_samples)
    rows = sweep_m(data, args.m_values, _config(args), args.folds, workers=fold_workers())
    write_csv(args.out / "sweep_m.csv", rows, ("M_initial", "M_final", "mean_r2", "sd_r2"))
    if args.figures:
        from .plotting import plot_m_sweep
        plot_m_sweep(rows, args.out / "sweep_m.png")
    for r in rows:
        print(f"M={r['M_initial']:>5}  final {r['M_final']:8.1f}  R2 {r['mean_r2']:.4f}")
    return EXIT_OK


def cmd_bench(args):
    rows = bench(args.n_values, args.c_values, args.repeats, args.m, args.max_iter, seed=args.seed)
    write_csv(args.out / "bench.csv", rows,
              ("N", "C", "M", "iterations", "repeats", "mean_seconds", "min_seconds"))
    if args.figures:
        from .plotting import plot_bench
        plot_bench(rows, args.out / "bench.png")
    for r in rows:
        print(f"N={r['N']:>6} C={r['C']:>3}  {r['mean_seconds']:.3f}s")
    return EXIT_OK


def cmd_verify(args):
    results = run_all(seed=args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  "
              f"{r.value:.3e} (limit {r.threshold:.0e})  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


COMMANDS = {"train": cmd_train, "predict": cmd_predict, "cv": cmd_cv,
            "sweep-m": cmd_sweep_m, "bench": cmd_bench, "verify": cmd_verify}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvalidArgument as exc:
        print(f"rffblr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FormatError, UndefinedMetric) as exc:
        print(f"rffblr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailure as exc:
        print(f"rffblr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
