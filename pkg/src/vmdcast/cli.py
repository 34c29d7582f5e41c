"""Command-line entry point: ``vmdcast <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Default output paths live under ``$VMDCAST_OUTPUT_DIR`` (or the working
directory).  ``--config FILE`` supplies flag defaults as a JSON object whose
keys are flag destinations (``n_h``, ``epochs``, ...); explicit flags win.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import data_io as dio
from . import eval as ev
from . import workflow
from .errors import DataError, NumericalError, ShapeError, SpecError, VmdcastError
from .nn import CosineRestartSchedule
from .pipeline import ModelSpec, TrainConfig, Variant
from .pipeline.models import HIDDEN_GRID, KERNEL_GRID, LAYER_GRID, PRESETS
from .pipeline.training import grid_points
from .vmd import VmdConfig, decompose

ENV_OUTPUT_DIR = "VMDCAST_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
FALLBACK_ARCH = {"n_h": 10, "n_l": 2, "n_k": 3}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if "(default:" in (action.help or ""):
            return action.help
        return super()._get_help_string(action)


class _Stage:
    """Tracks which module/stage is running, for numerical diagnostics."""

    def __init__(self):
        self.where = "cli/startup"

    @contextlib.contextmanager
    def __call__(self, where: str):
        prev, self.where = self.where, where
        yield
        # not reached on error, so the failing stage stays recorded
        self.where = prev


# ------------------------------------------------------------------ helpers


def _out_path(value: str | None, default_name: str) -> Path:
    if value:
        return Path(value)
    return Path(os.environ.get(ENV_OUTPUT_DIR, ".")) / default_name


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "config")}


def _print_config(cmd: str, cfg: dict) -> None:
    print(f"vmdcast {__version__} {cmd} resolved config:")
    print(json.dumps(cfg, indent=2, sort_keys=True, default=str))
    sys.stdout.flush()


def _series(args) -> dio.TimeSeries:
    return dio.load_csv(args.input, args.value_column, args.skip_missing)


def _vmd_config(args, seed) -> VmdConfig:
    return VmdConfig(
        num_modes=args.modes,
        alpha=args.alpha,
        tau=args.tau,
        tolerance=args.tol,
        max_iterations=args.max_iter,
        omega_init=args.init,
        seed=seed if args.init == "random" else None,
    )


def _schedule(args) -> CosineRestartSchedule:
    return CosineRestartSchedule(eta_max=args.lr_max, eta_min=args.lr_min, period=args.period, period_mult=args.period_mult)


def _train_config(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch_size, schedule=_schedule(args), seed=args.seed)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _tone(text: str) -> tuple[float, float]:
    try:
        f, a = text.split(":")
        return float(f), float(a)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tone must be FREQ:AMP, got {text!r}") from None


def _names(args, paths) -> list[str]:
    if args.names:
        if len(args.names) != len(paths):
            raise UsageError("--names must match the number of prediction files")
        return list(args.names)
    return [Path(p).stem for p in paths]


# ----------------------------------------------------------------- commands


def cmd_decompose(args, stage) -> None:
    cfg = _vmd_config(args, args.seed)
    out = _out_path(args.out, "modes.csv")
    _print_config("decompose", {**_resolved(args), "out": str(out), "vmd": cfg.to_dict()})
    ts = _series(args)
    with stage("vmd/decompose"):
        modes = decompose(ts.values, cfg)
    with stage("data_io/write_modes"):
        meta = dio.write_modes(out, ts.timestamps, modes, args.meta)
    status = "converged" if modes.converged else "hit max iterations"
    print(f"wrote {out} and {meta}: {cfg.num_modes} modes, {status} after {modes.iterations_used} iterations")
    print("center frequencies: " + ", ".join(f"{w:.6f}" for w in modes.center_frequencies))


def cmd_synth(args, stage) -> None:
    spec = dio.SyntheticSpec(
        n=args.n,
        tones=tuple(args.tone or ()),
        trend_slope=args.trend,
        ar1_coeff=args.ar1,
        noise_std=args.noise,
        offset=args.offset,
        seed=args.seed,
    )
    out = _out_path(args.out, "series.csv")
    _print_config("synth", {**_resolved(args), "out": str(out)})
    ts = dio.generate_synthetic(spec)
    dio.save_series(out, ts)
    print(f"wrote {out}: {len(ts)} values")


def _model_spec(args) -> ModelSpec:
    arch = dict(FALLBACK_ARCH)
    if args.preset:
        arch.update(PRESETS[args.preset][Variant.parse(args.variant)])
    for key in ("n_h", "n_l", "n_k"):
        if getattr(args, key) is not None:
            arch[key] = getattr(args, key)
    return ModelSpec(variant=args.variant, L=args.window, K=args.modes, **arch)


def cmd_train(args, stage) -> None:
    spec = _model_spec(args)
    tcfg = _train_config(args)
    vcfg = _vmd_config(args, args.seed) if spec.variant.uses_vmd else None
    out = _out_path(args.out, "checkpoint.json")
    curve_out = _out_path(args.curve, "curve.csv")
    _print_config(
        "train",
        {**_resolved(args), "out": str(out), "curve": str(curve_out), "model": spec.to_dict(),
         "vmd": vcfg.to_dict() if vcfg else None},
    )
    ts = _series(args)
    with stage("pipeline/train"):
        ckpt, curve, _ = workflow.fit(
            ts.values, spec, tcfg, vcfg, args.split, args.causal, args.history
        )
    dio.save_checkpoint(ckpt, out)
    dio.write_curve(curve_out, curve)
    final = f"{curve[-1].train_mse:.6g}" if curve else "n/a"
    print(f"wrote {out} and {curve_out}: final train MSE {final}")


def cmd_forecast(args, stage) -> None:
    out = _out_path(args.out, "predictions.csv")
    _print_config("forecast", {**_resolved(args), "out": str(out)})
    ckpt = dio.load_checkpoint(args.checkpoint)
    ts = _series(args)
    with stage("pipeline/forecast"):
        fc = workflow.forecast(ckpt, ts.values)
    dio.write_predictions(out, ts.timestamps, fc.target_indices, fc.splits, fc.actual, fc.predicted)
    print(f"wrote {out}: {len(fc.target_indices)} predictions")


def cmd_evaluate(args, stage) -> None:
    names = _names(args, args.predictions)
    out = _out_path(args.out, "metrics")
    _print_config("evaluate", {**_resolved(args), "out": str(out), "names": names})
    rows = []
    for name, path in zip(names, args.predictions):
        table = dio.read_predictions(path)
        with stage("eval/metrics"):
            rows.append(ev.MetricRow(name, ev.compute_metrics(*table.select("in")),
                                     ev.compute_metrics(*table.select("out"))))
    _emit_tables(out, lambda fmt: ev.metrics_table(rows, fmt, args.digits), args.report)


def cmd_dmtest(args, stage) -> None:
    if len(args.predictions) < 2:
        raise UsageError("dmtest needs at least two prediction files")
    names = _names(args, args.predictions)
    out = _out_path(args.out, "dm")
    _print_config("dmtest", {**_resolved(args), "out": str(out), "names": names})
    errors, ref = {}, None
    for name, path in zip(names, args.predictions):
        table = dio.read_predictions(path)
        mask = np.array([s == args.split for s in table.splits], dtype=bool)
        idx = table.indices[mask]
        if ref is None:
            ref = idx
        elif not np.array_equal(ref, idx):
            raise DataError(f"{path}: target indices differ from {args.predictions[0]}")
        errors[name] = table.actual[mask] - table.predicted[mask]
    with stage("eval/dm_test"):
        pairs = ev.pairwise_dm(errors, args.distribution)
    _emit_tables(out, lambda fmt: ev.dm_table(names, pairs, fmt), args.report)
    rows = [[a, b, dio.fmt(r.statistic), dio.fmt(r.p_two_sided), dio.fmt(r.p_one_sided_less), str(r.n)]
            for (a, b), r in pairs.items()]
    dio.write_csv(Path(str(out) + ".pairs.csv"), ["model_a", "model_b", "statistic", "p_two_sided", "p_one_sided_less", "n"], rows)


def _emit_tables(out: Path, render, report: str | None) -> None:
    text = render("text")
    dio.atomic_write_text(Path(str(out) + ".csv"), render("csv"))
    dio.atomic_write_text(Path(str(out) + ".txt"), text)
    written = [f"{out}.csv", f"{out}.txt"]
    if report:
        dio.atomic_write_text(report, render("markdown"))
        written.append(report)
    print(text, end="")
    print("wrote " + ", ".join(written))


def cmd_gridsearch(args, stage) -> None:
    variant = Variant.parse(args.variant)
    grids = {"n_k": args.grid_n_k, "n_h": args.grid_n_h, "n_l": args.grid_n_l}
    tcfg = _train_config(args)
    vcfg = _vmd_config(args, args.seed) if variant.uses_vmd else None
    out = _out_path(args.out, "best_checkpoint.json")
    scores_out = _out_path(args.scores, "grid_scores.csv")
    points = grid_points(variant, grids, L=args.window, K=args.modes)
    _print_config(
        "gridsearch",
        {**_resolved(args), "out": str(out), "scores": str(scores_out), "grid_points": len(points),
         "vmd": vcfg.to_dict() if vcfg else None},
    )
    ts = _series(args)
    with stage("pipeline/grid_search"):
        ckpt, result, _ = workflow.fit_grid(
            ts.values, variant, tcfg, grids, vcfg, args.window, args.modes,
            args.split, args.causal, args.history, args.jobs,
        )
    rows = [[s.job_index, s.spec.n_k, s.spec.n_h, s.spec.n_l, s.validation_rmse] for s in result.scores]
    dio.write_csv(scores_out, ["job", "n_k", "n_h", "n_l", "validation_rmse"], rows)
    dio.save_checkpoint(ckpt, out)
    b = result.best_spec
    print(f"best of {len(result.scores)}: n_k={b.n_k} n_h={b.n_h} n_l={b.n_l}; wrote {out} and {scores_out}")


# ------------------------------------------------------------------ parsing


def _input_flags(p) -> None:
    p.add_argument("--input", required=True, help="series CSV (timestamp column first)")
    p.add_argument("--value-column", default=None, help="value column name or index (default: last)")
    p.add_argument("--skip-missing", action="store_true", help="drop rows with empty or unparseable values")


def _vmd_flags(p) -> None:
    p.add_argument("--modes", type=int, default=4, help="number of VMD modes K")
    p.add_argument("--alpha", type=float, default=2000.0, help="VMD bandwidth penalty")
    p.add_argument("--tau", type=float, default=0.0, help="dual ascent step (0 = noise-tolerant)")
    p.add_argument("--tol", type=float, default=1e-7, help="VMD convergence tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="VMD iteration cap")
    p.add_argument("--init", choices=["uniform", "zero", "random"], default="uniform", help="center-frequency init")


def _train_flags(p) -> None:
    p.add_argument("--variant", default="vmd-cnn-lstm", choices=[v.value for v in Variant], help="model variant")
    p.add_argument("--window", type=int, default=12, help="input window length L")
    p.add_argument("--epochs", type=int, default=2000, help="training epochs")
    p.add_argument("--batch-size", type=int, default=128, help="mini-batch size")
    p.add_argument("--lr-max", type=float, default=1e-3, help="peak learning rate")
    p.add_argument("--lr-min", type=float, default=0.0, help="floor learning rate")
    p.add_argument("--period", type=int, default=200, help="epochs per warm-restart cycle")
    p.add_argument("--period-mult", type=int, default=1, help="cycle length multiplier")
    p.add_argument("--split", type=float, default=0.8, help="in-sample fraction")
    p.add_argument("--causal", action="store_true", help="decompose only past data for each window")
    p.add_argument("--history", type=int, default=256, help="trailing samples per causal decomposition")


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="vmdcast", description="VMD-based one-step-ahead forecasting.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"vmdcast {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, formatter_class=fmt)
        p.set_defaults(func=func)
        p.add_argument("--config", default=None, help="JSON file of flag defaults")
        p.add_argument("--seed", type=int, default=0, help="random seed")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
        return p

    p = add("decompose", cmd_decompose, "Split a series into VMD modes.")
    _input_flags(p)
    _vmd_flags(p)
    p.add_argument("--out", default=None, help="mode CSV path (default: $VMDCAST_OUTPUT_DIR/modes.csv)")
    p.add_argument("--meta", default=None, help="metadata JSON path (default: OUT.meta.json)")

    p = add("synth", cmd_synth, "Generate a synthetic series.")
    p.add_argument("--n", type=int, default=1500, help="number of samples")
    p.add_argument("--tone", type=_tone, action="append", default=None, help="FREQ:AMP, repeatable")
    p.add_argument("--trend", type=float, default=0.0, help="linear trend slope")
    p.add_argument("--ar1", type=float, default=0.0, help="AR(1) noise coefficient")
    p.add_argument("--noise", type=float, default=0.0, help="AR(1) innovation standard deviation")
    p.add_argument("--offset", type=float, default=0.0, help="constant offset")
    p.add_argument("--out", default=None, help="series CSV path (default: $VMDCAST_OUTPUT_DIR/series.csv)")

    p = add("train", cmd_train, "Train one model on the in-sample part of a series.")
    _input_flags(p)
    _vmd_flags(p)
    _train_flags(p)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None, help="tuned n_k/n_h/n_l for a dataset")
    p.add_argument("--n-h", type=int, default=None, help=f"LSTM hidden units (default: preset or {FALLBACK_ARCH['n_h']})")
    p.add_argument("--n-l", type=int, default=None, help=f"LSTM layers (default: preset or {FALLBACK_ARCH['n_l']})")
    p.add_argument("--n-k", type=int, default=None, help=f"reconstruction kernels (default: preset or {FALLBACK_ARCH['n_k']})")
    p.add_argument("--out", default=None, help="checkpoint path (default: $VMDCAST_OUTPUT_DIR/checkpoint.json)")
    p.add_argument("--curve", default=None, help="loss-curve CSV (default: $VMDCAST_OUTPUT_DIR/curve.csv)")

    p = add("forecast", cmd_forecast, "Predict every window of a series with a checkpoint.")
    _input_flags(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint from train or gridsearch")
    p.add_argument("--out", default=None, help="predictions CSV (default: $VMDCAST_OUTPUT_DIR/predictions.csv)")

    p = add("evaluate", cmd_evaluate, "RMSE/MAE/MAPE per model for in- and out-of-sample.")
    p.add_argument("--predictions", nargs="+", required=True, help="prediction CSVs, one per model")
    p.add_argument("--names", nargs="+", default=None, help="model labels (default: file stems)")
    p.add_argument("--digits", type=int, default=4, help="decimals for RMSE and MAE")
    p.add_argument("--out", default=None, help="output prefix for .csv/.txt (default: $VMDCAST_OUTPUT_DIR/metrics)")
    p.add_argument("--report", default=None, help="also write a Markdown table here")

    p = add("gridsearch", cmd_gridsearch, "Select n_k/n_h/n_l on an in-sample hold-out.")
    _input_flags(p)
    _vmd_flags(p)
    _train_flags(p)
    p.add_argument("--grid-n-k", type=_int_list, default=list(KERNEL_GRID), help="kernel counts")
    p.add_argument("--grid-n-h", type=_int_list, default=list(HIDDEN_GRID), help="hidden sizes")
    p.add_argument("--grid-n-l", type=_int_list, default=list(LAYER_GRID), help="layer counts")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--out", default=None, help="best checkpoint (default: $VMDCAST_OUTPUT_DIR/best_checkpoint.json)")
    p.add_argument("--scores", default=None, help="score table CSV (default: $VMDCAST_OUTPUT_DIR/grid_scores.csv)")

    p = add("dmtest", cmd_dmtest, "Pairwise Diebold-Mariano tests between prediction files.")
    p.add_argument("--predictions", nargs="+", required=True, help="prediction CSVs, one per model")
    p.add_argument("--names", nargs="+", default=None, help="model labels (default: file stems)")
    p.add_argument("--split", choices=["in", "out"], default="out", help="which split to compare")
    p.add_argument("--distribution", choices=["t", "normal"], default="t", help="reference distribution for p")
    p.add_argument("--out", default=None, help="output prefix for .csv/.txt (default: $VMDCAST_OUTPUT_DIR/dm)")
    p.add_argument("--report", default=None, help="also write a Markdown table here")
    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    try:
        cfg = json.loads(Path(known.config).read_text())
    except FileNotFoundError:
        raise DataError(f"no such config file: {known.config}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"config file {known.config} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise DataError(f"config file {known.config} must hold a JSON object")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = sub.choices.get(known.command)
    if target is None:
        return
    valid = {a.dest for a in target._actions}
    unknown = sorted(set(cfg) - valid)
    if unknown:
        raise UsageError(f"unknown keys in {known.config}: {', '.join(unknown)}")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    target.set_defaults(**cfg)
    # a flag satisfied by the file is no longer required on the command line
    for a in target._actions:
        if a.dest in cfg:
            a.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    stage = _Stage()
    try:
        _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(name)s: %(message)s")
        args.func(args, stage)
        return EXIT_OK
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure in {stage.where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ShapeError, OSError) as exc:
        print(f"data error in {stage.where}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SpecError, VmdcastError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
