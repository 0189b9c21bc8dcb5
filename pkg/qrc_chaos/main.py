#!/usr/bin/env python3
"""
QRC Chaos - command-line entry point

Usage:
    python -m qrc_chaos.main generate --map logistic --r 3.75
    python -m qrc_chaos.main lle --map logistic --r 4
    python -m qrc_chaos.main train --map henon --a 1.4
    python -m qrc_chaos.main predict --model results/train/readout.txt --mode autonomous
    python -m qrc_chaos.main sweep-bifurcation --map logistic --grid 2.5:4:100
    python -m qrc_chaos.main sweep-grid --map logistic --r 3.75 --layers 1..3 --reps 1..4
    python -m qrc_chaos.main sweep-noise --map henon --a 1.35 --gammas 0,0.01,0.1,1
    python -m qrc_chaos.main sweep-ensemble --map logistic --r 3.75 --samples 1000
    python -m qrc_chaos.main sweep-grid --config results/sweep-grid/manifest.json --out rerun

Exit codes: 0 success, 1 input error, 2 numerical-guard failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from qrc_chaos import __version__
from qrc_chaos.config.settings import (
    ExperimentConfig,
    QRCSettings,
    read_config_file,
    read_manifest_file,
    resolve_config,
    write_config_file,
)
from qrc_chaos.schemas.common import Encoding, MapKind, Region
from qrc_chaos.schemas.experiments import RunManifest
from qrc_chaos.services import chaos_maps, experiments, readout_training, reservoir_pipeline
from qrc_chaos.utils.errors import ConfigError, NumericalGuardError
from qrc_chaos.utils.helpers import QRCHelpers

logger = logging.getLogger(__name__)

COMMANDS = (
    "generate", "lle", "train", "predict",
    "sweep-bifurcation", "sweep-grid", "sweep-noise", "sweep-ensemble",
)

# Flags that override config-file keys (flag dest -> config key)
CONFIG_FLAGS = {
    "map": "map_kind",
    "r": "r",
    "a": "a",
    "b": "b",
    "seed": "seed",
    "gap": "gap",
    "tau": "tau",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "mode": "prediction_mode",
    "layers_d": "d",
    "n_rep": "n_rep",
    "n_hidden": "n_hidden",
}

# Subcommand arguments recorded in the manifest and replayed from it (dest -> default)
COMMAND_ARGUMENTS: Dict[str, Dict[str, Any]] = {
    "predict": {"model": None},
    "sweep-bifurcation": {"grid": None},
    "sweep-grid": {"layers": "1..3", "reps": "1..4"},
    "sweep-noise": {"gammas": ",".join(str(g) for g in experiments.DEFAULT_GAMMAS)},
    "sweep-ensemble": {"samples": experiments.DEFAULT_ENSEMBLE_SAMPLES, "bins": 40},
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises ConfigError instead of exiting"""

    def error(self, message):
        raise ConfigError(f"{message}\n{self.format_usage()}")


def parse_int_range(text: str) -> List[int]:
    """'1..3' -> [1, 2, 3]; '1,2,4' -> [1, 2, 4]"""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Invalid integer range {text!r}") from e
    if not values:
        raise ConfigError(f"Empty integer range {text!r}")
    return values


def parse_float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"Invalid number list {text!r}") from e
    if not values:
        raise ConfigError(f"Empty number list {text!r}")
    return values


def parse_grid(text: str) -> List[float]:
    """'start:stop:points' (inclusive linspace) or an explicit comma list"""
    if ":" not in text:
        return parse_float_list(text)
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"Grid must be 'start:stop:points', got {text!r}")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as e:
        raise ConfigError(f"Invalid grid {text!r}") from e
    if points < 1:
        raise ConfigError("Grid needs at least one point")
    return np.linspace(start, stop, points).tolist()


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value experiment config file, or a manifest.json to rerun")
    common.add_argument("--map", choices=[k.value for k in MapKind], help="Map kind")
    common.add_argument("--r", type=float, help="Logistic control parameter")
    common.add_argument("--a", type=float, help="Henon parameter a")
    common.add_argument("--b", type=float, help="Henon parameter b")
    common.add_argument("--seed", type=int, help="Dataset seed")
    common.add_argument("--gap", type=int, help="Skip-step horizon (0 = next step)")
    common.add_argument("--tau", type=float, help="Evolution time per layer")
    common.add_argument("--gamma", type=float, help="Dephasing rate")
    common.add_argument("--epsilon", type=float, help="Ridge parameter")
    common.add_argument("--d", dest="layers_d", type=int, help="Number of layers")
    common.add_argument("--n-rep", dest="n_rep", type=int, help="Repetitions per input variable")
    common.add_argument("--n-hidden", dest="n_hidden", type=int, help="Hidden qubits")
    common.add_argument("--mode", choices=["teacher_forced", "autonomous"], help="Prediction mode")
    common.add_argument("--out", help="Output root (default: QRC_OUT_DIR or 'results')")
    common.add_argument("--n-jobs", type=int, help="Parallel workers (-1 = all cores)")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")

    parser = _Parser(prog="qrc_chaos", description="Quantum reservoir computing for chaotic maps")
    parser.add_argument("--version", action="version", version=f"qrc_chaos {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("generate", parents=[common], help="Generate normalized train/test series")
    sub.add_parser("lle", parents=[common], help="Largest Lyapunov exponent of the map")
    sub.add_parser("train", parents=[common], help="Train a readout and save it")

    predict = sub.add_parser("predict", parents=[common], help="Score a saved readout on fresh test series")
    predict.add_argument("--model", help="Readout file written by 'train'")

    sweep = sub.add_parser("sweep-bifurcation", parents=[common], help="Bifurcation-diagram sweep")
    sweep.add_argument("--grid", help="start:stop:points or comma list (default: full range, 100 points)")

    grid = sub.add_parser("sweep-grid", parents=[common], help="Layers x repetitions RMSE grid")
    grid.add_argument("--layers", help="Layer range (default 1..3)")
    grid.add_argument("--reps", help="Repetition range (default 1..4)")

    noise = sub.add_parser("sweep-noise", parents=[common], help="Clean-trained vs in-situ dephasing robustness")
    noise.add_argument("--gammas", help="Comma list of dephasing rates (default 0,0.01,0.05,0.1,0.5,1)")

    ensemble = sub.add_parser("sweep-ensemble", parents=[common], help="Random-Hamiltonian RMSE histogram")
    ensemble.add_argument("--samples", type=int, help=f"Number of reservoirs (default {experiments.DEFAULT_ENSEMBLE_SAMPLES})")
    ensemble.add_argument("--bins", type=int, help="Histogram bins (default 40)")
    return parser


def resolve_run_config(args: argparse.Namespace) -> tuple[ExperimentConfig, Dict[str, str]]:
    """
    Defaults < config file < CLI flags; returns the config and input-file hashes

    A manifest.json passed as ``--config`` supplies its resolved config, and its
    recorded subcommand arguments fill any that are not given on the command line.
    """
    values: Dict[str, Any] = {}
    inputs: Dict[str, str] = {}
    if args.config:
        if Path(args.config).suffix == ".json":
            recorded_config, recorded_arguments = read_manifest_file(args.config)
            values.update(recorded_config)
            for name in COMMAND_ARGUMENTS.get(args.command, {}):
                if getattr(args, name, None) is None and name in recorded_arguments:
                    setattr(args, name, recorded_arguments[name])
        else:
            values.update(read_config_file(args.config))
        inputs[Path(args.config).name] = QRCHelpers.hash_file(args.config)
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    return resolve_config(values), inputs


def command_arguments(args: argparse.Namespace) -> Dict[str, Any]:
    """Subcommand arguments of ``args.command`` with defaults filled in"""
    arguments = {}
    for name, default in COMMAND_ARGUMENTS.get(args.command, {}).items():
        value = getattr(args, name, None)
        arguments[name] = default if value is None else value
    return arguments


def decision_ledger(cfg: ExperimentConfig) -> Dict[str, Any]:
    encoding = "theta = pi * x" if cfg.encoding == Encoding.PI else "theta = arccos(1 - 2x)"
    return {
        "encoding": encoding,
        "tau": cfg.tau,
        "boundary": cfg.boundary.value,
        "qubit_layout": f"inputs on sites 1..n_I ({cfg.qubit_order.value}), hidden on n_I+1..N",
        "normalization": "max" if cfg.map_kind == MapKind.LOGISTIC else "minmax",
        "evaluation_span": f"t={cfg.eval_start + 1}..{cfg.test_len}",
        "readout": "ridge, no intercept" + (" (+bias feature)" if cfg.include_bias else ""),
        "hidden_initial_state": "|0...0>",
    }


class RunContext:
    """Output directory, manifest assembly and artifact hashing for one command"""

    def __init__(
        self,
        command: str,
        cfg: ExperimentConfig,
        out_root: str,
        inputs: Dict[str, str],
        save_plots: bool,
        arguments: Optional[Dict[str, Any]] = None,
    ):
        self.command = command
        self.cfg = cfg
        self.arguments = dict(arguments or {})
        self.out_dir = QRCHelpers.create_directories(Path(out_root) / command)
        self.inputs = dict(inputs)
        self.outputs: Dict[str, str] = {}
        self.results: Dict[str, Any] = {}
        self.seeds: Dict[str, Any] = {"dataset_seed": cfg.seed, "reservoir_seed": cfg.reservoir_seed}
        self.save_plots = save_plots

    def csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = QRCHelpers.save_csv(frame, self.out_dir / name)
        self.outputs[name] = QRCHelpers.hash_file(path)
        return path

    def plot(self, writer: Callable, name: str, *args, **kwargs) -> Optional[Path]:
        if not self.save_plots:
            return None
        path = writer(*args, path=self.out_dir / name, **kwargs)
        self.outputs[name] = QRCHelpers.hash_file(path)
        return path

    def write_manifest(self, rng_algorithm: str) -> Path:
        """Write config.cfg (key=value replay file) and manifest.json into the run directory"""
        config_path = write_config_file(self.cfg, self.out_dir / "config.cfg")
        self.outputs["config.cfg"] = QRCHelpers.hash_file(config_path)
        manifest = RunManifest(
            experiment=self.command,
            tool_version=__version__,
            config=self.cfg.model_dump(mode="json"),
            arguments=self.arguments,
            seeds=self.seeds,
            decisions=decision_ledger(self.cfg),
            rng_algorithm=rng_algorithm,
            prediction_mode=self.cfg.prediction_mode.value,
            results=self.results,
            inputs=self.inputs,
            outputs=self.outputs,
            system=QRCHelpers.get_system_info(),
        )
        return QRCHelpers.save_manifest(manifest.model_dump(mode="json"), self.out_dir / "manifest.json")


def cmd_generate(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    dataset = experiments.build_experiment_dataset(cfg)
    train = chaos_maps.series_to_frame(dataset.train)
    test = chaos_maps.series_to_frame(dataset.test)
    train.insert(0, "split", "train")
    test.insert(0, "split", "test")
    ctx.csv(pd.concat([train, test], ignore_index=True), "series.csv")

    first = dataset.test[0].values
    series = {"x": first[:, 0]}
    if first.shape[1] == 2:
        series["y"] = first[:, 1]
    ctx.plot(
        QRCHelpers.save_line_plot, "series.svg",
        np.arange(1, first.shape[0] + 1), series, xlabel="t", ylabel="normalized value",
        title=f"{cfg.map_params().label()} test series 0",
    )
    ctx.results.update({
        "normalization": dataset.normalization,
        "offset": dataset.offset.tolist(),
        "gain": dataset.gain.tolist(),
        "test_clamp_count": dataset.test_clamp_count,
    })
    print(f"Generated {len(dataset.train)} train and {len(dataset.test)} test series into {ctx.out_dir}")


def cmd_lle(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    params = cfg.map_params()
    estimate = chaos_maps.largest_lyapunov(
        params, transient=cfg.lle_transient, n_iter=cfg.lle_iterations, seed=cfg.seed
    )
    ctx.csv(
        pd.DataFrame({"control": [params.control], "lle": [estimate.lambda_star], "n_iter": [estimate.n_iter]}),
        "lle.csv",
    )
    ctx.results["lle"] = estimate.lambda_star
    print(f"lambda* = {estimate.lambda_star:.4f}  ({params.label()}, {estimate.n_iter} iterations)")


def cmd_train(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    dataset = experiments.build_experiment_dataset(cfg)
    rcfg = cfg.reservoir_config()
    prop = reservoir_pipeline.build_propagator(rcfg)
    model, report = experiments.fit_and_score(cfg, rcfg, prop, dataset, n_jobs=n_jobs)

    readout_training.save_model(model, ctx.out_dir / "readout.txt")
    ctx.outputs["readout.txt"] = QRCHelpers.hash_file(ctx.out_dir / "readout.txt")
    ctx.csv(reservoir_pipeline.feature_frame(model.M), "features.csv")
    ctx.csv(
        pd.DataFrame({"series_id": np.arange(len(report.rmse_per_series)), "rmse": report.rmse_per_series}),
        "test_rmse.csv",
    )
    ctx.results.update({"rmse": report.rmse, "n_samples": model.n_samples, "w_norm": float(np.linalg.norm(model.W))})
    print(f"Trained readout on {model.n_samples} windows; test RMSE = {report.rmse:.4e}")


def _predictions_frame(report) -> pd.DataFrame:
    frames = []
    for series_id, (pred, true) in enumerate(zip(report.predictions, report.truths)):
        frame = pd.DataFrame({"series_id": series_id, "t": np.arange(report.eval_start + 1, report.eval_start + 1 + len(true))})
        for k, name in enumerate(["x", "y"][: true.shape[1]]):
            frame[f"{name}_true"] = true[:, k]
            frame[f"{name}_pred"] = pred[:, k]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def cmd_predict(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    model_path = ctx.arguments["model"]
    if not model_path:
        raise ConfigError("predict needs --model (or a predict manifest passed as --config)")
    model = readout_training.load_model(model_path)
    ctx.inputs[Path(model_path).name] = QRCHelpers.hash_file(model_path)
    rcfg = cfg.reservoir_config()
    if model.n_features != rcfg.n_features or model.n_targets != cfg.n_vars:
        raise ConfigError(
            f"Readout shape ({model.n_targets}x{model.n_features}) does not match this configuration "
            f"({cfg.n_vars}x{rcfg.n_features})"
        )
    if model.cfg_hash and model.cfg_hash != QRCHelpers.hash_text(rcfg.model_dump_json()):
        logger.warning("Readout was trained with a different reservoir configuration")

    dataset = experiments.build_experiment_dataset(cfg)
    prop = reservoir_pipeline.build_propagator(rcfg)
    report = readout_training.evaluate(
        rcfg, prop, model, dataset.test, gap=cfg.gap, mode=cfg.prediction_mode,
        eval_start=cfg.eval_start, clamp=cfg.clamp_predictions, n_jobs=n_jobs,
    )
    ctx.csv(_predictions_frame(report), "predictions.csv")
    true_raw, pred_raw = readout_training.denormalized_tail(dataset, report)
    steps = np.arange(report.eval_start + 1, report.eval_start + 1 + len(true_raw))
    ctx.plot(
        QRCHelpers.save_line_plot, "predictions.svg", steps, {"true": true_raw, "predicted": pred_raw},
        xlabel="t", ylabel="x", title=f"{cfg.prediction_mode.value} prediction, series 0",
    )
    ctx.results.update({"rmse": report.rmse, "rmse_per_series": report.rmse_per_series.tolist()})
    print(f"{cfg.prediction_mode.value} RMSE = {report.rmse:.4e} over {len(report.predictions)} series")


def cmd_sweep_bifurcation(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    if ctx.arguments["grid"] is None:
        lo, hi = (2.5, 4.0) if cfg.map_kind == MapKind.LOGISTIC else experiments.HENON_SWEEP_RANGE
        ctx.arguments["grid"] = f"{lo}:{hi}:100"
    grid = parse_grid(ctx.arguments["grid"])

    sweep = experiments.bifurcation_sweep(cfg, grid, n_jobs=n_jobs)
    ctx.csv(sweep.summary_frame(), "sweep_summary.csv")
    ctx.csv(sweep.tails_frame(), "sweep_tails.csv")

    attractor_x = np.concatenate([np.full(p.attractor.shape, p.control) for p in sweep.points])
    tail_x = np.concatenate([np.full(p.true_tail.shape, p.control) for p in sweep.points])
    ctx.plot(
        QRCHelpers.save_scatter_plot, "bifurcation.svg",
        {
            "true x_inf": (attractor_x, np.concatenate([p.attractor for p in sweep.points])),
            "predicted": (tail_x, np.concatenate([p.predicted_tail for p in sweep.points])),
        },
        xlabel="control", ylabel="x", title=f"{cfg.map_kind.value} bifurcation diagram",
    )
    ctx.plot(
        QRCHelpers.save_line_plot, "rmse_lle.svg", sweep.grid, {"RMSE": sweep.rmse},
        xlabel="control", ylabel="RMSE", logy=True, shade_positive=sweep.lle,
    )

    ctx.results["regime_averages"] = experiments.regime_averages(sweep)
    for region in (Region.ALL, Region.CHAOTIC_ONLY):
        try:
            ctx.results[f"spearman_{region.value}"] = experiments.lle_rmse_correlation(sweep, region)
        except (ConfigError, NumericalGuardError) as e:
            logger.warning(f"Spearman ({region.value}) not available: {e}")
    print(f"Swept {len(grid)} points; spearman(chaotic) = {ctx.results.get('spearman_chaotic_only', 'n/a')}")


def cmd_sweep_grid(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    result = experiments.hyperparameter_grid(
        cfg, layers=parse_int_range(ctx.arguments["layers"]), reps=parse_int_range(ctx.arguments["reps"]), n_jobs=n_jobs
    )
    ctx.csv(result.to_frame(), "grid.csv")
    ctx.plot(
        QRCHelpers.save_heatmap, "grid.svg", result.rmse, result.layers, result.reps,
        xlabel="n_rep", ylabel="layers d", title=f"{cfg.map_kind.value} control={result.control:g}, gap={result.gap}",
    )
    d_best, rep_best = result.argmin
    ctx.results.update({
        "argmin": {"d": d_best, "n_rep": rep_best},
        "expected_optimal_repetitions": result.expected_optimal_repetitions,
        "skipped_cells": int(result.skipped.sum()),
    })
    print(f"Lowest RMSE at d={d_best}, n_rep={rep_best}")


def cmd_sweep_noise(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    gammas = parse_float_list(ctx.arguments["gammas"])
    result = experiments.noise_robustness(cfg, gammas, n_jobs=n_jobs)
    ctx.csv(result.to_frame(), "noise.csv")
    ctx.plot(
        QRCHelpers.save_line_plot, "noise.svg", result.gammas,
        {"trained without decoherence": result.rmse_clean_trained, "trained with decoherence": result.rmse_insitu_trained},
        xlabel="gamma", ylabel="RMSE", logy=True,
    )
    ctx.results["window_hash"] = result.window_hash
    print(f"Noise sweep over {len(gammas)} gamma values written to {ctx.out_dir}")


def cmd_sweep_ensemble(ctx: RunContext, args, n_jobs: int) -> None:
    cfg = ctx.cfg
    report = experiments.hamiltonian_ensemble(
        cfg, n_samples=ctx.arguments["samples"], n_bins=ctx.arguments["bins"], n_jobs=n_jobs
    )
    ctx.csv(report.samples_frame(), "ensemble_samples.csv")
    ctx.csv(report.histogram_frame(), "ensemble_histogram.csv")
    ctx.plot(
        QRCHelpers.save_histogram_plot, "ensemble.svg", report.histogram, report.bin_edges, report.fitted_counts,
        title=f"{cfg.map_kind.value} control={report.control:g}, {len(report.rmses)} reservoirs",
    )
    ctx.seeds["ensemble_base_seed"] = cfg.reservoir_seed
    ctx.results.update({
        "poisson_rate": report.poisson_rate,
        "median_rmse": float(np.median(report.rmses)),
        "n_failed": report.n_failed,
    })
    print(f"Ensemble of {ctx.arguments['samples']} reservoirs: Poisson rate = {report.poisson_rate:.3f}, failures = {report.n_failed}")


HANDLERS: Dict[str, Callable] = {
    "generate": cmd_generate,
    "lle": cmd_lle,
    "train": cmd_train,
    "predict": cmd_predict,
    "sweep-bifurcation": cmd_sweep_bifurcation,
    "sweep-grid": cmd_sweep_grid,
    "sweep-noise": cmd_sweep_noise,
    "sweep-ensemble": cmd_sweep_ensemble,
}


def run_command(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)

    run_settings = QRCSettings()
    out_root = args.out or run_settings.out_dir
    n_jobs = args.n_jobs if args.n_jobs is not None else run_settings.n_jobs

    try:
        cfg, inputs = resolve_run_config(args)
        ctx = RunContext(args.command, cfg, out_root, inputs, run_settings.save_plots, command_arguments(args))
        QRCHelpers.setup_logging(args.log_level or run_settings.log_level, str(ctx.out_dir / run_settings.log_file))
        logger.info(f"Running '{args.command}' ({cfg.map_params().label()}), output in {ctx.out_dir}")

        HANDLERS[args.command](ctx, args, n_jobs)
        ctx.write_manifest(run_settings.rng_algorithm)
        logger.info(f"'{args.command}' completed successfully")
        return 0

    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalGuardError as e:
        print(f"numerical guard failure: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    """Main entry point"""
    sys.exit(run_command())


if __name__ == "__main__":
    main()
