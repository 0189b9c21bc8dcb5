"""
Experiment drivers: bifurcation sweep, architecture grid, dephasing robustness,
random-Hamiltonian ensemble and the LLE / RMSE correlation.

Every driver works from a resolved ExperimentConfig. Work items (grid points,
cells, gamma values, ensemble samples) are independent and may run through
joblib; results are always assembled in index order.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from qrc_chaos.config.settings import MAX_QUBITS, ExperimentConfig
from qrc_chaos.schemas.chaos import NormalizedDataset
from qrc_chaos.schemas.common import MapKind, Region
from qrc_chaos.schemas.experiments import EnsembleReport, GridResult, NoiseResult, SweepPoint, SweepResult
from qrc_chaos.schemas.quantum import Propagator
from qrc_chaos.schemas.readout import PredictionReport, ReadoutModel
from qrc_chaos.schemas.reservoir import ReservoirConfig
from qrc_chaos.services import chaos_maps, quantum_sim, readout_training, reservoir_pipeline
from qrc_chaos.services.statistics import fit_poisson_histogram, spearman
from qrc_chaos.utils.errors import ConfigError, NumericalGuardError, QRCError

logger = logging.getLogger(__name__)

HENON_SWEEP_RANGE = (1.0, 1.4)
DEFAULT_GAMMAS = (0.0, 0.01, 0.05, 0.1, 0.5, 1.0)
DEFAULT_ENSEMBLE_SAMPLES = 200
MIN_CORRELATION_POINTS = 10


def _run_items(func: Callable, items: Sequence[tuple], n_jobs: int, desc: str) -> List:
    """Apply ``func`` to each argument tuple; output order matches ``items``"""
    if n_jobs == 1 or len(items) <= 1:
        return [func(*item) for item in tqdm(items, desc=desc, leave=False)]
    return Parallel(n_jobs=n_jobs)(delayed(func)(*item) for item in items)


def build_experiment_dataset(cfg: ExperimentConfig, control: Optional[float] = None) -> NormalizedDataset:
    return chaos_maps.build_dataset(
        cfg.map_params(control),
        n_train=cfg.n_train,
        train_len=cfg.train_len,
        n_test=cfg.n_test,
        test_len=cfg.test_len,
        seed=cfg.seed,
    )


def fit_and_score(
    cfg: ExperimentConfig,
    rcfg: ReservoirConfig,
    prop: Propagator,
    dataset: NormalizedDataset,
    n_jobs: int = 1,
) -> tuple[ReadoutModel, PredictionReport]:
    """Train the readout on ``dataset.train`` and score it on ``dataset.test``"""
    model = readout_training.train_readout(rcfg, prop, dataset, gap=cfg.gap, epsilon=cfg.epsilon, n_jobs=n_jobs)
    report = readout_training.evaluate(
        rcfg,
        prop,
        model,
        dataset.test,
        gap=cfg.gap,
        mode=cfg.prediction_mode,
        eval_start=cfg.eval_start,
        clamp=cfg.clamp_predictions,
        n_jobs=n_jobs,
    )
    return model, report


def expected_optimal_repetitions(kind: MapKind, gap: int) -> int:
    """Polynomial degree of the target in the newest input: 2 for x_t, 4 for x_{t+1}"""
    return chaos_maps.polynomial_degree(kind) ** (gap + 1)


def _check_grid(cfg: ExperimentConfig, grid: Sequence[float]) -> List[float]:
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigError("Sweep grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("Sweep grid must be strictly increasing")
    if cfg.map_kind == MapKind.LOGISTIC:
        lo, hi = 0.0, 4.0
    else:
        lo, hi = HENON_SWEEP_RANGE
    if grid[0] < lo or grid[-1] > hi:
        raise ConfigError(f"Sweep grid for the {cfg.map_kind.value} map must lie in [{lo}, {hi}]")
    return grid


def _sweep_point(cfg: ExperimentConfig, rcfg: ReservoirConfig, prop: Propagator, control: float) -> SweepPoint:
    params = cfg.map_params(control)
    dataset = build_experiment_dataset(cfg, control)
    _, report = fit_and_score(cfg, rcfg, prop, dataset)
    true_tail, predicted_tail = readout_training.denormalized_tail(dataset, report)
    lle = chaos_maps.largest_lyapunov(params, transient=cfg.lle_transient, n_iter=cfg.lle_iterations, seed=cfg.seed)
    attractor = chaos_maps.bifurcation_orbit(params, seed=cfg.seed)
    return SweepPoint(
        control=control,
        lle=lle.lambda_star,
        rmse=report.rmse,
        rmse_per_series=report.rmse_per_series,
        true_tail=true_tail,
        predicted_tail=predicted_tail,
        attractor=attractor,
    )


def bifurcation_sweep(cfg: ExperimentConfig, grid: Sequence[float], n_jobs: int = 1) -> SweepResult:
    """
    Train and evaluate a readout at every control value of ``grid``

    The reservoir (fields, tau, gamma) is fixed across the sweep; each point gets its
    own dataset drawn with ``cfg.seed``.
    """
    grid = _check_grid(cfg, grid)
    rcfg = cfg.reservoir_config()
    prop = reservoir_pipeline.build_propagator(rcfg)

    logger.info("=" * 60)
    logger.info(f"BIFURCATION SWEEP: {cfg.map_kind.value}, {len(grid)} points in [{grid[0]:g}, {grid[-1]:g}]")
    logger.info("=" * 60)

    points = _run_items(
        _sweep_point, [(cfg, rcfg, prop, control) for control in grid], n_jobs, desc="sweep"
    )
    for i, point in enumerate(points, 1):
        logger.info(f"[{i}/{len(points)}] control={point.control:.4f}: LLE={point.lle:+.4f}, RMSE={point.rmse:.4e}")

    return SweepResult(
        map_kind=cfg.map_kind,
        grid=grid,
        points=points,
        meta={"config": cfg.model_dump(mode="json"), "fields": rcfg.chain_fields().tolist()},
    )


def _grid_cell(cfg: ExperimentConfig, dataset: NormalizedDataset, d: int, n_rep: int) -> float:
    rcfg = cfg.reservoir_config(d=d, n_rep=n_rep)
    prop = reservoir_pipeline.build_propagator(rcfg)
    _, report = fit_and_score(cfg, rcfg, prop, dataset)
    return report.rmse


def hyperparameter_grid(
    cfg: ExperimentConfig,
    layers: Sequence[int] = (1, 2, 3),
    reps: Sequence[int] = (1, 2, 3, 4),
    control: Optional[float] = None,
    n_jobs: int = 1,
) -> GridResult:
    """
    Aggregate RMSE for every (d, n_rep) cell on one shared dataset

    Cells with more than MAX_QUBITS qubits are skipped (NaN), not failed.
    """
    layers, reps = [int(v) for v in layers], [int(v) for v in reps]
    if not layers or not reps or min(layers) < 1 or min(reps) < 1:
        raise ConfigError("Layer and repetition ranges must be non-empty and >= 1")

    control = cfg.control_value if control is None else control
    dataset = build_experiment_dataset(cfg, control)

    n_qubits = np.array([[cfg.n_vars * n_rep + cfg.n_hidden for n_rep in reps] for _ in layers])
    cells = [
        (i, j) for i in range(len(layers)) for j in range(len(reps)) if n_qubits[i, j] <= MAX_QUBITS
    ]
    if not cells:
        raise ConfigError(f"Every grid cell exceeds the {MAX_QUBITS}-qubit limit")

    logger.info("=" * 60)
    logger.info(
        f"ARCHITECTURE GRID: {cfg.map_kind.value} control={control:g}, gap={cfg.gap}, "
        f"layers={layers}, reps={reps} ({len(cells)} cells run)"
    )
    logger.info("=" * 60)

    values = _run_items(
        _grid_cell, [(cfg, dataset, layers[i], reps[j]) for i, j in cells], n_jobs, desc="grid"
    )
    rmse = np.full((len(layers), len(reps)), np.nan)
    for (i, j), value in zip(cells, values):
        rmse[i, j] = value
        logger.info(f"d={layers[i]}, n_rep={reps[j]}: RMSE={value:.4e}")

    result = GridResult(
        map_kind=cfg.map_kind,
        control=control,
        gap=cfg.gap,
        layers=layers,
        reps=reps,
        rmse=rmse,
        n_qubits=n_qubits,
        expected_optimal_repetitions=expected_optimal_repetitions(cfg.map_kind, cfg.gap),
        meta={"config": cfg.model_dump(mode="json")},
    )
    d_best, rep_best = result.argmin
    logger.info(
        f"Lowest RMSE at d={d_best}, n_rep={rep_best} "
        f"(polynomial-degree estimate of n_rep: {result.expected_optimal_repetitions})"
    )
    return result


def _noise_point(
    cfg: ExperimentConfig,
    rcfg: ReservoirConfig,
    dataset: NormalizedDataset,
    clean_model: ReadoutModel,
    gamma: float,
) -> tuple[float, float, str]:
    noisy_cfg = rcfg.model_copy(update={"gamma": gamma})
    prop = reservoir_pipeline.build_propagator(noisy_cfg)
    clean_report = readout_training.evaluate(
        noisy_cfg, prop, clean_model, dataset.test, gap=cfg.gap, mode=cfg.prediction_mode,
        eval_start=cfg.eval_start, clamp=cfg.clamp_predictions,
    )
    insitu_model, insitu_report = fit_and_score(cfg, noisy_cfg, prop, dataset)
    return clean_report.rmse, insitu_report.rmse, insitu_model.dataset_hash


def noise_robustness(
    cfg: ExperimentConfig,
    gammas: Sequence[float] = DEFAULT_GAMMAS,
    control: Optional[float] = None,
    n_jobs: int = 1,
) -> NoiseResult:
    """
    Compare a readout trained without dephasing against one trained in situ

    Clean-trained: W fit on gamma=0 features, scored on gamma features. In-situ: W fit
    and scored at the same gamma. Both arms consume the same dataset.
    """
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise ConfigError("gamma grid is empty")
    if min(gammas) < 0:
        raise ConfigError("gamma values must be >= 0")

    control = cfg.control_value if control is None else control
    dataset = build_experiment_dataset(cfg, control)
    rcfg = cfg.reservoir_config(gamma=0.0)
    clean_prop = reservoir_pipeline.build_propagator(rcfg, gamma=0.0)
    clean_model = readout_training.train_readout(rcfg, clean_prop, dataset, gap=cfg.gap, epsilon=cfg.epsilon)

    logger.info("=" * 60)
    logger.info(f"NOISE ROBUSTNESS: {cfg.map_kind.value} control={control:g}, gammas={gammas}")
    logger.info("=" * 60)

    results = _run_items(
        _noise_point, [(cfg, rcfg, dataset, clean_model, g) for g in gammas], n_jobs, desc="noise"
    )
    for gamma, (_, _, window_hash) in zip(gammas, results):
        if window_hash != clean_model.dataset_hash:
            raise NumericalGuardError(f"Noise arms consumed different training windows at gamma={gamma}")

    clean = np.array([c for c, _, _ in results])
    insitu = np.array([s for _, s, _ in results])
    for gamma, c, s in zip(gammas, clean, insitu):
        logger.info(f"gamma={gamma:g}: clean-trained RMSE={c:.4e}, in-situ RMSE={s:.4e}")

    return NoiseResult(
        map_kind=cfg.map_kind,
        control=control,
        gammas=gammas,
        rmse_clean_trained=clean,
        rmse_insitu_trained=insitu,
        window_hash=clean_model.dataset_hash,
        meta={"config": cfg.model_dump(mode="json")},
    )


def ensemble_fields(n_qubits: int, base_seed: int, index: int) -> np.ndarray:
    """h-fields of ensemble member ``index``; a pure function of (base_seed, index)"""
    rng = np.random.default_rng(np.random.SeedSequence([base_seed, index]))
    return quantum_sim.random_fields(n_qubits, rng=rng)


def _ensemble_sample(cfg: ExperimentConfig, dataset: NormalizedDataset, base_seed: int, index: int) -> tuple:
    try:
        n_qubits = cfg.n_vars * cfg.n_rep + cfg.n_hidden
        rcfg = cfg.reservoir_config(fields=tuple(ensemble_fields(n_qubits, base_seed, index)))
        prop = reservoir_pipeline.build_propagator(rcfg)
        _, report = fit_and_score(cfg, rcfg, prop, dataset)
        if not np.isfinite(report.rmse):
            raise NumericalGuardError("non-finite RMSE")
        return index, report.rmse, None
    except QRCError as e:
        return index, None, str(e)


def hamiltonian_ensemble(
    cfg: ExperimentConfig,
    n_samples: int = DEFAULT_ENSEMBLE_SAMPLES,
    control: Optional[float] = None,
    base_seed: Optional[int] = None,
    n_bins: int = 40,
    n_jobs: int = 1,
) -> EnsembleReport:
    """
    RMSE statistics over independently drawn reservoirs (uniform h_j in [0, 1])

    Failed samples are logged, counted and excluded from the histogram.
    """
    if n_samples < 10:
        raise ConfigError(f"n_samples must be >= 10, got {n_samples}")

    control = cfg.control_value if control is None else control
    base_seed = cfg.reservoir_seed if base_seed is None else base_seed
    dataset = build_experiment_dataset(cfg, control)

    logger.info("=" * 60)
    logger.info(f"HAMILTONIAN ENSEMBLE: {cfg.map_kind.value} control={control:g}, {n_samples} samples")
    logger.info("=" * 60)

    results = _run_items(
        _ensemble_sample, [(cfg, dataset, base_seed, i) for i in range(n_samples)], n_jobs, desc="ensemble"
    )

    rmses, sample_ids, failures = [], [], {}
    for i, (index, rmse, error) in enumerate(results, 1):
        if error is not None:
            logger.error(f"[{i}/{n_samples}] Sample {index}: failed - {error}")
            failures[index] = error
            continue
        rmses.append(rmse)
        sample_ids.append(index)

    if not rmses:
        raise NumericalGuardError(f"All {n_samples} ensemble samples failed")

    histogram = fit_poisson_histogram(rmses, n_bins=n_bins)
    logger.info(
        f"Ensemble done: {len(rmses)} ok, {len(failures)} failed, "
        f"median RMSE={np.median(rmses):.4e}, Poisson rate={histogram.rate:.3f}"
    )
    return EnsembleReport(
        map_kind=cfg.map_kind,
        control=control,
        rmses=np.asarray(rmses),
        sample_ids=sample_ids,
        n_bins=n_bins,
        histogram=histogram.counts,
        bin_edges=histogram.edges,
        poisson_rate=histogram.rate,
        fitted_counts=histogram.fitted,
        seeds=[(base_seed, i) for i in range(n_samples)],
        failures=failures,
        meta={"config": cfg.model_dump(mode="json")},
    )


def lle_rmse_correlation(sweep: SweepResult, region: Region = Region.CHAOTIC_ONLY) -> float:
    """Spearman correlation between LLE and aggregate RMSE over the selected sweep points"""
    if len(sweep.points) < MIN_CORRELATION_POINTS:
        raise ConfigError(
            f"Correlation needs a sweep of at least {MIN_CORRELATION_POINTS} points, have {len(sweep.points)}"
        )
    lle, rmse = sweep.lle, sweep.rmse
    if Region(region) == Region.CHAOTIC_ONLY:
        chaotic = lle > 0
        lle, rmse = lle[chaotic], rmse[chaotic]
    if lle.shape[0] < 2:
        raise ConfigError(f"Need at least 2 sweep points for a correlation, have {lle.shape[0]}")
    return spearman(lle, rmse)


def regime_averages(sweep: SweepResult) -> Dict[str, float]:
    """Mean RMSE over chaotic (LLE > 0) and regular (LLE <= 0) points; NaN when a regime is empty"""
    lle, rmse = sweep.lle, sweep.rmse
    chaotic = lle > 0
    return {
        "chaotic": float(np.mean(rmse[chaotic])) if chaotic.any() else float("nan"),
        "regular": float(np.mean(rmse[~chaotic])) if (~chaotic).any() else float("nan"),
        "n_chaotic": int(chaotic.sum()),
        "n_regular": int((~chaotic).sum()),
    }
