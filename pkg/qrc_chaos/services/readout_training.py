"""
Linear readout: ridge fit W = Y M^T (M M^T + eps I)^-1, one-step / skip-step
prediction and RMSE scoring in teacher-forced or autonomous mode.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from sklearn.linear_model import Ridge

from qrc_chaos.schemas.chaos import NormalizedDataset, TimeSeries
from qrc_chaos.schemas.common import PredictionMode
from qrc_chaos.schemas.quantum import Propagator
from qrc_chaos.schemas.readout import PredictionReport, ReadoutModel
from qrc_chaos.schemas.reservoir import FeatureVector, ReservoirConfig
from qrc_chaos.services import chaos_maps, reservoir_pipeline
from qrc_chaos.utils.errors import ConfigError, NumericalGuardError
from qrc_chaos.utils.helpers import QRCHelpers

logger = logging.getLogger(__name__)

MODEL_FORMAT = "qrc-readout-v1"


def ridge_fit(M: np.ndarray, Y: np.ndarray, epsilon: float = 1e-8) -> ReadoutModel:
    """
    Fit the readout weights

    Args:
        M: feature matrix (features x s)
        Y: target matrix (targets x s); a 1-D array is a single target row
        epsilon: ridge parameter (> 0)

    Returns:
        ReadoutModel with W of shape (targets x features)
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if epsilon <= 0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    if M.shape[1] != Y.shape[1] or M.shape[1] < 1:
        raise ConfigError(f"Feature matrix has {M.shape[1]} columns but targets have {Y.shape[1]}")
    if not np.all(np.isfinite(M)):
        raise NumericalGuardError("Feature matrix contains non-finite entries")
    if not np.all(np.isfinite(Y)):
        raise NumericalGuardError("Target matrix contains non-finite entries")

    # Cholesky solve of the normal equations (primal or dual form, whichever is smaller)
    ridge = Ridge(alpha=epsilon, fit_intercept=False, solver="cholesky")
    ridge.fit(M.T, Y.T)
    W = np.atleast_2d(ridge.coef_).reshape(Y.shape[0], M.shape[0])

    if not np.all(np.isfinite(W)):
        raise NumericalGuardError("Ridge solve produced non-finite weights")

    logger.debug(f"Ridge fit: {M.shape[0]} features, {M.shape[1]} samples, eps={epsilon:g}, |W|={np.linalg.norm(W):.4e}")
    return ReadoutModel(W=W, epsilon=epsilon, n_samples=int(M.shape[1]), M=M, Y=Y)


def regularized_mse(W: np.ndarray, M: np.ndarray, Y: np.ndarray, epsilon: float) -> float:
    """Objective minimized by ``ridge_fit``: ||Y - W M||^2 + eps ||W||^2"""
    residual = np.atleast_2d(Y) - W @ np.atleast_2d(M)
    return float(np.sum(residual**2) + epsilon * np.sum(W**2))


def predict(model: ReadoutModel, features, clamp: bool = False) -> np.ndarray:
    """
    Linear readout W m

    ``features`` is a FeatureVector, a vector, or a matrix with one column per window.
    """
    m = features.values if isinstance(features, FeatureVector) else np.asarray(features, dtype=float)
    if m.shape[0] != model.n_features:
        raise ConfigError(f"Feature length {m.shape[0]} does not match readout width {model.n_features}")
    out = model.W @ m
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return out


def _clamp_windows(windows: np.ndarray) -> Tuple[np.ndarray, int]:
    clamped = np.clip(windows, 0.0, 1.0)
    return clamped, int(np.count_nonzero(clamped != windows))


def _evaluation_start(length: int, d: int, gap: int, eval_start: int) -> int:
    if length <= d + gap:
        raise ConfigError(f"Test series of length {length} is too short for d={d}, gap={gap}")
    if d + gap <= eval_start < length:
        return eval_start
    return d + gap


def _score(predictions: np.ndarray, truths: np.ndarray, target_index: Optional[int]) -> float:
    if target_index is None:
        diff = predictions - truths
    else:
        diff = predictions[:, target_index] - truths[:, target_index]
    return float(np.sqrt(np.mean(diff**2)))


def _teacher_forced_series(
    cfg: ReservoirConfig, prop: Propagator, model: ReadoutModel, values: np.ndarray,
    d: int, gap: int, start: int, clamp: bool,
) -> Tuple[np.ndarray, np.ndarray, int]:
    windows, targets = chaos_maps.series_windows(values, d, gap)
    # window i ends at index i + d - 1 and targets index i + d + gap
    first = start - d - gap
    windows, n_clamped = _clamp_windows(windows[first:])
    M = reservoir_pipeline.batch_features(cfg, prop, windows)
    predictions = predict(model, M, clamp=clamp).T
    return predictions, targets[first:], n_clamped


def _autonomous_series(
    cfg: ReservoirConfig, prop: Propagator, model: ReadoutModel, values: np.ndarray,
    d: int, gap: int, start: int,
) -> Tuple[np.ndarray, np.ndarray, int]:
    buffer, n_clamped = _clamp_windows(values[:start].copy())
    buffer = list(buffer)
    predictions = []
    for t in range(start, values.shape[0]):
        window = np.asarray(buffer[t - gap - d:t - gap])
        features = reservoir_pipeline.run_window(cfg, prop, window, window_id=t)
        prediction = predict(model, features, clamp=True)
        predictions.append(prediction)
        buffer.append(prediction)
    return np.asarray(predictions), values[start:].copy(), n_clamped


def _evaluate_series(
    cfg: ReservoirConfig, prop: Propagator, model: ReadoutModel, values: np.ndarray,
    d: int, gap: int, mode: PredictionMode, eval_start: int, clamp: bool,
):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    start = _evaluation_start(values.shape[0], d, gap, eval_start)
    if mode == PredictionMode.AUTONOMOUS:
        return _autonomous_series(cfg, prop, model, values, d, gap, start)
    return _teacher_forced_series(cfg, prop, model, values, d, gap, start, clamp)


def evaluate(
    cfg: ReservoirConfig,
    prop: Propagator,
    model: ReadoutModel,
    test_series: Sequence,
    d: Optional[int] = None,
    gap: int = 0,
    mode: PredictionMode = PredictionMode.TEACHER_FORCED,
    eval_start: int = 150,
    target_index: Optional[int] = 0,
    clamp: bool = False,
    n_jobs: int = 1,
) -> PredictionReport:
    """
    Score the readout on normalized test series

    Args:
        test_series: TimeSeries objects or arrays (length x n_vars), normalized
        d: window length (defaults to cfg.d)
        gap: skip-step horizon (0 predicts x_t from x_{t-d}..x_{t-1})
        mode: teacher-forced (true history) or autonomous (fed-back predictions)
        eval_start: 0-based index of the first scored step (150 scores t=151..200)
        target_index: variable the RMSE is computed on (None = all variables)

    Returns:
        PredictionReport; aggregate RMSE is the mean of per-series RMSEs
    """
    d = cfg.d if d is None else d
    if d != cfg.d:
        raise ConfigError(f"Window length d={d} does not match reservoir layers d={cfg.d}")
    if len(test_series) == 0:
        raise ConfigError("evaluate needs at least one test series")
    mode = PredictionMode(mode)

    arrays = [s.values if isinstance(s, TimeSeries) else np.asarray(s, dtype=float) for s in test_series]
    if n_jobs == 1 or len(arrays) == 1:
        results = [_evaluate_series(cfg, prop, model, v, d, gap, mode, eval_start, clamp) for v in arrays]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_evaluate_series)(cfg, prop, model, v, d, gap, mode, eval_start, clamp) for v in arrays
        )

    predictions = [p for p, _, _ in results]
    truths = [t for _, t, _ in results]
    rmses = np.array([_score(p, t, target_index) for p, t in zip(predictions, truths)])
    start = _evaluation_start(arrays[0].shape[0], d, gap, eval_start)

    report = PredictionReport(
        predictions=predictions,
        truths=truths,
        rmse_per_series=rmses,
        rmse=float(np.mean(rmses)),
        mode=mode,
        gap=gap,
        eval_start=start,
        target_index=target_index,
        clamped_inputs=sum(c for _, _, c in results),
    )
    logger.debug(f"Evaluated {len(arrays)} series ({mode.value}, gap={gap}): RMSE={report.rmse:.4e}")
    return report


def training_matrices(
    cfg: ReservoirConfig, prop: Propagator, dataset: NormalizedDataset, gap: int = 0, n_jobs: int = 1
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(windows, M, Y) for every training window of ``dataset``"""
    windows, targets = chaos_maps.stack_windows(dataset, cfg.d, gap, split="train")
    windows, _ = _clamp_windows(windows)
    M = reservoir_pipeline.batch_features(cfg, prop, windows, n_jobs=n_jobs)
    return windows, M, targets.T


def train_readout(
    cfg: ReservoirConfig,
    prop: Propagator,
    dataset: NormalizedDataset,
    gap: int = 0,
    epsilon: float = 1e-8,
    n_jobs: int = 1,
) -> ReadoutModel:
    """Build training features for ``dataset`` and fit the ridge readout"""
    windows, M, Y = training_matrices(cfg, prop, dataset, gap=gap, n_jobs=n_jobs)
    model = ridge_fit(M, Y, epsilon)
    model.cfg_hash = QRCHelpers.hash_text(cfg.model_dump_json())
    model.dataset_hash = QRCHelpers.hash_arrays(windows, Y)
    logger.info(f"Trained readout on {model.n_samples} windows ({model.n_features} features -> {model.n_targets} targets)")
    return model


def save_model(model: ReadoutModel, path: str | Path) -> Path:
    """Flat text: one JSON header line (dims, epsilon, provenance) then W row-major"""
    path = Path(path)
    header = json.dumps(
        {
            "format": MODEL_FORMAT,
            "rows": model.n_targets,
            "cols": model.n_features,
            "epsilon": model.epsilon,
            "n_samples": model.n_samples,
            "cfg_hash": model.cfg_hash,
            "dataset_hash": model.dataset_hash,
        },
        sort_keys=True,
    )
    np.savetxt(path, model.W, fmt="%.17e", header=header)
    logger.info(f"Saved readout model ({model.n_targets}x{model.n_features}) to {path}")
    return path


def load_model(path: str | Path) -> ReadoutModel:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Model file not found: {path}")
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    try:
        header = json.loads(first.lstrip("#").strip())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed model header at line 1, column {e.colno}") from e
    if header.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: unsupported model format {header.get('format')!r}")

    W = np.loadtxt(path, ndmin=2)
    if W.shape != (header["rows"], header["cols"]):
        raise ConfigError(f"{path}: weights have shape {W.shape}, header says ({header['rows']}, {header['cols']})")
    if not np.all(np.isfinite(W)):
        raise NumericalGuardError(f"{path}: weights contain non-finite entries")
    return ReadoutModel(
        W=W,
        epsilon=float(header["epsilon"]),
        n_samples=int(header["n_samples"]),
        cfg_hash=header["cfg_hash"],
        dataset_hash=header["dataset_hash"],
    )


def denormalized_tail(dataset: NormalizedDataset, report: PredictionReport, series: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """True and predicted evaluation-span values of one test series in raw units (first variable)"""
    true_raw = dataset.inverse(report.truths[series])[:, 0]
    pred_raw = dataset.inverse(report.predictions[series])[:, 0]
    return true_raw, pred_raw
