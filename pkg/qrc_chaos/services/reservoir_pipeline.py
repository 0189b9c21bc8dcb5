"""
Quantum reservoir pipeline: feed a window of past values through d layers of
encode -> inject -> evolve -> trace out, then read Pauli-X expectations.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from qrc_chaos.schemas.common import PropagationMode, QubitOrder
from qrc_chaos.schemas.quantum import DensityMatrix, Propagator
from qrc_chaos.schemas.reservoir import FeatureVector, ReservoirConfig
from qrc_chaos.services import quantum_sim
from qrc_chaos.utils.errors import ConfigError

logger = logging.getLogger(__name__)


def build_propagator(cfg: ReservoirConfig, gamma: Optional[float] = None) -> Propagator:
    """Propagator for ``cfg`` (optionally at a different dephasing strength)"""
    gamma = cfg.gamma if gamma is None else gamma
    spec = quantum_sim.spec_from_fields(
        cfg.chain_fields(),
        coupling=cfg.coupling,
        boundary=cfg.boundary,
        allow_wide_fields=cfg.allow_wide_fields,
    )
    mode = PropagationMode.LINDBLAD if gamma > 0 else PropagationMode.UNITARY
    return quantum_sim.make_propagator(spec, cfg.tau, mode=mode, gamma=gamma, n_substeps=cfg.lindblad_substeps)


def layer_inputs(cfg: ReservoirConfig, layer_values: np.ndarray) -> List[float]:
    """Site-ordered input values for one layer (each variable repeated n_rep times)"""
    layer_values = np.asarray(layer_values, dtype=float).reshape(-1)
    if layer_values.shape[0] != cfg.n_vars:
        raise ConfigError(f"Layer has {layer_values.shape[0]} values, expected {cfg.n_vars}")
    if cfg.qubit_order == QubitOrder.GROUPED:
        return [float(v) for v in np.repeat(layer_values, cfg.n_rep)]
    return [float(v) for v in np.tile(layer_values, cfg.n_rep)]


def _as_window(cfg: ReservoirConfig, window) -> np.ndarray:
    window = np.asarray(window, dtype=float)
    if window.ndim == 1:
        window = window.reshape(-1, cfg.n_vars)
    if window.shape != (cfg.d, cfg.n_vars):
        raise ConfigError(f"Window shape {window.shape} does not match (d={cfg.d}, n_vars={cfg.n_vars})")
    return window


def run_window(cfg: ReservoirConfig, prop: Propagator, window, window_id: Optional[int] = None) -> FeatureVector:
    """
    Run the full protocol on one window (oldest row first)

    Args:
        cfg: reservoir configuration
        prop: propagator built from ``cfg``
        window: array (d, n_vars) with values in [0, 1]

    Returns:
        FeatureVector of length n_I + n_H (+1 with bias)
    """
    window = _as_window(cfg, window)
    if prop.n_qubits != cfg.n_qubits:
        raise ConfigError(f"Propagator acts on {prop.n_qubits} qubits, config needs {cfg.n_qubits}")

    hidden = DensityMatrix.ground(cfg.n_hidden)
    rho = None
    for k in range(cfg.d):
        encoded = [quantum_sim.encode_qubit(v, cfg.encoding) for v in layer_inputs(cfg, window[k])]
        rho = quantum_sim.inject(encoded, hidden)
        rho = quantum_sim.apply(prop, rho)
        if k < cfg.d - 1:
            hidden = quantum_sim.partial_trace_inputs(rho, cfg.n_inputs)

    features = quantum_sim.pauli_x_expectations(rho)
    if cfg.include_bias:
        features = np.append(features, 1.0)
    return FeatureVector(values=features, window_id=window_id)


def _features_chunk(cfg: ReservoirConfig, prop: Propagator, windows: np.ndarray) -> np.ndarray:
    return np.column_stack([run_window(cfg, prop, w).values for w in windows])


def batch_features(
    cfg: ReservoirConfig,
    prop: Propagator,
    windows: Sequence,
    n_jobs: int = 1,
) -> np.ndarray:
    """
    Feature matrix M with one column per window, in input order

    Returns:
        array of shape (n_features, s)
    """
    windows = np.asarray(windows, dtype=float)
    if windows.shape[0] == 0:
        raise ConfigError("batch_features needs at least one window")

    if n_jobs == 1 or windows.shape[0] < 64:
        return _features_chunk(cfg, prop, windows)

    chunks = np.array_split(windows, min(windows.shape[0] // 32, 64))
    columns = Parallel(n_jobs=n_jobs)(delayed(_features_chunk)(cfg, prop, chunk) for chunk in chunks)
    return np.hstack(columns)


def feature_frame(M: np.ndarray) -> pd.DataFrame:
    """Feature matrix as a frame: row = feature index, column = window"""
    frame = pd.DataFrame(M, columns=[f"w{i}" for i in range(M.shape[1])])
    frame.insert(0, "feature", np.arange(M.shape[0]))
    return frame
