from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from qrc_chaos.schemas.common import MapKind


@dataclass
class SweepPoint:
    control: float
    lle: float
    rmse: float
    rmse_per_series: np.ndarray
    true_tail: np.ndarray       # first test series over the evaluation span, raw units
    predicted_tail: np.ndarray  # same span, de-normalized predictions
    attractor: np.ndarray       # long-time orbit samples x_inf, raw units


@dataclass
class SweepResult:
    map_kind: MapKind
    grid: List[float]
    points: List[SweepPoint]
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def lle(self) -> np.ndarray:
        return np.array([p.lle for p in self.points])

    @property
    def rmse(self) -> np.ndarray:
        return np.array([p.rmse for p in self.points])

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"control": self.grid, "lle": self.lle, "rmse": self.rmse})

    def tails_frame(self) -> pd.DataFrame:
        """One row per evaluated step of the first test series at every grid point"""
        frames = [
            pd.DataFrame({
                "control": p.control,
                "step": np.arange(p.true_tail.shape[0]),
                "x_true": p.true_tail,
                "x_pred": p.predicted_tail,
            })
            for p in self.points
        ]
        return pd.concat(frames, ignore_index=True)


@dataclass
class GridResult:
    map_kind: MapKind
    control: float
    gap: int
    layers: List[int]
    reps: List[int]
    rmse: np.ndarray  # shape (len(layers), len(reps)); NaN marks skipped cells
    n_qubits: np.ndarray
    expected_optimal_repetitions: int
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def skipped(self) -> np.ndarray:
        return np.isnan(self.rmse)

    @property
    def argmin(self) -> Tuple[int, int]:
        """(d, n_rep) of the lowest-RMSE cell that ran"""
        i, j = np.unravel_index(np.nanargmin(self.rmse), self.rmse.shape)
        return self.layers[i], self.reps[j]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for i, d in enumerate(self.layers):
            for j, n_rep in enumerate(self.reps):
                rows.append({
                    "d": d,
                    "n_rep": n_rep,
                    "n_qubits": int(self.n_qubits[i, j]),
                    "rmse": self.rmse[i, j],
                    "skipped": bool(self.skipped[i, j]),
                })
        return pd.DataFrame(rows)


@dataclass
class NoiseResult:
    map_kind: MapKind
    control: float
    gammas: List[float]
    rmse_clean_trained: np.ndarray
    rmse_insitu_trained: np.ndarray
    window_hash: str  # shared by both arms
    meta: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "gamma": self.gammas,
            "rmse_clean_trained": self.rmse_clean_trained,
            "rmse_insitu_trained": self.rmse_insitu_trained,
        })


@dataclass
class EnsembleReport:
    map_kind: MapKind
    control: float
    rmses: np.ndarray          # successful samples, in sample order
    sample_ids: List[int]      # sample index of each entry of ``rmses``
    n_bins: int
    histogram: np.ndarray      # bin counts
    bin_edges: np.ndarray
    poisson_rate: float
    fitted_counts: np.ndarray
    seeds: List[Tuple[int, int]]  # (base seed, sample index) for every sample
    failures: Dict[int, str] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return len(self.failures)

    def samples_frame(self) -> pd.DataFrame:
        rmse_by_id = dict(zip(self.sample_ids, self.rmses))
        rows = []
        for base_seed, idx in self.seeds:
            rows.append({
                "sample": idx,
                "base_seed": base_seed,
                "rmse": rmse_by_id.get(idx, np.nan),
                "status": "failed" if idx in self.failures else "ok",
            })
        return pd.DataFrame(rows)

    def histogram_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "bin": np.arange(self.n_bins),
            "left": self.bin_edges[:-1],
            "right": self.bin_edges[1:],
            "count": self.histogram,
            "poisson_expected": self.fitted_counts,
        })


class RunManifest(BaseModel):
    """Everything needed to rerun an experiment and verify its outputs"""

    model_config = ConfigDict(extra="forbid")

    experiment: str
    tool_version: str
    config: Dict[str, Any]
    arguments: Dict[str, Any] = Field(default_factory=dict)  # subcommand arguments, e.g. layers / reps
    seeds: Dict[str, Any] = Field(default_factory=dict)
    decisions: Dict[str, Any] = Field(default_factory=dict)
    rng_algorithm: str = "numpy.random.PCG64"
    prediction_mode: Optional[str] = None
    results: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, str] = Field(default_factory=dict)   # file name -> sha256
    outputs: Dict[str, str] = Field(default_factory=dict)  # file name -> sha256
    system: Dict[str, Any] = Field(default_factory=dict)
