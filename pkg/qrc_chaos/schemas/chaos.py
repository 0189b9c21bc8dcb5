from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from qrc_chaos.schemas.common import MapKind


class MapParams(BaseModel):
    """Control parameters of a discrete chaotic map"""

    model_config = ConfigDict(frozen=True)

    kind: MapKind
    r: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "MapParams":
        if self.kind == MapKind.LOGISTIC:
            if self.r is None:
                raise ValueError("logistic map requires r")
            if not 0.0 <= self.r <= 4.0:
                raise ValueError(f"logistic r must lie in [0, 4], got {self.r}")
            object.__setattr__(self, "a", None)
            object.__setattr__(self, "b", None)
        else:
            if self.a is None:
                raise ValueError("Henon map requires a")
            if self.b is None:
                object.__setattr__(self, "b", 0.3)
            object.__setattr__(self, "r", None)
        return self

    @property
    def dim(self) -> int:
        return 1 if self.kind == MapKind.LOGISTIC else 2

    @property
    def control(self) -> float:
        return self.r if self.kind == MapKind.LOGISTIC else self.a

    def label(self) -> str:
        if self.kind == MapKind.LOGISTIC:
            return f"logistic(r={self.r:g})"
        return f"henon(a={self.a:g}, b={self.b:g})"


@dataclass
class TimeSeries:
    """Orbit of a map; ``values`` has shape (length, dim), row 0 is the initial state"""

    values: np.ndarray
    params: MapParams
    initial_state: np.ndarray

    @property
    def length(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


@dataclass
class NormalizedDataset:
    """
    Train/test orbits mapped into [0, 1] by a per-variable affine transform
    ``normalized = (raw - offset) * gain`` fitted on the pooled training series.
    """

    train: List[TimeSeries]
    test: List[TimeSeries]
    offset: np.ndarray
    gain: np.ndarray
    raw_bounds: np.ndarray  # shape (dim, 2): per-variable (min, max) over the training pool
    normalization: str      # "max" (logistic) or "minmax" (Henon)
    test_clamp_count: int = 0
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.offset) * self.gain

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) / self.gain + self.offset

    @property
    def dim(self) -> int:
        return int(self.offset.shape[0])


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_star: float  # nats per step
    n_iter: int
    transient: int
