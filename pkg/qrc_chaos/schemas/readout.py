from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from qrc_chaos.schemas.common import PredictionMode


@dataclass
class ReadoutModel:
    """Linear readout x_hat = W m fitted by ridge regression"""

    W: np.ndarray  # shape (targets, features)
    epsilon: float = 1e-8
    n_samples: int = 0
    cfg_hash: str = ""
    dataset_hash: str = ""
    # Feature/target matrices the model was fit from (not persisted)
    M: Optional[np.ndarray] = field(default=None, repr=False)
    Y: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_targets(self) -> int:
        return int(self.W.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.W.shape[1])


@dataclass
class PredictionReport:
    predictions: List[np.ndarray]   # per series, shape (span, targets)
    truths: List[np.ndarray]        # per series, shape (span, targets)
    rmse_per_series: np.ndarray
    rmse: float
    mode: PredictionMode
    gap: int
    eval_start: int
    target_index: Optional[int] = 0  # None -> RMSE over all target components
    clamped_inputs: int = 0
