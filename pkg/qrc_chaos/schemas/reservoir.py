from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qrc_chaos.schemas.common import Boundary, Encoding, PropagationMode, QubitOrder


class ReservoirConfig(BaseModel):
    """Protocol hyperparameters of one quantum reservoir"""

    model_config = ConfigDict(frozen=True)

    d: int = Field(..., ge=1)
    n_rep: int = Field(..., ge=1)
    n_vars: int = Field(1, ge=1, le=2)
    n_hidden: int = Field(..., ge=1)
    tau: float = Field(1.0, gt=0.0)
    gamma: float = Field(0.0, ge=0.0)
    coupling: float = 1.0
    boundary: Boundary = Boundary.OPEN
    encoding: Encoding = Encoding.PI
    qubit_order: QubitOrder = QubitOrder.GROUPED
    seed: int = 0
    include_bias: bool = False
    lindblad_substeps: int = Field(200, ge=1)
    allow_wide_fields: bool = False
    # Explicit h-fields; when absent they are drawn from ``seed``
    fields: Optional[Tuple[float, ...]] = None

    @model_validator(mode="after")
    def _check_register(self) -> "ReservoirConfig":
        if self.n_qubits > 12:
            raise ValueError(f"n_I + n_H = {self.n_qubits} exceeds the 12-qubit limit")
        if self.fields is not None and len(self.fields) != self.n_qubits:
            raise ValueError(f"Expected {self.n_qubits} field values, got {len(self.fields)}")
        return self

    @property
    def n_inputs(self) -> int:
        return self.n_vars * self.n_rep

    @property
    def n_qubits(self) -> int:
        return self.n_inputs + self.n_hidden

    @property
    def n_features(self) -> int:
        return self.n_qubits + (1 if self.include_bias else 0)

    @property
    def mode(self) -> PropagationMode:
        return PropagationMode.LINDBLAD if self.gamma > 0 else PropagationMode.UNITARY

    def chain_fields(self) -> np.ndarray:
        if self.fields is not None:
            return np.asarray(self.fields, dtype=float)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(0.0, 1.0, size=self.n_qubits)


@dataclass
class FeatureVector:
    """Pauli-X expectations of every qubit after the last layer (+ bias entry when enabled)"""

    values: np.ndarray
    window_id: Optional[int] = None
