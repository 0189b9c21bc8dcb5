from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qrc_chaos.schemas.common import Boundary, PropagationMode


class XYChainSpec(BaseModel):
    """Transverse XY chain: H = J sum_j (X_j X_{j+1} + Y_j Y_{j+1}) + sum_j h_j Z_j"""

    model_config = ConfigDict(frozen=True)

    n_qubits: int = Field(..., ge=1, le=12)
    coupling: float = 1.0
    fields: Tuple[float, ...]
    boundary: Boundary = Boundary.OPEN
    allow_wide_fields: bool = False

    @model_validator(mode="after")
    def _check_fields(self) -> "XYChainSpec":
        if len(self.fields) != self.n_qubits:
            raise ValueError(f"Expected {self.n_qubits} field values, got {len(self.fields)}")
        if not self.allow_wide_fields and any(not 0.0 <= h <= 1.0 for h in self.fields):
            raise ValueError("Field strengths must lie in [0, 1] (ordered phase) unless allow_wide_fields is set")
        return self


@dataclass
class DensityMatrix:
    """Dense density matrix; qubit 1 is the most-significant tensor factor"""

    data: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def ground(cls, n_qubits: int) -> "DensityMatrix":
        """|0...0><0...0|"""
        data = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
        data[0, 0] = 1.0
        return cls(data)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=complex) / dim)

    def trace(self) -> float:
        return float(np.trace(self.data).real)


@dataclass(frozen=True)
class Propagator:
    """
    Fixed-time evolution operator of an XY chain.

    Unitary mode caches U = V exp(-i Lambda tau) V^dagger. Lindblad mode keeps H
    and the dephasing mask (Z_k rho Z_k summed over k, minus N rho, is rho * mask
    elementwise). When ``lindblad_blocks`` is set, each entry is
    (row indices, column indices, exp(tau L)) for one pair of magnetization sectors
    and evolution is a block-wise matrix-vector product; otherwise it falls
    back to fixed-step integration.
    """

    spec: XYChainSpec
    tau: float
    mode: PropagationMode
    hamiltonian: np.ndarray
    gamma: float = 0.0
    n_substeps: int = 200
    unitary: Optional[np.ndarray] = None
    dephasing_mask: Optional[np.ndarray] = None
    lindblad_blocks: Optional[List[Tuple[np.ndarray, np.ndarray, np.ndarray]]] = None

    @property
    def n_qubits(self) -> int:
        return self.spec.n_qubits

    @property
    def exact_lindblad(self) -> bool:
        return self.lindblad_blocks is not None
