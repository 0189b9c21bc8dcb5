"""
Guard functions for numerical invariants and argument ranges
"""

import logging

import numpy as np
from scipy import linalg

from qrc_chaos.utils.errors import ConfigError, NumericalGuardError

logger = logging.getLogger(__name__)


def validate_unit_interval(value: float, name: str = "value") -> float:
    """
    Check that a scalar lies in [0, 1]

    Returns:
        The value as float, raises ConfigError otherwise
    """
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def validate_finite(array: np.ndarray, name: str = "array") -> np.ndarray:
    """Raise NumericalGuardError if any entry is NaN or infinite"""
    array = np.asarray(array)
    if not np.all(np.isfinite(array)):
        raise NumericalGuardError(f"{name} contains non-finite entries")
    return array


def validate_qubit_count(n_qubits: int, limit: int = 12) -> int:
    if not 1 <= n_qubits <= limit:
        raise ConfigError(f"Number of qubits must lie in [1, {limit}], got {n_qubits}")
    return n_qubits


def validate_density_matrix(
    rho: np.ndarray,
    trace_tol: float = 1e-10,
    hermitian_tol: float = 1e-10,
    eigenvalue_floor: float = -1e-8,
) -> bool:
    """
    Check Hermiticity, unit trace and positivity of a density matrix

    Returns:
        True if valid, raises NumericalGuardError if invalid
    """
    rho = validate_finite(rho, "density matrix")
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NumericalGuardError(f"Density matrix must be square, got shape {rho.shape}")

    hermitian_error = np.max(np.abs(rho - rho.conj().T))
    if hermitian_error > hermitian_tol:
        raise NumericalGuardError(f"Density matrix is not Hermitian (max deviation {hermitian_error:.3e})")

    trace = np.trace(rho)
    if abs(trace - 1.0) > trace_tol:
        raise NumericalGuardError(f"Density matrix trace {trace.real:.12f} deviates from 1")

    min_eigenvalue = linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if min_eigenvalue < eigenvalue_floor:
        raise NumericalGuardError(f"Density matrix has negative eigenvalue {min_eigenvalue:.3e}")

    return True


def validate_unitary(U: np.ndarray, tol: float = 1e-10) -> bool:
    """Check U^dagger U = I within tol"""
    deviation = np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0])))
    if deviation > tol:
        raise NumericalGuardError(f"Propagator is not unitary (max deviation {deviation:.3e})")
    return True
