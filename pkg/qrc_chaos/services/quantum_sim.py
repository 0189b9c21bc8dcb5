"""
Dense density-matrix kernel for the XY-chain reservoir.

Convention: qubit 1 (site index 0) is the most-significant tensor factor, so a
basis index i has the state of site k in bit (N - 1 - k).
"""

import logging
from functools import reduce
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy import linalg

from qrc_chaos.schemas.common import Boundary, Encoding, PropagationMode
from qrc_chaos.schemas.quantum import DensityMatrix, Propagator, XYChainSpec
from qrc_chaos.utils.errors import ConfigError, NumericalGuardError
from qrc_chaos.utils.validators import (
    validate_finite,
    validate_qubit_count,
    validate_unit_interval,
    validate_unitary,
)

logger = logging.getLogger(__name__)

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

LINDBLAD_TRACE_TOL = 1e-6
# Largest register for which make_propagator precomputes exact sector-block exponentials
LINDBLAD_EXACT_MAX_QUBITS = 7


def site_operator(op: np.ndarray, site: int, n_qubits: int) -> np.ndarray:
    """Embed a single-qubit operator at ``site`` (0-based) of an n-qubit register"""
    return np.kron(np.kron(np.eye(2**site), op), np.eye(2 ** (n_qubits - site - 1)))


def chain_bonds(n_qubits: int, boundary: Boundary) -> List[tuple]:
    """Nearest-neighbour pairs; the periodic wrap bond is added only for N >= 3"""
    bonds = [(j, j + 1) for j in range(n_qubits - 1)]
    if boundary == Boundary.PERIODIC and n_qubits >= 3:
        bonds.append((n_qubits - 1, 0))
    return bonds


def build_hamiltonian(spec: XYChainSpec) -> np.ndarray:
    """
    Build the dense XY-chain Hamiltonian

    Args:
        spec: chain description

    Returns:
        2^N x 2^N Hermitian matrix (exactly symmetrized)
    """
    n = validate_qubit_count(spec.n_qubits)
    dim = 2**n
    H = np.zeros((dim, dim), dtype=complex)

    for j, k in chain_bonds(n, spec.boundary):
        H += spec.coupling * (
            site_operator(PAULI_X, j, n) @ site_operator(PAULI_X, k, n)
            + site_operator(PAULI_Y, j, n) @ site_operator(PAULI_Y, k, n)
        )
    for j, h in enumerate(spec.fields):
        H += h * site_operator(PAULI_Z, j, n)

    return 0.5 * (H + H.conj().T)


def excitation_counts(n_qubits: int) -> np.ndarray:
    """Number of sites in state |1> for every basis index"""
    idx = np.arange(2**n_qubits)
    counts = np.zeros_like(idx)
    for bit in range(n_qubits):
        counts += (idx >> bit) & 1
    return counts


def dephasing_mask(n_qubits: int) -> np.ndarray:
    """
    Elementwise form of sum_k (Z_k rho Z_k - rho): entry (i, j) is
    -2 * (number of sites where basis states i and j differ)
    """
    idx = np.arange(2**n_qubits)
    differing = np.bitwise_xor.outer(idx, idx)
    hamming = np.zeros_like(differing)
    for bit in range(n_qubits):
        hamming += (differing >> bit) & 1
    return -2.0 * hamming.astype(float)


def magnetization_sectors(n_qubits: int) -> List[np.ndarray]:
    """Basis indices grouped by excitation count 0..N"""
    counts = excitation_counts(n_qubits)
    return [np.flatnonzero(counts == m) for m in range(n_qubits + 1)]


def lindblad_block_propagators(
    H: np.ndarray,
    tau: float,
    gamma: float,
    mask: np.ndarray,
    n_qubits: int,
) -> Optional[List[Tuple[np.ndarray, np.ndarray, np.ndarray]]]:
    """
    Exact exp(tau L) of the dephasing master equation, one block per sector pair

    The XY chain conserves the excitation count and the dephasing term acts
    elementwise, so L maps every block rho[rows, cols] between two sectors onto
    itself. For X = rho[rows, cols] in row-major vec form,
    L = -i (H_a x I - I x H_b^T) + gamma diag(mask_ab). Only sector pairs a <= b
    are stored; block (b, a) of a Hermitian state is the adjoint of block (a, b).

    Returns:
        list of (row indices, column indices, exp(tau L)), or None when H
        couples different sectors
    """
    counts = excitation_counts(n_qubits)
    if np.any(np.abs(H[counts[:, None] != counts[None, :]]) > 1e-12):
        logger.debug("Hamiltonian couples excitation sectors; falling back to RK4")
        return None

    sectors = magnetization_sectors(n_qubits)
    blocks = []
    for a, rows in enumerate(sectors):
        H_a = H[np.ix_(rows, rows)]
        for cols in sectors[a:]:
            H_b = H[np.ix_(cols, cols)]
            generator = -1j * (
                np.kron(H_a, np.eye(cols.size)) - np.kron(np.eye(rows.size), H_b.T)
            ) + gamma * np.diag(mask[np.ix_(rows, cols)].ravel())
            blocks.append((rows, cols, linalg.expm(tau * generator)))
    validate_finite(np.concatenate([E.ravel() for _, _, E in blocks]), "Lindblad block propagators")
    return blocks


def make_propagator(
    spec: XYChainSpec,
    tau: float,
    mode: PropagationMode = PropagationMode.UNITARY,
    gamma: float = 0.0,
    n_substeps: int = 200,
    exact: Optional[bool] = None,
) -> Propagator:
    """
    Precompute the evolution over time ``tau``

    Unitary mode diagonalizes H once. Lindblad mode stores H plus the dephasing
    mask, and for registers up to LINDBLAD_EXACT_MAX_QUBITS also the sector-block
    exponentials; ``exact=False`` forces RK4 integration, ``exact=True`` requests
    the blocks at any size.
    """
    if tau <= 0:
        raise ConfigError(f"tau must be > 0, got {tau}")
    if gamma < 0:
        raise ConfigError(f"gamma must be >= 0, got {gamma}")
    if n_substeps < 1:
        raise ConfigError(f"n_substeps must be >= 1, got {n_substeps}")

    H = build_hamiltonian(spec)

    if mode == PropagationMode.UNITARY:
        validate_finite(H, "Hamiltonian")
        try:
            eigenvalues, V = linalg.eigh(H)
        except (linalg.LinAlgError, ValueError) as e:
            raise NumericalGuardError(f"Eigendecomposition of the Hamiltonian failed: {e}") from e
        U = (V * np.exp(-1j * eigenvalues * tau)) @ V.conj().T
        validate_unitary(U)
        logger.debug(f"Unitary propagator built for N={spec.n_qubits}, tau={tau}")
        return Propagator(spec=spec, tau=tau, mode=mode, hamiltonian=H, unitary=U)

    mask = dephasing_mask(spec.n_qubits)
    if exact is None:
        exact = spec.n_qubits <= LINDBLAD_EXACT_MAX_QUBITS
    blocks = lindblad_block_propagators(H, tau, gamma, mask, spec.n_qubits) if exact else None

    logger.debug(
        f"Lindblad propagator built for N={spec.n_qubits}, tau={tau}, gamma={gamma}, "
        f"{'sector blocks' if blocks is not None else f'RK4 with {n_substeps} substeps'}"
    )
    return Propagator(
        spec=spec,
        tau=tau,
        mode=mode,
        hamiltonian=H,
        gamma=gamma,
        n_substeps=n_substeps,
        dephasing_mask=mask,
        lindblad_blocks=blocks,
    )


def _lindblad_rhs(H: np.ndarray, rho: np.ndarray, gamma: float, mask: np.ndarray) -> np.ndarray:
    drho = -1j * (H @ rho - rho @ H)
    if gamma > 0:
        drho += gamma * mask * rho
    return drho


def _rk4_step(H: np.ndarray, rho: np.ndarray, dt: float, gamma: float, mask: np.ndarray) -> np.ndarray:
    k1 = _lindblad_rhs(H, rho, gamma, mask)
    k2 = _lindblad_rhs(H, rho + 0.5 * dt * k1, gamma, mask)
    k3 = _lindblad_rhs(H, rho + 0.5 * dt * k2, gamma, mask)
    k4 = _lindblad_rhs(H, rho + dt * k3, gamma, mask)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _apply_blocks(prop: Propagator, data: np.ndarray) -> np.ndarray:
    out = np.empty_like(data)
    for rows, cols, E in prop.lindblad_blocks:
        block = (E @ data[np.ix_(rows, cols)].ravel()).reshape(rows.size, cols.size)
        out[np.ix_(rows, cols)] = block
        if rows[0] != cols[0]:
            out[np.ix_(cols, rows)] = block.conj().T
    return 0.5 * (out + out.conj().T)


def _integrate_rk4(prop: Propagator, data: np.ndarray) -> np.ndarray:
    dt = prop.tau / prop.n_substeps
    out = data.copy()
    for _ in range(prop.n_substeps):
        out = _rk4_step(prop.hamiltonian, out, dt, prop.gamma, prop.dephasing_mask)
        out = 0.5 * (out + out.conj().T)
    return out


def apply(prop: Propagator, rho: DensityMatrix) -> DensityMatrix:
    """
    Evolve a state for one propagator time step

    Unitary: U rho U^dagger. Lindblad: the precomputed sector blocks when
    available, else fixed-step RK4 with ``prop.n_substeps`` steps; the result is
    re-Hermitized either way.
    """
    data = rho.data
    if data.shape != prop.hamiltonian.shape:
        raise ConfigError(
            f"State dimension {data.shape[0]} does not match propagator dimension {prop.hamiltonian.shape[0]}"
        )

    if prop.mode == PropagationMode.UNITARY:
        U = prop.unitary
        return DensityMatrix(U @ data @ U.conj().T)

    trace_in = np.trace(data)
    out = _apply_blocks(prop, data) if prop.exact_lindblad else _integrate_rk4(prop, data)

    drift = abs(np.trace(out) - trace_in)
    if not np.isfinite(drift) or drift > LINDBLAD_TRACE_TOL:
        raise NumericalGuardError(
            f"Lindblad integration drifted in trace by {drift:.3e}; increase lindblad_substeps"
        )
    return DensityMatrix(out)


def encode_qubit(x: float, encoding: Encoding = Encoding.PI) -> DensityMatrix:
    """
    Single-qubit state R_Y(theta)|0><0|R_Y(theta)^dagger

    theta = pi * x by default, so <Z> = cos(pi x) and <X> = sin(pi x);
    ``Encoding.ARCCOS`` uses theta = arccos(1 - 2x) so that <Z> = 1 - 2x.
    """
    x = validate_unit_interval(x, "encoded value")
    if encoding == Encoding.PI:
        theta = np.pi * x
    else:
        theta = np.arccos(1.0 - 2.0 * x)
    psi = np.array([np.cos(theta / 2.0), np.sin(theta / 2.0)], dtype=complex)
    return DensityMatrix(np.outer(psi, psi.conj()))


def inject(inputs: Iterable[DensityMatrix], hidden: DensityMatrix) -> DensityMatrix:
    """Tensor product (input_1 x ... x input_nI) x hidden; inputs take sites 1..nI"""
    factors = [q.data for q in inputs] + [hidden.data]
    n_qubits = sum(f.shape[0].bit_length() - 1 for f in factors)
    if n_qubits > 12:
        raise ConfigError(f"Injected register would have {n_qubits} qubits (limit 12)")
    return DensityMatrix(reduce(np.kron, factors))


def partial_trace_inputs(rho: DensityMatrix, n_inputs: int) -> DensityMatrix:
    """Trace out the first ``n_inputs`` sites, returning the hidden register state"""
    n_qubits = rho.n_qubits
    if not 0 <= n_inputs < n_qubits:
        raise ConfigError(f"Cannot trace out {n_inputs} of {n_qubits} qubits")
    dim_a = 2**n_inputs
    dim_b = 2 ** (n_qubits - n_inputs)
    reshaped = rho.data.reshape(dim_a, dim_b, dim_a, dim_b)
    return DensityMatrix(np.trace(reshaped, axis1=0, axis2=2))


def pauli_x_expectations(rho: DensityMatrix) -> np.ndarray:
    """Exact [<X_1>, ..., <X_N>]"""
    n_qubits = rho.n_qubits
    expectations = np.empty(n_qubits)
    for k in range(n_qubits):
        left, right = 2**k, 2 ** (n_qubits - k - 1)
        t = rho.data.reshape(left, 2, right, left, 2, right)
        reduced = np.einsum("aibajb->ij", t)
        expectations[k] = (reduced[0, 1] + reduced[1, 0]).real
    return np.clip(expectations, -1.0, 1.0)


def pauli_z_expectations(rho: DensityMatrix) -> np.ndarray:
    """Exact [<Z_1>, ..., <Z_N>] (diagnostics)"""
    n_qubits = rho.n_qubits
    populations = np.diag(rho.data).real
    idx = np.arange(rho.dim)
    return np.array(
        [np.sum(populations * (1 - 2 * ((idx >> (n_qubits - 1 - k)) & 1))) for k in range(n_qubits)]
    )


def spec_from_fields(
    fields: Iterable[float],
    coupling: float = 1.0,
    boundary: Boundary = Boundary.OPEN,
    allow_wide_fields: bool = False,
) -> XYChainSpec:
    fields = tuple(float(h) for h in fields)
    return XYChainSpec(
        n_qubits=len(fields),
        coupling=coupling,
        fields=fields,
        boundary=boundary,
        allow_wide_fields=allow_wide_fields,
    )


def random_fields(n_qubits: int, seed: Optional[int] = None, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Uniform h_j in [0, 1] (ordered phase)"""
    rng = rng if rng is not None else np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=n_qubits)
