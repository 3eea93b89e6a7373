"""Dense two-qubit state machinery.

Conventions: natural units (hbar = k_B = 1); single-qubit basis is the
sigma^z eigenbasis with the excited state first, ``|up>, |down>``; the
joint basis is ``|up_k up_un>, |up_k down_un>, |down_k up_un>,
|down_k down_un>`` with the known qubit K as the first tensor factor.

Density matrices and operators are plain complex ``numpy`` arrays; the
``check_*`` helpers enforce the invariants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, NumericalError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma^{+-} = (sigma^x +- i sigma^y) / 2
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)

# two-qubit SWAP as a basis permutation
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]

Which = Literal["K", "U"]


def _positive_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class QubitSpec:
    """One two-level system: half-gap ``omega``, bath ``temperature``, decay ``gamma``."""

    omega: float
    temperature: float
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("omega", "temperature", "gamma"):
            object.__setattr__(self, name, _positive_finite(name, getattr(self, name)))


def excited_population(omega: float, temperature: float) -> float:
    """Thermal excited-state population ``1 / (1 + exp(2 omega / T))``."""
    omega = _positive_finite("omega", omega)
    temperature = _positive_finite("temperature", temperature)
    x = 2.0 * omega / temperature
    # exp overflow guard: population underflows cleanly to 0
    if x > 700:
        return math.exp(-x)
    return 1.0 / (1.0 + math.exp(x))


def thermal_state(spec: QubitSpec) -> np.ndarray:
    n = excited_population(spec.omega, spec.temperature)
    return np.diag([n, 1.0 - n]).astype(complex)


def local_hamiltonian(omega: float) -> np.ndarray:
    return omega * SZ


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with ``a`` (qubit K) as the first factor."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (2, 2) or b.shape != (2, 2):
        raise DomainError(f"tensor expects two 2x2 matrices, got {a.shape} and {b.shape}")
    return np.kron(a, b)


def partial_trace(rho: np.ndarray, keep: Which) -> np.ndarray:
    """Reduced state of qubit ``keep`` ("K" or "U") from a 4x4 joint state."""
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise DomainError(f"partial_trace expects a 4x4 matrix, got {rho.shape}")
    r = rho.reshape(2, 2, 2, 2)
    if keep == "K":
        return np.einsum("ajbj->ab", r)
    if keep == "U":
        return np.einsum("jajb->ab", r)
    raise DomainError(f"keep must be 'K' or 'U', got {keep!r}")


def total_hamiltonian(spec_k: QubitSpec, spec_u: QubitSpec) -> np.ndarray:
    """Bare two-qubit Hamiltonian ``omega_k sz x I + I x omega_un sz``."""
    return tensor(local_hamiltonian(spec_k.omega), I2) + tensor(I2, local_hamiltonian(spec_u.omega))


def internal_energy(rho: np.ndarray, h: np.ndarray) -> float:
    """``Tr[rho H]``; raises if the imaginary residue exceeds 1e-9."""
    rho = np.asarray(rho)
    h = np.asarray(h)
    if rho.shape != h.shape:
        raise DomainError(f"shape mismatch {rho.shape} vs {h.shape}")
    e = np.trace(rho @ h)
    if abs(e.imag) > 1e-9:
        raise NumericalError(f"Tr[rho H] has imaginary part {e.imag:.3e}")
    return float(e.real)


def check_hermitian(op: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] not in (2, 4):
        raise DomainError(f"expected a 2x2 or 4x4 matrix, got shape {op.shape}")
    dev = np.max(np.abs(op - op.conj().T))
    if dev > tol:
        raise NumericalError(f"operator not Hermitian (deviation {dev:.3e})")


def check_density_matrix(
    rho: np.ndarray,
    herm_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    psd_tol: float = PSD_TOL,
) -> None:
    """Raise ``NumericalError`` unless ``rho`` is Hermitian, unit-trace and PSD."""
    check_hermitian(rho, herm_tol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise NumericalError(f"trace deviates from 1 by {tr - 1.0:.3e}")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam[0] < -psd_tol:
        raise NumericalError(f"negative eigenvalue {lam[0]:.3e}")


def is_density_matrix(rho: np.ndarray, **tols) -> bool:
    try:
        check_density_matrix(rho, **tols)
    except (NumericalError, DomainError):
        return False
    return True


def block_state(populations, coherence: complex = 0.0) -> np.ndarray:
    """Two-qubit state with diagonal ``populations`` plus a ``|up down><down up|`` coherence.

    This is the general form reached by the cycle from a thermal product
    state: the XY coupling only mixes the single-excitation block.
    """
    p = np.asarray(populations, dtype=float)
    if p.shape != (4,):
        raise DomainError(f"need 4 populations, got shape {p.shape}")
    rho = np.diag(p).astype(complex)
    rho[1, 2] = coherence
    rho[2, 1] = np.conj(coherence)
    check_density_matrix(rho)
    return rho
