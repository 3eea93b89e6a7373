"""Unitary and dissipative strokes of the two-stroke machine.

Both strokes use a fixed-step classical Runge-Kutta (RK4) integrator so
that results are deterministic for a given step. The thermalization
generator is time independent, so its RK4 step collapses to a single
16x16 propagator applied repeatedly to the row-major vectorized state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Literal

import numpy as np
from scipy.integrate import simpson

from . import qcore
from .errors import DomainError, NumericalError
from .qcore import I2, SM, SP, SWAP, QubitSpec

# post-stroke invariant tolerance; beyond this the caller must shrink dt
STROKE_TOL = 1e-8


class Kind(str, Enum):
    SWAP = "swap"
    MIX = "mix"


@dataclass(frozen=True)
class InteractionSpec:
    """Coupling used in the unitary stroke.

    For ``Kind.MIX`` the interaction is ``omega_I exp(-a t) (sx sx + sy sy)``;
    ``Kind.SWAP`` is an instantaneous full swap and ignores both numbers.
    """

    kind: Kind = Kind.SWAP
    omega_I: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not math.isfinite(self.omega_I) or self.omega_I < 0:
            raise DomainError(f"omega_I must be >= 0, got {self.omega_I!r}")
        if self.kind is Kind.MIX and not (math.isfinite(self.a) and self.a > 0):
            raise DomainError(f"mix interaction needs a > 0, got {self.a!r}")


@dataclass(frozen=True)
class StrokeConfig:
    tau_U: float
    tau_T: float
    dt: float

    def __post_init__(self):
        for name in ("tau_U", "tau_T", "dt"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")
        # small slack so that dt = tau/100 computed in floating point passes
        limit = min(self.tau_U, self.tau_T) / 100 * (1 + 1e-12)
        if self.dt > limit:
            raise DomainError(f"dt={self.dt} exceeds min(tau_U, tau_T)/100")


@dataclass(frozen=True)
class HeatLedger:
    """Heat drawn from the hot and cold baths during thermalization."""

    q_h: float
    q_c: float


def default_dt(tau_U: float, tau_T: float, omega_k: float, omega_I: float = 0.0) -> float:
    return min(min(tau_U, tau_T) / 1000, 0.01 / max(omega_k, omega_I, 1.0))


def _steps(duration: float, dt: float, even: bool = False) -> tuple[int, float]:
    n = max(1, math.ceil(duration / dt - 1e-9))
    if even and n % 2:
        n += 1
    return n, duration / n


def _finish(rho: np.ndarray, what: str) -> np.ndarray:
    try:
        qcore.check_density_matrix(rho, herm_tol=STROKE_TOL, trace_tol=STROKE_TOL, psd_tol=STROKE_TOL)
    except NumericalError as exc:
        raise NumericalError(f"{what}: {exc}; reduce dt") from exc
    return 0.5 * (rho + rho.conj().T)


# -- unitary stroke ---------------------------------------------------------


def swap_stroke(rho_tot: np.ndarray) -> np.ndarray:
    rho_tot = np.asarray(rho_tot, dtype=complex)
    if rho_tot.shape != (4, 4):
        raise DomainError(f"swap_stroke expects a 4x4 state, got {rho_tot.shape}")
    return SWAP @ rho_tot @ SWAP.conj().T


_XY = np.kron(qcore.SX, qcore.SX) + np.kron(qcore.SY, qcore.SY)


def interaction_hamiltonian(t: float, spec: InteractionSpec) -> np.ndarray:
    if spec.kind is not Kind.MIX:
        raise DomainError("interaction_hamiltonian is only defined for the mix interaction")
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    return spec.omega_I * math.exp(-spec.a * t) * _XY


def rk4(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    duration: float,
    dt: float,
) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` on ``[0, duration]`` with fixed-step RK4.

    The step is shrunk so that an integer number of steps lands exactly on
    ``duration``.
    """
    n, h = _steps(duration, dt)
    y = np.array(y0, dtype=complex)
    t = 0.0
    for i in range(n):
        t = i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def mix_stroke(
    rho_tot: np.ndarray,
    spec_k: QubitSpec,
    spec_u: QubitSpec,
    inter: InteractionSpec,
    cfg: StrokeConfig,
) -> np.ndarray:
    """Evolve under ``H0 + H_I(t)`` for ``cfg.tau_U`` (von Neumann equation)."""
    if inter.kind is not Kind.MIX:
        raise DomainError("mix_stroke needs a mix interaction")
    h0 = qcore.total_hamiltonian(spec_k, spec_u)
    hi = inter.omega_I * _XY
    a = inter.a

    def rhs(t, rho):
        h = h0 + math.exp(-a * t) * hi
        return -1j * (h @ rho - rho @ h)

    rho = rk4(rhs, rho_tot, cfg.tau_U, cfg.dt)
    return _finish(rho, "mix_stroke")


def subspace_transition_probability(
    spec_k: QubitSpec,
    spec_u: QubitSpec,
    inter: InteractionSpec,
    tau_U: float,
    dt: float,
) -> float:
    """Population transferred ``|up down> -> |down up>`` during the stroke (sin^2 theta).

    Integrates the Schroedinger equation restricted to the single-excitation
    block, where the mix Hamiltonian reads
    ``[[w_k - w_un, 2 w_I e^{-at}], [2 w_I e^{-at}, w_un - w_k]]``.
    """
    if inter.kind is not Kind.MIX:
        raise DomainError("subspace_transition_probability needs a mix interaction")
    d = spec_k.omega - spec_u.omega
    g0 = 2.0 * inter.omega_I
    a = inter.a

    def rhs(t, psi):
        g = g0 * math.exp(-a * t)
        return -1j * np.array([d * psi[0] + g * psi[1], g * psi[0] - d * psi[1]])

    psi = rk4(rhs, np.array([1.0, 0.0], dtype=complex), tau_U, dt)
    return float(min(1.0, max(0.0, abs(psi[1]) ** 2)))


# -- thermalization stroke --------------------------------------------------


def _left(a: np.ndarray) -> np.ndarray:
    # vec(A X) for row-major vec
    return np.kron(a, np.eye(a.shape[0]))


def _right(b: np.ndarray) -> np.ndarray:
    # vec(X B) for row-major vec
    return np.kron(np.eye(b.shape[0]), b.T)


def _jump_ops(which: Literal["h", "c"], spec_k: QubitSpec, spec_u: QubitSpec):
    if which == "h":
        spec = spec_k
        lower, raise_ = np.kron(SM, I2), np.kron(SP, I2)
    elif which == "c":
        spec = spec_u
        lower, raise_ = np.kron(I2, SM), np.kron(I2, SP)
    else:
        raise DomainError(f"bath must be 'h' or 'c', got {which!r}")
    boltz = math.exp(-2.0 * spec.omega / spec.temperature)
    return spec.gamma, boltz, lower, raise_


def dissipator(
    rho: np.ndarray, which: Literal["h", "c"], spec_k: QubitSpec, spec_u: QubitSpec
) -> np.ndarray:
    """Local detailed-balance dissipator of the hot ("h", acts on K) or cold ("c", acts on U) bath."""
    gamma, boltz, lo, up = _jump_ops(which, spec_k, spec_u)
    rho = np.asarray(rho, dtype=complex)
    ul = up @ lo
    lu = lo @ up
    decay = lo @ rho @ up - 0.5 * (ul @ rho + rho @ ul)
    excite = up @ rho @ lo - 0.5 * (lu @ rho + rho @ lu)
    return gamma * (decay + boltz * excite)


def dissipator_superop(which: Literal["h", "c"], spec_k: QubitSpec, spec_u: QubitSpec) -> np.ndarray:
    gamma, boltz, lo, up = _jump_ops(which, spec_k, spec_u)
    ul = up @ lo
    lu = lo @ up
    decay = _left(lo) @ _right(up) - 0.5 * (_left(ul) + _right(ul))
    excite = _left(up) @ _right(lo) - 0.5 * (_left(lu) + _right(lu))
    return gamma * (decay + boltz * excite)


def liouvillian(spec_k: QubitSpec, spec_u: QubitSpec) -> np.ndarray:
    """16x16 thermalization generator acting on row-major ``vec(rho)``."""
    h0 = qcore.total_hamiltonian(spec_k, spec_u)
    coherent = -1j * (_left(h0) - _right(h0))
    return coherent + dissipator_superop("h", spec_k, spec_u) + dissipator_superop("c", spec_k, spec_u)


def liouvillian_spectrum(spec_k: QubitSpec, spec_u: QubitSpec) -> np.ndarray:
    """Eigenvalues of the thermalization generator, sorted by decreasing real part."""
    lam = np.linalg.eigvals(liouvillian(spec_k, spec_u))
    return lam[np.lexsort((lam.imag, -lam.real))]


def spectral_gap(spec_k: QubitSpec, spec_u: QubitSpec, zero_tol: float = 1e-10) -> float:
    """Smallest nonzero ``|Re lambda|`` of the thermalization generator."""
    re = np.abs(liouvillian_spectrum(spec_k, spec_u).real)
    return float(np.min(re[re > zero_tol]))


def thermalization_timescale(spec_k: QubitSpec, spec_u: QubitSpec) -> float:
    """Population relaxation time ``1 / min_i gamma_i (1 + exp(-2 w_i / T_i))``."""
    rate_k = spec_k.gamma * (1.0 + math.exp(-2.0 * spec_k.omega / spec_k.temperature))
    rate_u = spec_u.gamma * (1.0 + math.exp(-2.0 * spec_u.omega / spec_u.temperature))
    return 1.0 / min(rate_k, rate_u)


def _rk4_propagator(gen: np.ndarray, h: float) -> np.ndarray:
    # RK4 applied to a linear autonomous system is the 4th-order Taylor polynomial
    hg = h * gen
    out = np.eye(gen.shape[0], dtype=complex)
    term = out
    for k in range(1, 5):
        term = term @ hg / k
        out = out + term
    return out


def thermalization_stroke(
    rho_tot: np.ndarray,
    spec_k: QubitSpec,
    spec_u: QubitSpec,
    cfg: StrokeConfig,
) -> tuple[np.ndarray, HeatLedger]:
    """Relax both qubits toward their baths for ``cfg.tau_T`` and book the heat.

    ``Q_h(c) = int Tr[D_h(c)(rho(t)) H0] dt`` is accumulated with Simpson
    weights on the integrator grid.
    """
    rho_tot = np.asarray(rho_tot, dtype=complex)
    if rho_tot.shape != (4, 4):
        raise DomainError(f"thermalization_stroke expects a 4x4 state, got {rho_tot.shape}")
    n, h = _steps(cfg.tau_T, cfg.dt, even=True)
    gen = liouvillian(spec_k, spec_u)
    step = _rk4_propagator(gen, h)
    h0t = qcore.total_hamiltonian(spec_k, spec_u).T.reshape(-1)
    heat_row = np.stack(
        [h0t @ dissipator_superop("h", spec_k, spec_u), h0t @ dissipator_superop("c", spec_k, spec_u)]
    )

    # evolve the deviation from the Gibbs fixed point so that a thermal input
    # stays exactly thermal and books exactly zero heat
    fixed = qcore.tensor(qcore.thermal_state(spec_k), qcore.thermal_state(spec_u)).reshape(-1)
    traj = np.empty((n + 1, 16), dtype=complex)
    v = rho_tot.reshape(-1) - fixed
    traj[0] = v
    for i in range(1, n + 1):
        v = step @ v
        traj[i] = v
    rates = (heat_row @ traj.T).real
    q_h = float(simpson(rates[0], dx=h))
    q_c = float(simpson(rates[1], dx=h))
    rho = _finish((v + fixed).reshape(4, 4), "thermalization_stroke")
    return rho, HeatLedger(q_h=q_h, q_c=q_c)
