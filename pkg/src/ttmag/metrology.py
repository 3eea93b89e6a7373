"""Sensitivity coefficients, Fisher information and error propagation.

Everything here is closed form except :func:`qfi_from_fidelity`, which
differentiates the fidelity numerically and serves as an independent check
of the closed forms, and :func:`bessel_j`, an ascending-series Bessel
function of complex order used by :func:`f2`.
"""

from __future__ import annotations

import cmath
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma, rgamma

from .errors import DomainError, NumericalError
from .qcore import QubitSpec

BESSEL_MAX_TERMS = 200
BESSEL_RTOL = 1e-16
F2_MAX_Y = 10.0


def _sech(x: float) -> float:
    ax = abs(x)
    if ax > 700:
        return 0.0
    return 1.0 / math.cosh(ax)


def f1(x: float) -> float:
    """``x sech^2(x)``."""
    return x * _sech(x) ** 2


def bessel_j(nu: complex, z: float) -> complex:
    """Bessel function of the first kind ``J_nu(z)`` for complex order and real ``z > 0``.

    Sums the ascending series ``sum_m (-1)^m (z/2)^(2m+nu) / (m! Gamma(m+nu+1))``
    until a term falls below ``1e-16`` of the partial sum.
    """
    if not z > 0:
        raise DomainError(f"bessel_j needs z > 0, got {z!r}")
    half = 0.5 * z
    term = cmath.exp(nu * math.log(half)) * complex(rgamma(nu + 1))
    total = term
    q = -half * half
    for m in range(1, BESSEL_MAX_TERMS):
        term *= q / (m * (m + nu))
        total += term
        # terms shrink monotonically once m exceeds z/2
        if m > half and abs(term) < BESSEL_RTOL * abs(total):
            return total
    raise NumericalError(f"Bessel series for nu={nu}, z={z} did not converge in {BESSEL_MAX_TERMS} terms")


def f2(x: float, y: float) -> float:
    """Population-transfer factor of the exponentially switched XY coupling.

    ``x = (omega_un - omega_k) / a`` and ``y = omega_I / a``. The long-time
    limit of the second Bessel factor is taken from its small-argument
    asymptote, which leaves
    ``pi^2 y^2 sech^2(pi x) |J_{1/2+ix}(2y)|^2 / (y |Gamma(1/2+ix)|^2)``.
    Supported for ``0 < y <= 10``; cancellation in the alternating series
    limits the absolute accuracy to about 1e-9 at the upper end (1e-13 for
    ``y <= 5``).
    """
    if not y > 0:
        raise DomainError(f"f2 needs y > 0, got {y!r}")
    if y > F2_MAX_Y:
        raise NumericalError(f"f2 supports y <= {F2_MAX_Y}; series cancellation too large at y={y}")
    nu = complex(0.5, x)
    j = bessel_j(nu, 2.0 * y)
    g2 = abs(complex(gamma(nu))) ** 2
    if g2 == 0.0:
        return 0.0
    limit = 1.0 / (y * g2)
    return (math.pi * y * _sech(math.pi * x)) ** 2 * abs(j) ** 2 * limit


def alpha_swap(spec_u: QubitSpec, t_h: float) -> tuple[float, float]:
    """``(alpha_h, alpha_c)`` for the swap machine at its transition point."""
    inv_h = f1(spec_u.omega / spec_u.temperature)
    inv_c = (spec_u.temperature / t_h) * inv_h
    return 1.0 / inv_h, 1.0 / inv_c


def alpha_mix(spec_u: QubitSpec, t_h: float, omega_I: float, a: float) -> tuple[float, float]:
    """``(alpha_h, alpha_c)`` for the mix machine; adds the ``f2`` transfer factor."""
    omega_un, t_c = spec_u.omega, spec_u.temperature
    omega_k_star = omega_un * t_h / t_c
    inv_h = f1(omega_un / t_c) * f2((omega_un - omega_k_star) / a, omega_I / a)
    if inv_h == 0.0:
        raise DomainError("heat is insensitive to omega_k at the transition (f2 = 0)")
    return 1.0 / inv_h, t_h / (t_c * inv_h)


def alpha_bar_h(omega_un: float, t_c: float) -> float:
    x = omega_un / t_c
    if not x > 0:
        raise DomainError(f"alpha_bar_h needs omega_un/T_c > 0, got {x!r}")
    return (x * _sech(x)) ** -2


def qfi_thermal_tls(omega_un: float, t_c: float) -> float:
    """Quantum Fisher information of a thermal qubit w.r.t. its half-gap."""
    return _sech(omega_un / t_c) ** 2 / t_c**2


def cramer_rao_relative(omega_un: float, t_c: float) -> float:
    """Lower bound on ``Delta omega_un / omega_un`` for a single thermal-state measurement."""
    return 1.0 / (omega_un * math.sqrt(qfi_thermal_tls(omega_un, t_c)))


def qfi_population(omega_un: float, t_c: float) -> float:
    """Fisher information of the excited population at the transition, ``4 cosh^2(w/T)``."""
    if omega_un < 0:
        raise DomainError("omega_un must be >= 0")
    return 4.0 * math.cosh(omega_un / t_c) ** 2


def heat_error_bound(omega_un: float, t_c: float, m_q: int = 1) -> float:
    """Cramer-Rao floor on the hot-bath heat error after ``m_q`` repetitions."""
    if int(m_q) != m_q or m_q < 1:
        raise DomainError(f"m_q must be a positive integer, got {m_q!r}")
    if omega_un < 0:
        raise DomainError("omega_un must be >= 0")
    return 0.5 * _sech(omega_un / t_c) / math.sqrt(m_q)


@dataclass(frozen=True)
class FisherReport:
    qfi: float
    cramer_rao_relative: float
    alpha_bar_h: float


def fisher_report(omega_un: float, t_c: float) -> FisherReport:
    return FisherReport(
        qfi=qfi_thermal_tls(omega_un, t_c),
        cramer_rao_relative=cramer_rao_relative(omega_un, t_c),
        alpha_bar_h=alpha_bar_h(omega_un, t_c),
    )


# -- fidelity route ---------------------------------------------------------


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    lam, vec = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (vec * np.sqrt(np.clip(lam, 0.0, None))) @ vec.conj().T


def fidelity(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """Uhlmann root fidelity ``Tr sqrt(sqrt(rho1) rho2 sqrt(rho1))``."""
    s = _sqrtm_psd(np.asarray(rho1, dtype=complex))
    inner = s @ np.asarray(rho2, dtype=complex) @ s
    lam = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(lam, 0.0, None))))


def _fidelity_curvature(family, at: float, h: float, rank_tol: float) -> float:
    states = [np.asarray(family(p), dtype=complex) for p in (at - h, at, at + h)]
    for rho in states:
        lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
        if lam[0] <= rank_tol:
            raise DomainError("qfi_from_fidelity needs full-rank states")
    centre = states[1]
    fp = fidelity(states[2], centre) ** 2
    fm = fidelity(states[0], centre) ** 2
    return -2.0 * (fp - 2.0 + fm) / h**2


def qfi_from_fidelity(
    family: Callable[[float], np.ndarray],
    at: float,
    h: float = 1e-3,
    richardson: bool = True,
    rank_tol: float = 1e-12,
) -> float:
    """QFI of ``family`` at ``at`` from the curvature of the fidelity.

    Uses the squared fidelity ``F^2``, whose second derivative at coincidence
    equals ``-F_Q / 2``; ``F(rho, rho) = 1`` is used exactly for the centre.
    With ``richardson`` the steps ``h`` and ``h/2`` are combined to cancel the
    leading ``O(h^2)`` truncation error.
    """
    coarse = _fidelity_curvature(family, at, h, rank_tol)
    if not richardson:
        return coarse
    fine = _fidelity_curvature(family, at, 0.5 * h, rank_tol)
    return (4.0 * fine - coarse) / 3.0


# -- error propagation ------------------------------------------------------


def _nonneg(name: str, v: float) -> float:
    v = float(v)
    if not (math.isfinite(v) and v >= 0):
        raise DomainError(f"{name} must be finite and >= 0, got {v!r}")
    return v


@dataclass(frozen=True)
class ErrorBudget:
    """rms errors entering the estimate.

    ``d_Q`` maps a heat channel ("h", "c" or "w") to the error of that
    measurement.
    """

    d_omega_k_star: float = 0.0
    d_T_h: float = 0.0
    d_T_c: float = 0.0
    d_omega_prime: float = 0.0
    d_Q: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("d_omega_k_star", "d_T_h", "d_T_c", "d_omega_prime"):
            object.__setattr__(self, name, _nonneg(name, getattr(self, name)))
        object.__setattr__(self, "d_Q", {k: _nonneg(f"d_Q[{k}]", v) for k, v in dict(self.d_Q).items()})


def propagate_full_error(
    omega_k_star: float, t_h: float, t_c: float, budget: ErrorBudget
) -> tuple[float, float]:
    """rms error of ``omega_un = omega_k* T_c / T_h``; returns ``(absolute, relative)``."""
    for name, v in (("omega_k_star", omega_k_star), ("t_h", t_h), ("t_c", t_c)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    absolute = math.sqrt(
        (t_c / t_h * budget.d_omega_k_star) ** 2
        + (omega_k_star * t_c / t_h**2 * budget.d_T_h) ** 2
        + (omega_k_star / t_h * budget.d_T_c) ** 2
    )
    relative = math.sqrt(
        (budget.d_omega_k_star / omega_k_star) ** 2 + (budget.d_T_h / t_h) ** 2 + (budget.d_T_c / t_c) ** 2
    )
    return absolute, relative


def combine_transition_error(
    d_omega_prime: float,
    alphas: Mapping[str, float] | Sequence[float],
    d_Q: Mapping[str, float] | Sequence[float],
) -> float:
    """``Delta omega_k* = sqrt(Delta omega'^2 + sum_i alpha_i^2 Delta Q_i^2)``."""
    if not isinstance(alphas, Mapping):
        alphas = dict(enumerate(alphas))
    if not isinstance(d_Q, Mapping):
        d_Q = dict(enumerate(d_Q))
    total = _nonneg("d_omega_prime", d_omega_prime) ** 2
    for key, dq in d_Q.items():
        if key not in alphas:
            raise DomainError(f"no sensitivity coefficient for channel {key!r}")
        total += (_nonneg("alpha", alphas[key]) * _nonneg("d_Q", dq)) ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class RelativeErrorReport:
    relative: float
    readout_term: float
    heat_term: float
    ratio: float
    heat_negligible: bool


def protocol_relative_error(
    omega_un: float,
    t_c: float,
    t_h: float,
    d_omega_prime: float,
    d_q_h: float,
    F: float = 1.0,
    negligible_ratio: float = 0.1,
) -> RelativeErrorReport:
    """Relative error of the estimate when only ``Q_h`` locates the transition.

    ``F`` is 1 for the swap machine and ``1 / f2`` for the mix machine.
    ``ratio`` compares the heat-measurement term to the readout term; the
    heat term is flagged negligible below ``negligible_ratio``.
    """
    if not F >= 1.0 - 1e-9:
        raise DomainError(f"F must be >= 1, got {F!r}")
    readout = (t_c / t_h * d_omega_prime / omega_un) ** 2
    heat = (F * alpha_bar_h(omega_un, t_c) * d_q_h / t_h) ** 2
    ratio = heat / readout if readout > 0 else math.inf
    return RelativeErrorReport(
        relative=math.sqrt(readout + heat),
        readout_term=math.sqrt(readout),
        heat_term=math.sqrt(heat),
        ratio=ratio,
        heat_negligible=ratio < negligible_ratio,
    )
