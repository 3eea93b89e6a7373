"""Full two-stroke cycles, closed-form heats and operating regimes."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import dynamics, qcore
from .dynamics import InteractionSpec, Kind, StrokeConfig
from .errors import ClassificationError, ConfigError, DomainError, NumericalError
from .qcore import QubitSpec

IDLE_TOL = 1e-7
CYCLE_TOL = 1e-6
# tau_T default in units of the thermalization timescale
TAU_T_FACTOR = 20.0


class Regime(str, Enum):
    ENGINE = "engine"
    REFRIGERATOR = "refrigerator"
    ACCELERATOR = "accelerator"
    HEATER = "heater"
    IDLE = "idle"


@dataclass(frozen=True)
class MachineConfig:
    """Complete machine description.

    ``spec_k`` is the known qubit coupled to the hot bath, ``spec_u`` the
    unknown one coupled to the cold bath. Stroke durations and the step left
    as ``None`` are resolved on demand (see :attr:`strokes`), so that
    replacing ``omega_k`` during a sweep re-derives the default step.
    """

    spec_k: QubitSpec
    spec_u: QubitSpec
    inter: InteractionSpec = InteractionSpec()
    tau_U: float | None = None
    tau_T: float | None = None
    dt: float | None = None

    def __post_init__(self):
        if not self.spec_u.temperature < self.spec_k.temperature:
            raise ConfigError(
                f"cold bath must be colder than hot bath (T_c={self.spec_u.temperature}, "
                f"T_h={self.spec_k.temperature})"
            )
        try:
            self.strokes
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def strokes(self) -> StrokeConfig:
        tau_U = self.tau_U if self.tau_U is not None else 10.0 / self.inter.a
        tau_T = self.tau_T
        if tau_T is None:
            tau_T = TAU_T_FACTOR * dynamics.thermalization_timescale(self.spec_k, self.spec_u)
        dt = self.dt
        if dt is None:
            omega_I = self.inter.omega_I if self.inter.kind is Kind.MIX else 0.0
            dt = dynamics.default_dt(tau_U, tau_T, self.spec_k.omega, omega_I)
        return StrokeConfig(tau_U=tau_U, tau_T=tau_T, dt=dt)

    def with_omega_k(self, omega_k: float) -> "MachineConfig":
        return dataclasses.replace(self, spec_k=dataclasses.replace(self.spec_k, omega=omega_k))

    @property
    def transition_point(self) -> float:
        """Exact ``omega_k*`` where the two thermal populations coincide."""
        return self.spec_u.omega * self.spec_k.temperature / self.spec_u.temperature


@dataclass(frozen=True)
class CycleResult:
    q_h: float
    q_c: float
    w: float
    regime: Regime
    sin2theta: float = 1.0
    # master-equation diagnostics; None for closed-form results
    w_unitary: float | None = None
    closure_error: float | None = None
    energy_residual: float | None = None
    two_point_error: float | None = None
    tau_th: float | None = None


def classify_regime(
    q_h: float, q_c: float, w: float, tol: float = IDLE_TOL, w_rel_tol: float = 1e-6
) -> Regime:
    """Map heat and work signs onto an operating regime.

    Everything within ``tol`` of zero is idle. Work smaller than ``w_rel_tol``
    times the largest heat counts as zero and lands on the accelerator side
    of the engine/accelerator boundary (``omega_k = omega_un``).
    """
    if abs(w + q_h + q_c) > tol:
        raise ClassificationError(f"first law violated: W + Q_h + Q_c = {w + q_h + q_c:.3e}")
    scale = max(abs(q_h), abs(q_c))
    if scale <= tol and abs(w) <= tol:
        return Regime.IDLE
    zero_w = abs(w) <= w_rel_tol * scale
    if q_h > 0 and q_c < 0:
        if zero_w or w > 0:
            return Regime.ACCELERATOR
        return Regime.ENGINE
    if q_h < 0 and q_c > 0 and w > 0 and not zero_w:
        return Regime.REFRIGERATOR
    if q_h < 0 and q_c < 0 and w > 0:
        return Regime.HEATER
    raise ClassificationError(f"no regime for signs Q_h={q_h:.3e}, Q_c={q_c:.3e}, W={w:.3e}")


def efficiency(q_h: float, q_c: float) -> float:
    """Engine efficiency ``|W| / Q_h``; only defined in the engine regime."""
    w = -(q_h + q_c)
    if not (q_h > 0 and q_c < 0 and w < 0):
        raise DomainError(f"efficiency needs an engine (Q_h={q_h:.3e}, Q_c={q_c:.3e})")
    return -w / q_h


def analytic_theta_heats(
    spec_k: QubitSpec, spec_u: QubitSpec, sin2theta: float, tol: float = IDLE_TOL
) -> CycleResult:
    """Closed-form heats for a rotation by ``theta`` in the single-excitation block."""
    if not (0.0 <= sin2theta <= 1.0):
        raise DomainError(f"sin2theta must lie in [0, 1], got {sin2theta!r}")
    n_k = qcore.excited_population(spec_k.omega, spec_k.temperature)
    n_u = qcore.excited_population(spec_u.omega, spec_u.temperature)
    q_h = 2.0 * spec_k.omega * (n_k - n_u) * sin2theta
    q_c = 2.0 * spec_u.omega * (n_u - n_k) * sin2theta
    w = -(q_h + q_c)
    return CycleResult(q_h, q_c, w, classify_regime(q_h, q_c, w, tol), sin2theta)


def analytic_swap_heats(spec_k: QubitSpec, spec_u: QubitSpec, tol: float = IDLE_TOL) -> CycleResult:
    return analytic_theta_heats(spec_k, spec_u, 1.0, tol)


def initial_state(cfg: MachineConfig) -> np.ndarray:
    return qcore.tensor(qcore.thermal_state(cfg.spec_k), qcore.thermal_state(cfg.spec_u))


def unitary_stroke(rho: np.ndarray, cfg: MachineConfig) -> np.ndarray:
    if cfg.inter.kind is Kind.SWAP:
        return dynamics.swap_stroke(rho)
    return dynamics.mix_stroke(rho, cfg.spec_k, cfg.spec_u, cfg.inter, cfg.strokes)


def mixing_probability(cfg: MachineConfig) -> float:
    """``sin^2 theta`` of the configured unitary stroke (1 for swap)."""
    if cfg.inter.kind is Kind.SWAP:
        return 1.0
    s = cfg.strokes
    return dynamics.subspace_transition_probability(cfg.spec_k, cfg.spec_u, cfg.inter, s.tau_U, s.dt)


def run_cycle(cfg: MachineConfig, tol: float = IDLE_TOL, strict: bool = True) -> CycleResult:
    """One full cycle from the thermal product state, heats from the master equation.

    With ``strict`` the cycle must close: the post-thermalization state has
    to match the initial state to 1e-6 in max-norm.
    """
    h0 = qcore.total_hamiltonian(cfg.spec_k, cfg.spec_u)
    hk = qcore.local_hamiltonian(cfg.spec_k.omega)
    rho0 = initial_state(cfg)
    rho_u = unitary_stroke(rho0, cfg)
    rho_t, ledger = dynamics.thermalization_stroke(rho_u, cfg.spec_k, cfg.spec_u, cfg.strokes)

    closure = float(np.max(np.abs(rho_t - rho0)))
    if strict and closure > CYCLE_TOL:
        raise NumericalError(
            f"cycle does not close (max deviation {closure:.2e} > {CYCLE_TOL}); increase tau_T"
        )
    e0 = qcore.internal_energy(rho0, h0)
    e_u = qcore.internal_energy(rho_u, h0)
    e_t = qcore.internal_energy(rho_t, h0)
    two_point = qcore.internal_energy(qcore.partial_trace(rho_t, "K"), hk) - qcore.internal_energy(
        qcore.partial_trace(rho_u, "K"), hk
    )
    q_h, q_c = ledger.q_h, ledger.q_c
    w = -(q_h + q_c)
    return CycleResult(
        q_h=q_h,
        q_c=q_c,
        w=w,
        regime=classify_regime(q_h, q_c, w, tol),
        sin2theta=mixing_probability(cfg),
        w_unitary=e_u - e0,
        closure_error=closure,
        energy_residual=(e_t - e_u) - (q_h + q_c),
        two_point_error=abs(two_point - q_h),
        tau_th=dynamics.thermalization_timescale(cfg.spec_k, cfg.spec_u),
    )


def analytic_cycle(cfg: MachineConfig, tol: float = IDLE_TOL) -> CycleResult:
    """Closed-form counterpart of :func:`run_cycle` (sin^2 theta from the subspace ODE for mix)."""
    return analytic_theta_heats(cfg.spec_k, cfg.spec_u, mixing_probability(cfg), tol)


def carnot_efficiency(cfg: MachineConfig) -> float:
    return 1.0 - cfg.spec_u.temperature / cfg.spec_k.temperature


def fig2_config(omega_k: float = 2.5, kind: Kind | str = Kind.MIX) -> MachineConfig:
    """Machine with the reference parameters used throughout the figures and checks."""
    return MachineConfig(
        spec_k=QubitSpec(omega_k, 5.0, 1.0),
        spec_u=QubitSpec(0.5, 1.0, 1.0),
        inter=InteractionSpec(Kind(kind), omega_I=1.0, a=1.0),
        tau_U=10.0,
        tau_T=10.0,
    )

