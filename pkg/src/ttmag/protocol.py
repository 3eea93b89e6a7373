"""Magnetometry protocol: sweeps, transition search and error experiments.

Random numbers come from numpy's PCG64 bit generator. A run with seed ``s``
splits ``SeedSequence(s)`` into one child stream per block of
``RNG_BLOCK`` consecutive trials, so results are bit-identical whatever the
number of worker threads.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from . import machine, metrology, qcore
from .dynamics import InteractionSpec, Kind
from .errors import BracketError, ConfigError, ConvergenceError, DomainError
from .machine import CycleResult, MachineConfig, Regime
from .metrology import ErrorBudget

MAX_ITER = 64
RNG_BLOCK = 1024
ZERO_WINDOW_POINTS = 11
ZERO_WINDOW_FRACTION = 0.25


def worker_count() -> int:
    """Thread cap from ``TTM_THREADS``, defaulting to the available cores."""
    raw = os.environ.get("TTM_THREADS")
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"TTM_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"TTM_THREADS must be >= 1, got {n}")
    return n


def parallel_map(fn: Callable, items: Sequence) -> list:
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# -- sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    omega_k: float
    q_h: float
    q_c: float
    w: float
    regime: Regime


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])

    def regime_sequence(self, descending: bool = False) -> list[Regime]:
        """Regimes in grid order with consecutive repeats collapsed."""
        pts = reversed(self.points) if descending else self.points
        seq: list[Regime] = []
        for p in pts:
            if not seq or seq[-1] is not p.regime:
                seq.append(p.regime)
        return seq

    def sign_changes(self, name: str) -> list[float]:
        """Grid locations where column ``name`` is exactly zero or changes sign."""
        xs = self.column("omega_k")
        ys = self.column(name)
        out = [float(x) for x, y in zip(xs, ys) if y == 0.0]
        for i in range(len(ys) - 1):
            if ys[i] * ys[i + 1] < 0:
                out.append(float(0.5 * (xs[i] + xs[i + 1])))
        return sorted(out)


def _cycle_fn(analytic: bool) -> Callable[[MachineConfig], CycleResult]:
    return machine.analytic_cycle if analytic else machine.run_cycle


def sweep(cfg: MachineConfig, omega_k_grid: Sequence[float], analytic: bool = False) -> SweepResult:
    """One cycle per grid value of ``omega_k`` (other parameters from ``cfg``)."""
    grid = [float(x) for x in omega_k_grid]
    if not grid:
        raise ConfigError("sweep grid is empty")
    if any(not (math.isfinite(x) and x > 0) for x in grid):
        raise ConfigError("sweep grid values must be positive and finite")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("sweep grid must be strictly increasing")
    run = _cycle_fn(analytic)
    results = parallel_map(lambda w: run(cfg.with_omega_k(w)), grid)
    return SweepResult(
        tuple(SweepPoint(w, r.q_h, r.q_c, r.w, r.regime) for w, r in zip(grid, results))
    )


# -- transition search ------------------------------------------------------


@dataclass(frozen=True)
class EstimationReport:
    omega_k_star: float
    omega_un_hat: float
    bracket: tuple[float, float]
    iterations: int
    d_omega_un: float
    relative_error: float
    budget: ErrorBudget = field(default_factory=ErrorBudget)


def find_transition(
    cfg: MachineConfig,
    bracket: tuple[float, float],
    tol: float = 1e-8,
    max_iter: int = MAX_ITER,
    analytic: bool = False,
    budget: ErrorBudget | None = None,
) -> EstimationReport:
    """Bisect on the sign of ``Q_h`` to locate ``omega_k*`` and infer ``omega_un``.

    ``bracket`` may be given in either order. A cycle whose ``Q_h`` is exactly
    zero ends the search at that point. Without an explicit ``budget`` the
    final bracket half-width is used as the uncertainty of ``omega_k*``.
    """
    lo, hi = sorted(float(b) for b in bracket)
    if not (lo > 0 and math.isfinite(hi)) or lo == hi:
        raise ConfigError(f"invalid bracket {bracket!r}")
    if not tol > 0:
        raise ConfigError(f"tol must be positive, got {tol!r}")
    run = _cycle_fn(analytic)

    def q_h(w: float) -> float:
        return run(cfg.with_omega_k(w)).q_h

    f_lo, f_hi = q_h(lo), q_h(hi)
    iterations = 0
    star = None
    if f_lo == 0.0:
        star = lo
    elif f_hi == 0.0:
        star = hi
    elif f_lo * f_hi > 0:
        raise BracketError(
            f"Q_h has the same sign at both ends of [{lo}, {hi}] "
            f"(Q_h={f_lo:.3e}, {f_hi:.3e}); sweep omega_k to find a sign change"
        )
    while star is None:
        if hi - lo <= tol:
            star = 0.5 * (lo + hi)
            break
        if iterations >= max_iter:
            raise ConvergenceError(f"bisection did not reach tol={tol} in {max_iter} iterations")
        mid = 0.5 * (lo + hi)
        f_mid = q_h(mid)
        iterations += 1
        if f_mid == 0.0:
            star = mid
        elif (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid

    t_h, t_c = cfg.spec_k.temperature, cfg.spec_u.temperature
    if budget is None:
        budget = ErrorBudget()
    if budget.d_omega_k_star == 0.0:
        resolution = 0.5 * min(hi - lo, tol)
        budget = dataclasses.replace(budget, d_omega_k_star=math.hypot(budget.d_omega_prime, resolution))
    d_abs, d_rel = metrology.propagate_full_error(star, t_h, t_c, budget)
    return EstimationReport(
        omega_k_star=star,
        omega_un_hat=star * t_c / t_h,
        bracket=(lo, hi),
        iterations=iterations,
        d_omega_un=d_abs,
        relative_error=d_rel,
        budget=budget,
    )


def heat_from_population(omega_k: float, n_k_thermal: float, n_k_prime: float) -> float:
    """Hot-bath heat inferred from the excited population of K before and after thermalizing."""
    for name, n in (("n_k_thermal", n_k_thermal), ("n_k_prime", n_k_prime)):
        if not 0.0 < n < 1.0:
            raise DomainError(f"{name} must lie in (0, 1), got {n!r}")
    return 2.0 * omega_k * (n_k_thermal - n_k_prime)


# -- Monte Carlo error scaling ----------------------------------------------


@dataclass(frozen=True)
class MonteCarloConfig:
    """Noise model for :func:`monte_carlo_scaling`.

    ``d_T_h`` and ``d_T_c`` are single-shot temperature errors, averaged
    over ``m_t`` measurements; ``d_q`` is the single-shot error of each
    ``Q_h`` sample, averaged over ``m_q`` repetitions per grid point.
    """

    trials: int
    seed: int
    d_omega_prime: float = 0.0
    d_T_h: float = 0.0
    d_T_c: float = 0.0
    d_q: float = 0.0
    m_t: int = 1
    m_q: int = 1
    zero_method: Literal["regression", "threshold"] = "regression"

    def __post_init__(self):
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 100:
            raise ConfigError(f"trials must be an integer >= 100, got {self.trials!r}")
        if self.seed is None or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        for name in ("m_t", "m_q"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        for name in ("d_omega_prime", "d_T_h", "d_T_c", "d_q"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v!r}")
        if self.zero_method not in ("regression", "threshold"):
            raise ConfigError(f"zero_method must be 'regression' or 'threshold', got {self.zero_method!r}")
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ScalingReport:
    """Outcome of a Monte Carlo run.

    ``sigma`` is the sample standard deviation of the estimates and ``se``
    its standard error ``sigma / sqrt(2 (N - 1))``. ``ratio`` divides by the
    readout error when that is the only noise source; ``predicted`` is the
    linear-propagation value of ``sigma`` and ``passed`` tells whether the
    two agree (3 SE, or 10% when Q_h noise drives the estimate; ``None`` for
    threshold zero-finding, which has no closed-form prediction).
    """

    trials: int
    seed: int
    mean: float
    sigma: float
    se: float
    predicted: float
    passed: bool | None
    ratio: float | None
    expected_ratio: float | None
    omega_un_hat: np.ndarray = field(repr=False)
    omega_k_star: np.ndarray = field(repr=False)


def _block_streams(seed: int, trials: int) -> list[tuple[int, np.random.Generator]]:
    children = np.random.SeedSequence(seed).spawn(-(-trials // RNG_BLOCK))
    sizes = [min(RNG_BLOCK, trials - i * RNG_BLOCK) for i in range(len(children))]
    return [(n, np.random.Generator(np.random.PCG64(c))) for n, c in zip(sizes, children)]


def zero_window(center: float) -> np.ndarray:
    half = ZERO_WINDOW_FRACTION * center
    return np.linspace(center - half, center + half, ZERO_WINDOW_POINTS)


def zero_crossing(grid: np.ndarray, q: np.ndarray, method: str = "regression") -> np.ndarray:
    """Zero of ``Q_h(omega_k)`` sampled on ``grid``; ``q`` may hold one row per trial.

    ``regression`` fits a straight line by least squares. ``threshold``
    interpolates linearly across the first sign change nearest the window
    centre, falling back to the regression fit if there is none.
    """
    q = np.atleast_2d(q)
    x = grid - grid.mean()
    sxx = float(x @ x)
    slope = (q - q.mean(axis=1, keepdims=True)) @ x / sxx
    fit = grid.mean() - q.mean(axis=1) / slope
    if method == "regression":
        return fit
    if method != "threshold":
        raise ConfigError(f"unknown zero-crossing method {method!r}")
    out = fit.copy()
    centre = len(grid) // 2
    order = sorted(range(len(grid) - 1), key=lambda i: abs(i + 0.5 - centre))
    for row in range(q.shape[0]):
        y = q[row]
        for i in order:
            if y[i] == 0.0:
                out[row] = grid[i]
                break
            if y[i] * y[i + 1] < 0:
                out[row] = grid[i] - y[i] * (grid[i + 1] - grid[i]) / (y[i + 1] - y[i])
                break
    return out


def monte_carlo_scaling(
    cfg: MachineConfig, mc: MonteCarloConfig, omega_k_star: float | None = None
) -> ScalingReport:
    """Sample noisy estimates of ``omega_un = omega_k* T_c / T_h``.

    ``omega_k_star`` defaults to the exact transition of ``cfg``. With
    ``d_q > 0`` each trial locates ``omega_k*`` afresh from noisy closed-form
    ``Q_h`` values on an 11-point window of half-width ``0.25 omega_k*``.
    """
    t_h, t_c = cfg.spec_k.temperature, cfg.spec_u.temperature
    star = cfg.transition_point if omega_k_star is None else float(omega_k_star)
    s_th = mc.d_T_h / math.sqrt(mc.m_t)
    s_tc = mc.d_T_c / math.sqrt(mc.m_t)
    s_q = mc.d_q / math.sqrt(mc.m_q)

    grid = q_clean = None
    if s_q > 0:
        grid = zero_window(star)
        q_clean = np.array([machine.analytic_cycle(cfg.with_omega_k(w)).q_h for w in grid])

    def run_block(block: tuple[int, np.random.Generator]) -> tuple[np.ndarray, np.ndarray]:
        n, rng = block
        readout = rng.normal(0.0, 1.0, n) * mc.d_omega_prime
        th = t_h + rng.normal(0.0, 1.0, n) * s_th
        tc = t_c + rng.normal(0.0, 1.0, n) * s_tc
        if q_clean is not None:
            noisy = q_clean + rng.normal(0.0, 1.0, (n, len(grid))) * s_q
            located = zero_crossing(grid, noisy, mc.zero_method)
        else:
            located = np.full(n, star)
        k_star = located + readout
        return k_star, k_star * tc / th

    parts = parallel_map(run_block, _block_streams(mc.seed, mc.trials))
    k_star = np.concatenate([p[0] for p in parts])
    est = np.concatenate([p[1] for p in parts])

    n = mc.trials
    sigma = float(np.std(est, ddof=1))
    se = sigma / math.sqrt(2.0 * (n - 1))
    d_k = mc.d_omega_prime
    if s_q > 0:
        inv_h = metrology.f1(star / t_h) * machine.mixing_probability(cfg)
        d_k = math.hypot(d_k, s_q / (inv_h * math.sqrt(len(grid))))
    predicted, _ = metrology.propagate_full_error(
        star, t_h, t_c, ErrorBudget(d_omega_k_star=d_k, d_T_h=s_th, d_T_c=s_tc)
    )
    passed: bool | None
    if s_q > 0:
        # the prediction assumes the least-squares fit uses all window points
        passed = abs(sigma - predicted) <= 0.1 * predicted if mc.zero_method == "regression" else None
    else:
        passed = abs(sigma - predicted) <= 3.0 * se

    readout_only = mc.d_omega_prime > 0 and s_th == 0 and s_tc == 0 and s_q == 0
    return ScalingReport(
        trials=n,
        seed=mc.seed,
        mean=float(np.mean(est)),
        sigma=sigma,
        se=se,
        predicted=predicted,
        passed=passed,
        ratio=sigma / mc.d_omega_prime if readout_only else None,
        expected_ratio=t_c / t_h if readout_only else None,
        omega_un_hat=est,
        omega_k_star=k_star,
    )


# -- unimodality ------------------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigError(f"invalid Gaussian({self.mu}, {self.sigma})")


@dataclass(frozen=True)
class UnimodalityResult:
    unimodal: bool
    peaks: int
    mode: float
    bin_centers: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)
    strict: bool = True


DEFAULT_DISTS = (Gaussian(2.5, 0.05), Gaussian(5.0, 0.05), Gaussian(1.0, 0.02))


def truncated_normal(rng: np.random.Generator, dist: Gaussian, n: int) -> np.ndarray:
    """Draw ``n`` samples of ``dist`` conditioned on being positive (rejection)."""
    if dist.sigma == 0:
        return np.full(n, dist.mu)
    out = np.empty(0)
    while out.size < n:
        draw = rng.normal(dist.mu, dist.sigma, max(n - out.size, 64) * 2)
        out = np.concatenate([out, draw[draw > 0]])
    return out[:n]


def count_peaks(counts: np.ndarray, significance: float = 3.0) -> tuple[int, int]:
    """Number of peaks in a histogram and the index of the tallest.

    The counts are smoothed with a 3-bin moving average and strict local
    maxima are collected. Two neighbouring maxima separated by a valley
    shallower than ``significance`` Poisson standard deviations of the
    smoothed counts are treated as one peak.
    """
    smooth = np.convolve(np.asarray(counts, dtype=float), np.ones(3) / 3.0, mode="same")
    n = len(smooth)
    maxima = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and smooth[j + 1] == smooth[i]:
            j += 1
        left = smooth[i - 1] if i > 0 else -math.inf
        right = smooth[j + 1] if j + 1 < n else -math.inf
        if smooth[i] > left and smooth[i] > right and smooth[i] > 0:
            maxima.append((i + j) // 2)
        i = j + 1
    if not maxima:
        return 0, int(np.argmax(smooth))
    merged = [maxima[0]]
    for m in maxima[1:]:
        prev = merged[-1]
        valley = float(np.min(smooth[prev : m + 1]))
        low = min(smooth[prev], smooth[m])
        if low - valley <= significance * math.sqrt(low / 3.0):
            if smooth[m] > smooth[prev]:
                merged[-1] = m
        else:
            merged.append(m)
    best = max(merged, key=lambda k: smooth[k])
    return len(merged), int(best)


def unimodality_check(
    dist_omega_k: Gaussian = DEFAULT_DISTS[0],
    dist_T_h: Gaussian = DEFAULT_DISTS[1],
    dist_T_c: Gaussian = DEFAULT_DISTS[2],
    samples: int = 100_000,
    bins: int = 60,
    seed: int = 0,
    strict: bool = True,
) -> UnimodalityResult:
    """Histogram ``omega_k* T_c / T_h`` under independent positive-truncated Gaussians.

    The histogram spans the sample mean plus or minus four standard
    deviations. ``strict`` enforces ``mu > 4 sigma`` for every input; turning
    it off allows exploratory wide-spread runs.
    """
    if int(bins) != bins or bins < 3:
        raise ConfigError(f"bins must be an integer >= 3, got {bins!r}")
    if int(samples) != samples or samples < 10 * bins:
        raise ConfigError(f"need at least 10 samples per bin ({10 * bins}), got {samples!r}")
    dists = (dist_omega_k, dist_T_h, dist_T_c)
    for d in dists:
        if not d.mu > 0:
            raise ConfigError(f"mean must be positive, got {d.mu}")
        if strict and not d.mu > 4 * d.sigma:
            raise ConfigError(f"need mu > 4 sigma, got Gaussian({d.mu}, {d.sigma})")
    streams = np.random.SeedSequence(int(seed)).spawn(3)
    wk, th, tc = (
        truncated_normal(np.random.Generator(np.random.PCG64(s)), d, int(samples))
        for s, d in zip(streams, dists)
    )
    y = wk * tc / th
    mean, std = float(np.mean(y)), float(np.std(y))
    if std == 0.0:
        centers = np.array([mean])
        return UnimodalityResult(True, 1, mean, centers, np.array([int(samples)]), strict)
    counts, edges = np.histogram(y, bins=int(bins), range=(mean - 4 * std, mean + 4 * std))
    centers = 0.5 * (edges[:-1] + edges[1:])
    peaks, best = count_peaks(counts)
    return UnimodalityResult(peaks == 1, peaks, float(centers[best]), centers, counts, strict)


def reference_machine(t_c: float = 1.0, t_h: float = 5.0, omega_un: float = 0.5) -> MachineConfig:
    """Swap machine with the given bath temperatures and unknown field."""
    return MachineConfig(
        spec_k=qcore.QubitSpec(omega_un * t_h / t_c, t_h, 1.0),
        spec_u=qcore.QubitSpec(omega_un, t_c, 1.0),
        inter=InteractionSpec(Kind.SWAP),
    )
