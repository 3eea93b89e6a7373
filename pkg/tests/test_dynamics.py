import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from ttmag import dynamics, qcore
from ttmag.dynamics import InteractionSpec, Kind, StrokeConfig
from ttmag.errors import DomainError
from ttmag.qcore import QubitSpec

from conftest import random_density_matrix

SK = QubitSpec(2.5, 5.0, 1.0)
SU = QubitSpec(0.5, 1.0, 1.0)
MIX = InteractionSpec(Kind.MIX, omega_I=1.0, a=1.0)


def product(spec_k=SK, spec_u=SU):
    return qcore.tensor(qcore.thermal_state(spec_k), qcore.thermal_state(spec_u))


def von_neumann_oracle(rho0, spec_k, spec_u, inter, tau):
    h0 = qcore.total_hamiltonian(spec_k, spec_u)
    xy = np.kron(qcore.SX, qcore.SX) + np.kron(qcore.SY, qcore.SY)

    def rhs(t, y):
        rho = y.reshape(4, 4)
        h = h0 + inter.omega_I * math.exp(-inter.a * t) * xy
        return (-1j * (h @ rho - rho @ h)).reshape(-1)

    sol = solve_ivp(rhs, (0, tau), rho0.reshape(-1).astype(complex), method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1].reshape(4, 4)


def lindblad_oracle(rho0, spec_k, spec_u, tau):
    """Master equation plus running heat integrals, by adaptive integration."""
    h0 = qcore.total_hamiltonian(spec_k, spec_u)

    def rhs(t, y):
        rho = y[:16].reshape(4, 4)
        dh = dynamics.dissipator(rho, "h", spec_k, spec_u)
        dc = dynamics.dissipator(rho, "c", spec_k, spec_u)
        drho = -1j * (h0 @ rho - rho @ h0) + dh + dc
        return np.concatenate([drho.reshape(-1), [np.trace(dh @ h0), np.trace(dc @ h0)]])

    y0 = np.concatenate([rho0.reshape(-1).astype(complex), [0, 0]])
    sol = solve_ivp(rhs, (0, tau), y0, method="DOP853", rtol=1e-11, atol=1e-13)
    y = sol.y[:, -1]
    return y[:16].reshape(4, 4), y[16].real, y[17].real


# -- unitary stroke ---------------------------------------------------------


def test_swap_stroke_exchanges_product_factors(rng):
    a, b = random_density_matrix(rng, 2), random_density_matrix(rng, 2)
    np.testing.assert_allclose(dynamics.swap_stroke(qcore.tensor(a, b)), qcore.tensor(b, a), atol=1e-15)
    np.testing.assert_allclose(dynamics.swap_stroke(qcore.tensor(a, a)), qcore.tensor(a, a), atol=1e-15)
    rho = random_density_matrix(rng)
    np.testing.assert_allclose(dynamics.swap_stroke(dynamics.swap_stroke(rho)), rho, atol=1e-15)


def test_interaction_hamiltonian_structure():
    h = dynamics.interaction_hamiltonian(0.0, MIX)
    expected = np.zeros((4, 4))
    expected[1, 2] = expected[2, 1] = 2.0
    np.testing.assert_allclose(h, expected, atol=1e-15)
    for t in (0.3, 2.0, 7.0):
        h = dynamics.interaction_hamiltonian(t, MIX)
        assert h[1, 2] == pytest.approx(2 * math.exp(-t))
        mask = np.ones((4, 4), bool)
        mask[1, 2] = mask[2, 1] = False
        assert np.all(h[mask] == 0)
    assert np.max(np.abs(dynamics.interaction_hamiltonian(800.0, MIX))) == 0.0


def test_interaction_hamiltonian_rejects_swap_and_negative_time():
    with pytest.raises(DomainError):
        dynamics.interaction_hamiltonian(0.0, InteractionSpec(Kind.SWAP))
    with pytest.raises(DomainError):
        dynamics.interaction_hamiltonian(-1.0, MIX)


def test_interaction_spec_validation():
    with pytest.raises(DomainError):
        InteractionSpec(Kind.MIX, a=0.0)
    with pytest.raises(DomainError):
        InteractionSpec(Kind.MIX, omega_I=-1.0)
    InteractionSpec(Kind.SWAP, a=0.0)


def test_stroke_config_step_bound():
    StrokeConfig(10, 10, 0.1)
    with pytest.raises(DomainError):
        StrokeConfig(10, 1, 0.02)
    with pytest.raises(DomainError):
        StrokeConfig(10, 10, 0.0)


def test_mix_stroke_matches_adaptive_oracle(rng):
    rho0 = random_density_matrix(rng)
    sk = QubitSpec(2.0, 5.0)
    cfg = StrokeConfig(10.0, 10.0, 0.004)
    got = dynamics.mix_stroke(rho0, sk, SU, MIX, cfg)
    np.testing.assert_allclose(got, von_neumann_oracle(rho0, sk, SU, MIX, 10.0), atol=1e-8)


def test_mix_stroke_preserves_outer_populations_and_invariants():
    sk = QubitSpec(2.0, 5.0)
    rho0 = product(sk)
    out = dynamics.mix_stroke(rho0, sk, SU, MIX, StrokeConfig(10.0, 10.0, 0.004))
    qcore.check_density_matrix(out)
    assert abs(out[0, 0] - rho0[0, 0]) < 1e-10
    assert abs(out[3, 3] - rho0[3, 3]) < 1e-10


def test_mix_stroke_without_coupling_conserves_energy():
    sk = QubitSpec(2.0, 5.0)
    rho0 = product(sk)
    off = InteractionSpec(Kind.MIX, omega_I=0.0, a=1.0)
    out = dynamics.mix_stroke(rho0, sk, SU, off, StrokeConfig(10.0, 10.0, 0.004))
    np.testing.assert_allclose(out, rho0, atol=1e-12)
    h0 = qcore.total_hamiltonian(sk, SU)
    assert abs(qcore.internal_energy(out, h0) - qcore.internal_energy(rho0, h0)) < 1e-10


@pytest.mark.parametrize("tau_U", [1.0, 10.0, 20.0])
def test_mix_stroke_at_equal_populations_leaves_reduced_states(tau_U):
    rho0 = product()
    out = dynamics.mix_stroke(rho0, SK, SU, MIX, StrokeConfig(tau_U, 10.0, tau_U / 1000))
    np.testing.assert_allclose(qcore.partial_trace(out, "K"), qcore.thermal_state(SK), atol=1e-10)
    np.testing.assert_allclose(qcore.partial_trace(out, "U"), qcore.thermal_state(SU), atol=1e-10)


def test_mix_stroke_step_halving():
    sk = QubitSpec(2.0, 5.0)
    dt = dynamics.default_dt(10.0, 10.0, 2.0, 1.0)
    a = dynamics.mix_stroke(product(sk), sk, SU, MIX, StrokeConfig(10.0, 10.0, dt))
    b = dynamics.mix_stroke(product(sk), sk, SU, MIX, StrokeConfig(10.0, 10.0, dt / 2))
    assert np.max(np.abs(a - b)) < 1e-8


def test_subspace_probability_matches_full_stroke():
    sk = QubitSpec(1.5, 5.0)  # omega_k - omega_un = 1
    p = dynamics.subspace_transition_probability(sk, SU, MIX, 10.0, 0.001)
    assert 0.0 < p < 1.0
    start = np.zeros((4, 4), complex)
    start[1, 1] = 1.0
    out = dynamics.mix_stroke(start, sk, SU, MIX, StrokeConfig(10.0, 10.0, 0.001))
    assert out[2, 2].real == pytest.approx(p, abs=1e-8)


def test_subspace_probability_limits():
    off = InteractionSpec(Kind.MIX, omega_I=0.0, a=1.0)
    assert dynamics.subspace_transition_probability(SK, SU, off, 10.0, 0.01) == 0.0
    res = QubitSpec(0.5, 5.0)
    for y in (0.3, math.pi / 4, 1.1):
        inter = InteractionSpec(Kind.MIX, omega_I=y, a=1.0)
        p = dynamics.subspace_transition_probability(res, SU, inter, 30.0, 0.002)
        assert p == pytest.approx(math.sin(2 * y) ** 2, abs=1e-10)


# -- dissipators and Liouvillian --------------------------------------------


def test_dissipators_vanish_on_gibbs_product():
    rho = product()
    for which in ("h", "c"):
        assert np.max(np.abs(dynamics.dissipator(rho, which, SK, SU))) < 1e-12


def test_dissipator_is_traceless_and_hermitian(rng):
    for _ in range(20):
        rho = random_density_matrix(rng)
        for which in ("h", "c"):
            d = dynamics.dissipator(rho, which, SK, SU)
            assert abs(np.trace(d)) < 1e-12
            np.testing.assert_allclose(d, d.conj().T, atol=1e-14)


def test_dissipator_decay_of_excited_known_qubit():
    rho = qcore.tensor(np.diag([1.0, 0.0]), qcore.thermal_state(SU))
    d = dynamics.dissipator(rho, "h", SK, SU)
    assert qcore.partial_trace(d, "K")[0, 0].real == pytest.approx(-1.0, abs=1e-14)


def test_superoperator_matches_matrix_form(rng):
    rho = random_density_matrix(rng)
    for which in ("h", "c"):
        vec = dynamics.dissipator_superop(which, SK, SU) @ rho.reshape(-1)
        np.testing.assert_allclose(vec.reshape(4, 4), dynamics.dissipator(rho, which, SK, SU), atol=1e-14)


def test_dissipator_rejects_unknown_bath():
    with pytest.raises(DomainError):
        dynamics.dissipator(product(), "x", SK, SU)


def test_liouvillian_spectrum_structure():
    lam = dynamics.liouvillian_spectrum(SK, SU)
    assert len(lam) == 16
    zero = np.abs(lam) < 1e-10
    assert zero.sum() == 1
    assert np.all(lam[~zero].real < 0)
    rate_u = SU.gamma * (1 + math.exp(-2 * SU.omega / SU.temperature))
    assert np.min(np.abs(lam - (-rate_u))) < 1e-10


def test_spectral_gap_is_half_the_population_rate():
    sk, su = QubitSpec(2.0, 5.0, 1.0), QubitSpec(0.5, 1.0, 1.5)
    tau = dynamics.thermalization_timescale(sk, su)
    assert dynamics.spectral_gap(sk, su) == pytest.approx(0.5 / tau, rel=1e-10)


def test_thermalization_timescale_values():
    assert dynamics.thermalization_timescale(SK, SU) == pytest.approx(1 / (1 + math.exp(-1)), abs=1e-6)
    assert dynamics.thermalization_timescale(SK, SU) == pytest.approx(0.731059, abs=1e-6)
    fast = dynamics.thermalization_timescale(QubitSpec(1, 1, 1e9), QubitSpec(1, 1, 1e9))
    assert fast < 1e-8
    assert dynamics.thermalization_timescale(QubitSpec(50, 1), QubitSpec(50, 1)) == pytest.approx(1.0)


def test_rk4_propagator_matches_exponential():
    gen = dynamics.liouvillian(SK, SU)
    h = 0.004
    exact = expm(gen * h)
    # local error of a 4th-order Taylor step is about (h |L|)^5 / 120
    bound = (h * np.linalg.norm(gen, 2)) ** 5 / 120
    assert np.max(np.abs(dynamics._rk4_propagator(gen, h) - exact)) < 2 * bound


# -- thermalization stroke --------------------------------------------------


def test_thermal_input_is_fixed_point():
    rho0 = product()
    out, ledger = dynamics.thermalization_stroke(rho0, SK, SU, StrokeConfig(10, 10, 0.01))
    np.testing.assert_allclose(out, rho0, atol=1e-12)
    assert abs(ledger.q_h) < 1e-10 and abs(ledger.q_c) < 1e-10


def test_swapped_state_heats_match_closed_form():
    sk = QubitSpec(3.0, 5.0)
    rho_u = dynamics.swap_stroke(product(sk))
    tau_T = 20 * dynamics.thermalization_timescale(sk, SU)
    out, ledger = dynamics.thermalization_stroke(rho_u, sk, SU, StrokeConfig(10, tau_T, tau_T / 1000))
    n_k = 1 / (1 + math.exp(1.2))
    n_u = 1 / (1 + math.exp(1.0))
    assert ledger.q_h == pytest.approx(6 * (n_k - n_u), abs=1e-6)
    assert ledger.q_h == pytest.approx(-0.224797, abs=1e-6)
    assert ledger.q_c == pytest.approx(0.037466, abs=1e-6)
    np.testing.assert_allclose(out, product(sk), atol=1e-6)
    two_point = qcore.internal_energy(qcore.partial_trace(out, "K"), 3.0 * qcore.SZ) - qcore.internal_energy(
        qcore.partial_trace(rho_u, "K"), 3.0 * qcore.SZ
    )
    assert ledger.q_h == pytest.approx(two_point, abs=1e-6)


def test_thermalization_matches_adaptive_oracle(rng):
    rho0 = random_density_matrix(rng)
    cfg = StrokeConfig(10.0, 3.0, 0.003)
    out, ledger = dynamics.thermalization_stroke(rho0, SK, SU, cfg)
    ref, qh, qc = lindblad_oracle(rho0, SK, SU, 3.0)
    np.testing.assert_allclose(out, ref, atol=1e-8)
    assert ledger.q_h == pytest.approx(qh, abs=1e-8)
    assert ledger.q_c == pytest.approx(qc, abs=1e-8)


def test_thermalization_step_halving(rng):
    rho0 = random_density_matrix(rng)
    a, la = dynamics.thermalization_stroke(rho0, SK, SU, StrokeConfig(10, 10, 0.01))
    b, lb = dynamics.thermalization_stroke(rho0, SK, SU, StrokeConfig(10, 10, 0.005))
    assert np.max(np.abs(a - b)) < 1e-8
    assert abs(la.q_h - lb.q_h) < 1e-8 and abs(la.q_c - lb.q_c) < 1e-8


def test_cycle_states_reach_gibbs_after_default_duration(rng):
    tau = dynamics.thermalization_timescale(SK, SU)
    for _ in range(5):
        p = rng.dirichlet(np.ones(4))
        rho0 = qcore.block_state(p, 0.9 * math.sqrt(p[1] * p[2]))
        out, _ = dynamics.thermalization_stroke(rho0, SK, SU, StrokeConfig(10, 20 * tau, tau / 50))
        assert np.max(np.abs(out - product())) < 1e-6


def test_generic_states_need_longer_relaxation(rng):
    # single-qubit coherences relax at half the population rate
    tau = dynamics.thermalization_timescale(SK, SU)
    rho0 = random_density_matrix(rng)
    out, _ = dynamics.thermalization_stroke(rho0, SK, SU, StrokeConfig(10, 30 * tau, tau / 50))
    assert np.max(np.abs(out - product())) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strokes_preserve_density_matrix_invariants(seed):
    rng = np.random.default_rng(seed)
    rho0 = random_density_matrix(rng)
    sk = QubitSpec(rng.uniform(0.2, 4), rng.uniform(2, 8), rng.uniform(0.5, 2))
    su = QubitSpec(rng.uniform(0.2, 2), rng.uniform(0.5, 1.5), rng.uniform(0.5, 2))
    inter = InteractionSpec(Kind.MIX, omega_I=rng.uniform(0, 2), a=rng.uniform(0.5, 2))
    dt = dynamics.default_dt(2.0, 2.0, sk.omega, inter.omega_I)
    cfg = StrokeConfig(2.0, 2.0, dt)
    mixed = dynamics.mix_stroke(rho0, sk, su, inter, cfg)
    relaxed, ledger = dynamics.thermalization_stroke(mixed, sk, su, cfg)
    for rho in (mixed, relaxed):
        qcore.check_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, psd_tol=1e-10)
    assert math.isfinite(ledger.q_h) and math.isfinite(ledger.q_c)
