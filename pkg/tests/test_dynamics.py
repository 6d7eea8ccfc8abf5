import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mesorealism import dynamics as dyn
from mesorealism.params import Flavor, MesonParams, component_widths

# Frozen from the GKLS route (RK4, step tau/4000) at dt = tau for the kaon preset.
GKLS_SURVIVAL_TAU = 0.61113668
GKLS_OSCILLATION_TAU = 0.07193185


def mass_basis_probs(params, dt):
    """Independent evaluation from the mass-eigenstate decomposition."""
    g_s, g_l = component_widths(params)
    es, el = math.exp(-g_s * dt), math.exp(-g_l * dt)
    cross = 2 * math.exp(-params.gamma_mean * dt) * math.cos(params.mass_split * dt)
    return (es + el + cross) / 4, (es + el - cross) / 4


def test_trivial_values(kaon, flavor):
    assert dyn.survival_prob(kaon, 0.0, flavor) == 1.0
    assert dyn.oscillation_prob(kaon, 0.0, flavor) == 0.0


def test_kaon_at_one_lifetime_against_gkls(kaon):
    tau = kaon.lifetime_unit
    gen = dyn.build_generators(kaon)
    state = dyn.gkls_evolve(gen, dyn.ExtendedState.from_flavor(Flavor.PARTICLE), tau, tau / 2000)
    p_ff = state.expect(dyn.flavor_projector(Flavor.PARTICLE))
    p_fb = state.expect(dyn.flavor_projector(Flavor.ANTIPARTICLE))
    assert dyn.survival_prob(kaon, tau) == pytest.approx(p_ff, abs=1e-12)
    assert dyn.oscillation_prob(kaon, tau) == pytest.approx(p_fb, abs=1e-12)
    assert dyn.survival_prob(kaon, tau) == pytest.approx(0.6113, abs=2e-4)
    assert dyn.oscillation_prob(kaon, tau) == pytest.approx(0.0721, abs=2e-4)
    assert dyn.survival_prob(kaon, tau) == pytest.approx(GKLS_SURVIVAL_TAU, abs=1e-8)
    assert dyn.oscillation_prob(kaon, tau) == pytest.approx(GKLS_OSCILLATION_TAU, abs=1e-8)


def test_kaon_long_times_dominated_by_long_lived_state(kaon):
    # Gamma_L * 60 tau ~ 0.1, so roughly a quarter of the beam is still K0
    t = 60 * kaon.lifetime_unit
    g_l = component_widths(kaon)[1]
    assert dyn.survival_prob(kaon, t) == pytest.approx(math.exp(-g_l * t) / 4, rel=1e-6)
    assert dyn.survival_prob(kaon, 1e5 * kaon.lifetime_unit) < 1e-7


def test_extreme_times_do_not_overflow(kaon, bs):
    for p in (kaon, bs):
        t = np.array([1e-30, 1e-6, 1.0, 1e6])
        for f in (dyn.survival_prob, dyn.oscillation_prob):
            v = f(p, t)
            assert np.all(np.isfinite(v)) and np.all(v >= 0)


def test_negative_time_rejected(kaon):
    with pytest.raises(dyn.DynamicsError):
        dyn.survival_prob(kaon, -1e-12)
    with pytest.raises(dyn.DynamicsError):
        dyn.oscillation_prob(kaon, -1e-12)
    with pytest.raises(dyn.DynamicsError):
        dyn.wwa_amplitudes(kaon, Flavor.PARTICLE, -1.0)


def test_cp_factors(kaon):
    tau = kaon.lifetime_unit
    cp = dataclasses.replace(kaon, cp_epsilon=0.1)
    fwd = dyn.oscillation_prob(cp, tau, Flavor.PARTICLE)
    bwd = dyn.oscillation_prob(cp, tau, Flavor.ANTIPARTICLE)
    base = dyn.oscillation_prob(kaon, tau)
    assert fwd == pytest.approx(base * 0.9 / 1.1, rel=1e-14)
    assert bwd == pytest.approx(base * 1.1 / 0.9, rel=1e-14)
    assert abs(fwd * bwd - base * base) < 1e-12
    assert dyn.survival_prob(cp, tau) == dyn.survival_prob(kaon, tau)


def test_small_time_oscillation_non_negative(kaon):
    t = np.logspace(-30, -15, 50)
    v = dyn.oscillation_prob(kaon, t)
    assert np.all(v >= 0)
    # leading order (dGamma^2/4 + dm^2) t^2 / 4
    lead = (kaon.gamma_split**2 / 4 + kaon.mass_split**2) * t**2 / 4
    np.testing.assert_allclose(v, lead, rtol=1e-4)


def test_amplitudes_at_zero(kaon):
    a = dyn.wwa_amplitudes(kaon, Flavor.PARTICLE, 0.0)
    assert a.f_S == pytest.approx(1 / math.sqrt(2), abs=1e-16)
    assert a.f_L == pytest.approx(1 / math.sqrt(2), abs=1e-16)
    b = dyn.wwa_amplitudes(kaon, Flavor.ANTIPARTICLE, 0.0)
    assert b.f_S == pytest.approx(1 / math.sqrt(2), abs=1e-16)
    assert b.f_L == pytest.approx(-1 / math.sqrt(2), abs=1e-16)


def test_short_lived_weight_at_tau(kaon):
    tau = kaon.lifetime_unit
    a = dyn.wwa_amplitudes(kaon, Flavor.PARTICLE, tau)
    expected = math.exp(-component_widths(kaon)[0] * tau) / 2
    assert abs(a.f_S) ** 2 == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(0.1839, abs=1e-4)


@pytest.mark.parametrize("k", [0.0, 0.3, 1.0, 2.5, 7.0])
def test_amplitudes_reproduce_probabilities(kaon, flavor, k):
    dt = k * kaon.lifetime_unit
    a = dyn.wwa_amplitudes(kaon, flavor, dt)
    assert a.norm_sq <= 1 + 1e-12
    assert abs(abs(a.flavor_amplitude(flavor)) ** 2 - dyn.survival_prob(kaon, dt, flavor)) < 1e-14
    assert abs(abs(a.flavor_amplitude(flavor.conj)) ** 2 - dyn.oscillation_prob(kaon, dt, flavor)) < 1e-14


def test_amplitudes_reject_cp_violation(kaon):
    with pytest.raises(dyn.DynamicsError):
        dyn.wwa_amplitudes(dataclasses.replace(kaon, cp_epsilon=0.1), Flavor.PARTICLE, 1e-10)


def test_generators_kaon(kaon):
    gen = dyn.build_generators(kaon)
    b = gen.jump_op[2:, :2]
    np.testing.assert_allclose(np.diag(b).real, [math.sqrt(1.11684e10), math.sqrt(1.94e7)], rtol=1e-9)
    assert np.all(gen.jump_op[:2, :] == 0) and np.all(gen.jump_op[:, 2:] == 0)
    assert np.array_equal(gen.mass_op, gen.mass_op.conj().T)
    assert np.all(gen.jump_op @ gen.jump_op == 0)
    g_s, g_l = component_widths(kaon)
    # sqrt then square: equal up to one rounding
    np.testing.assert_allclose(gen.decay_rate_op[:2, :2], np.diag([g_s, g_l]), rtol=4e-16, atol=0)


def test_generators_degenerate_widths():
    p = MesonParams("flat", 3.0, 0.0, 1.0, 1.0)
    gen = dyn.build_generators(p)
    np.testing.assert_allclose(gen.jump_op[2:, :2], math.sqrt(3.0) * np.eye(2))


@given(g=st.floats(0.1, 10), frac=st.floats(-1, 1), dm=st.floats(0, 10))
def test_generator_decay_eigenvalues(g, frac, dm):
    p = MesonParams("h", g, 2 * g * frac, dm, 1.0)
    gen = dyn.build_generators(p)
    ev = np.sort(np.linalg.eigvalsh(gen.decay_rate_op[:2, :2]))
    np.testing.assert_allclose(ev, np.sort(component_widths(p)), rtol=1e-12, atol=1e-12)


def test_generators_reject_cp(kaon):
    with pytest.raises(dyn.DynamicsError):
        dyn.build_generators(dataclasses.replace(kaon, cp_epsilon=0.05))


def test_liouvillian_matches_rhs(kaon):
    gen = dyn.build_generators(kaon)
    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    direct = gen.rhs(rho)
    vec = (gen.liouvillian @ rho.reshape(16)).reshape(4, 4)
    np.testing.assert_allclose(vec, direct, rtol=1e-13, atol=1e-13 * np.abs(direct).max())


def test_gkls_zero_time_is_identity(kaon):
    gen = dyn.build_generators(kaon)
    s = dyn.ExtendedState.from_flavor(Flavor.PARTICLE)
    assert np.array_equal(dyn.gkls_evolve(gen, s, 0.0, kaon.lifetime_unit / 2000).rho, s.rho)


def test_gkls_flavor_trace_at_tau(kaon):
    tau = kaon.lifetime_unit
    gen = dyn.build_generators(kaon)
    s = dyn.gkls_evolve(gen, dyn.ExtendedState.from_flavor(Flavor.PARTICLE), tau, tau / 2000)
    g_s, g_l = component_widths(kaon)
    expected = (math.exp(-g_s * tau) + math.exp(-g_l * tau)) / 2
    assert abs(np.trace(s.flavor_block).real - expected) < 1e-8


def test_gkls_invariants_along_trajectory(kaon):
    tau = kaon.lifetime_unit
    gen = dyn.build_generators(kaon)
    s = dyn.ExtendedState.from_flavor(Flavor.PARTICLE)
    norms = [1.0]
    for _ in range(20):
        s = dyn.gkls_evolve(gen, s, tau / 4, tau / 2000)
        assert np.max(np.abs(s.coherence_block)) < 1e-12
        assert abs(np.trace(s.rho) - 1) < 1e-10
        norms.append(np.trace(s.flavor_block).real)
    assert all(b <= a for a, b in zip(norms, norms[1:]))


def test_gkls_errors(kaon):
    gen = dyn.build_generators(kaon)
    s = dyn.ExtendedState.from_flavor(Flavor.PARTICLE)
    with pytest.raises(dyn.DynamicsError):
        dyn.gkls_evolve(gen, s, 1e-10, 0.0)
    bad = s.rho.copy()
    bad[0, 0] = np.nan
    with pytest.raises(dyn.DynamicsError):
        dyn.gkls_evolve(gen, dyn.ExtendedState(bad), 1e-10, 1e-12)


def test_state_check_rejects_bad_states():
    with pytest.raises(dyn.StateError):
        dyn.ExtendedState(np.diag([0.5, 0.5, 0.5, 0.0]).astype(complex)).check()
    with pytest.raises(dyn.StateError):
        dyn.ExtendedState(np.diag([1.5, -0.5, 0, 0]).astype(complex)).check()
    m = np.zeros((4, 4), complex)
    m[0, 0] = 1
    m[0, 1] = 0.1
    with pytest.raises(dyn.StateError):
        dyn.ExtendedState(m).check()


def test_exact_propagation_trivial_cases(kaon):
    rho = np.array([[0.3, 0.1 + 0.2j], [0.1 - 0.2j, 0.7]])
    np.testing.assert_array_equal(dyn.flavor_propagate_exact(kaon, rho, 0.0), rho)
    dt = 0.7 * kaon.lifetime_unit
    g_s, g_l = component_widths(kaon)
    out = dyn.flavor_propagate_exact(kaon, np.diag([0.25, 0.75]).astype(complex), dt)
    np.testing.assert_allclose(out, np.diag([0.25 * math.exp(-g_s * dt), 0.75 * math.exp(-g_l * dt)]), rtol=1e-14)


def test_exact_propagation_matches_survival(kaon):
    tau = kaon.lifetime_unit
    ket = dyn.flavor_ket(Flavor.PARTICLE, 2)
    out = dyn.flavor_propagate_exact(kaon, np.outer(ket, ket.conj()), tau)
    assert abs((ket.conj() @ out @ ket).real - dyn.survival_prob(kaon, tau)) < 1e-14


def test_exact_propagation_matches_gkls(kaon, flavor):
    tau = kaon.lifetime_unit
    gen = dyn.build_generators(kaon)
    s = dyn.ExtendedState.from_flavor(flavor)
    for k in (0.5, 1.0, 3.0):
        num = dyn.gkls_evolve(gen, s, k * tau, tau / 2000).flavor_block
        exact = dyn.flavor_propagate_exact(kaon, s.flavor_block, k * tau)
        assert np.max(np.abs(num - exact)) < 1e-8


def test_backend_agreement_random_draws():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(200):
        g = 10 ** rng.uniform(-1, 1)
        p = MesonParams("r", g, rng.uniform(-2, 2) * g, rng.uniform(0, 4) * g, 1.0 / g)
        dt = rng.uniform(0, 5) / g
        f = Flavor.PARTICLE if rng.random() < 0.5 else Flavor.ANTIPARTICLE
        gen = dyn.build_generators(p)
        s = dyn.gkls_evolve(gen, dyn.ExtendedState.from_flavor(f), dt, max(dt, 1e-300) / 2000)
        worst = max(
            worst,
            abs(s.expect(dyn.flavor_projector(f)) - dyn.survival_prob(p, dt, f)),
            abs(s.expect(dyn.flavor_projector(f.conj)) - dyn.oscillation_prob(p, dt, f)),
        )
    assert worst <= 1e-7


def test_long_double_is_preserved(kaon):
    t = np.longdouble(kaon.lifetime_unit)
    assert dyn.survival_prob(kaon, t).dtype == np.longdouble
    gen = dyn.build_generators(kaon, np.clongdouble)
    out = dyn.propagate(gen, dyn.flavor_projector(Flavor.PARTICLE, 4, np.clongdouble), t, t / 100)
    assert out.dtype == np.clongdouble


params_st = st.builds(
    lambda g, frac, dm: MesonParams("h", g, 2 * g * frac, dm, 1.0),
    st.floats(1e-2, 1e2),
    st.floats(-1, 1),
    st.floats(0, 1e2),
)


@settings(max_examples=200)
@given(p=params_st, dt=st.floats(0, 50))
def test_probability_properties(p, dt):
    s = dyn.survival_prob(p, dt)
    o = dyn.oscillation_prob(p, dt)
    assert 0 <= s <= 1 and 0 <= o <= 1
    assert s + o <= 1 + 1e-15
    if dt > 0 and component_widths(p)[1] > 0 and p.gamma_long * dt > 1e-6:
        assert s + o < 1
    assert abs((s - o) - math.exp(-p.gamma_mean * dt) * math.cos(p.mass_split * dt)) <= 1e-14
    ms, mo = mass_basis_probs(p, dt)
    assert abs(s - ms) < 1e-13 and abs(o - mo) < 1e-13
