import inspect
import math

import pytest
from hypothesis import assume, given, settings, strategies as st

from hdqkd.decoy_estimators import (
    bounds_no_decoy,
    bounds_one_decoy,
    bounds_two_decoy,
    exact_reference_infinite,
    multiphoton_tail_closed_form,
    multiphoton_tail_upper,
)
from hdqkd.photon_stats import Observables, simulated_observables, single_pair_fraction
from hdqkd.scenario import ScenarioError, derive_scenario, reference_config, reference_scenario


def scenario(mu=0.25, d=8, length=0.0, eta_a=0.93, eta_b=0.93, rate_hz=1000.0, sigma_delta=10.0, delta_xi=None):
    raw = reference_config(mu, d, length)
    raw.update({
        "detectors.eta_a": eta_a,
        "detectors.eta_b": eta_b,
        "detectors.dark_rate_hz": rate_hz,
        "noise.sigma_delta_ps": sigma_delta,
    })
    if delta_xi is not None:
        raw["noise.delta_xi"] = delta_xi
    return derive_scenario(raw)


def run(protocol, s, nu2=None):
    mu, p_d = s.mu, s.p_d
    nu1 = mu / 2
    if protocol == "two_decoy":
        return bounds_two_decoy(simulated_observables((mu, nu1, nu2), s), mu, nu1, nu2, p_d)
    if protocol == "one_decoy":
        return bounds_one_decoy(simulated_observables((mu, nu1), s), mu, nu1, p_d)
    return bounds_no_decoy(simulated_observables((mu,), s), mu, p_d, s.eta_a)


def test_two_decoy_vacuum_level_gives_dark_floor():
    s = reference_scenario(0.25, 32, 100)
    b = run("two_decoy", s, 0.0)
    assert b.C0_LB == pytest.approx(s.p_d**2, rel=1e-6)
    assert b.C0_UB == s.p_d


def perfect_fraction(mu):
    return mu * math.exp(-mu) / -math.expm1(-mu)


@pytest.mark.parametrize("mu", [0.01, 0.25])
def test_tight_for_a_perfect_link_with_faint_decoys(mu):
    """C_n = 1 for n ≥ 1: the bounds close on the truth as the weakest level goes to zero."""
    s = scenario(mu, eta_a=1.0, eta_b=1.0, rate_hz=0.0)
    faint = 1e-6 * mu
    two = run("two_decoy", s, faint)
    one = bounds_one_decoy(simulated_observables((mu, faint), s), mu, faint, 0.0)
    none = run("no_decoy", s)
    for b in (two, one, none):
        assert b.F_mu_LB == pytest.approx(perfect_fraction(mu), abs=1e-6)


@pytest.mark.parametrize("mu", [0.01, 0.25])
def test_perfect_link_at_half_mu_decoy(mu):
    """At ν = μ/2 the dropped n ≥ 3 terms leave a known shortfall."""
    s = scenario(mu, eta_a=1.0, eta_b=1.0, rate_hz=0.0)
    nu = mu / 2
    closed = mu**2 / (nu * (mu - nu)) * (math.expm1(nu) * math.exp(-mu) / -math.expm1(-mu) - nu**2 / mu**2)
    assert run("one_decoy", s).F_mu_LB == pytest.approx(closed, rel=1e-12)
    assert closed < perfect_fraction(mu)
    assert run("no_decoy", s).F_mu_LB == pytest.approx(perfect_fraction(mu), rel=1e-12)


@pytest.mark.parametrize("mu", [0.01, 0.1, 0.25, 0.9])
@pytest.mark.parametrize("eta_a", [0.0, 0.3, 0.93, 1.0])
def test_multiphoton_tail_closed_form(mu, eta_a):
    series = multiphoton_tail_upper(mu, 5.65e-7, eta_a)
    closed = multiphoton_tail_closed_form(mu, 5.65e-7, eta_a)
    assert series == pytest.approx(closed, rel=1e-10)


def test_no_decoy_noise_bound():
    s = reference_scenario(0.01, 8, 50)
    b = run("no_decoy", s)
    assert b.xi_t_UB == pytest.approx((1 + s.xi) / b.F_mu_LB - 1, rel=1e-12)
    assert b.xi_t_UB >= s.xi


def test_reference_point_is_sound():
    s = reference_scenario(0.25, 32, 100)
    truth = exact_reference_infinite(s)
    for nu2 in (1e-5, 1e-3, 0.05):
        b = run("two_decoy", s, nu2)
        assert b.F_mu_LB <= truth.F_mu_LB
        assert b.xi_UB >= 7 / 9


def test_one_decoy_never_beats_two_decoy():
    for mu in (0.01, 0.1, 0.25):
        for length in (0, 100, 200):
            s = reference_scenario(mu, 8, length)
            one = run("one_decoy", s)
            for nu2 in (0.0, mu * 1e-3, 0.4 * mu):
                assert one.F_mu_LB <= run("two_decoy", s, nu2).F_mu_LB


def test_intensity_ordering_enforced():
    obs = simulated_observables((0.1, 0.06, 0.05), reference_scenario(0.1))
    with pytest.raises(ScenarioError, match="ν₁ \\+ ν₂ < μ"):
        bounds_two_decoy(obs, 0.1, 0.06, 0.05, 1e-6)
    with pytest.raises(ScenarioError):
        bounds_one_decoy(obs, 0.1, 0.2, 1e-6)


def test_vanishing_signal_is_insecure():
    obs = Observables((0.1, 0.05), (1e-16, 1e-17), (1.7, 1.7), (1.7, 1.7))
    b = bounds_one_decoy(obs, 0.1, 0.05, 1e-9)
    assert not b.secure_derivable and b.F_mu_LB == 0.0 and b.xi_UB == math.inf


def test_non_positive_fraction_is_insecure():
    s = reference_scenario(0.25, 32, 250)
    b = run("no_decoy", s)
    assert b.no_security and "F_mu" in b.no_security
    assert b.diagnostics["F_raw"] <= 0


def test_clamps_are_reported():
    obs = Observables((0.1, 0.05), (0.01, 0.005), (0.5, 0.5), (0.5, 0.5))
    b = bounds_one_decoy(obs, 0.1, 0.05, 1e-9)
    assert b.xi_t_UB == 0.0 and "xi_t_clamp" in b.diagnostics
    obs = Observables((0.1, 0.05), (0.01, 0.008), (1.5, 1.5), (1.5, 1.5))
    b = bounds_one_decoy(obs, 0.1, 0.05, 1e-9)
    assert b.F_mu_LB == 1.0 and "F_clamp" in b.diagnostics


def test_infinite_reference_is_the_truth():
    s = reference_scenario(0.1, 32, 70)
    b = exact_reference_infinite(s)
    assert b.F_mu_LB == single_pair_fraction(0.1, s)
    assert b.xi_t_UB == s.xi
    limit = exact_reference_infinite(scenario(1e-7, rate_hz=0.0))
    assert limit.F_mu_LB == pytest.approx(1.0, abs=1e-6)


def test_estimators_only_see_observables():
    """Eve-visibility seam: nothing but Observables, intensities, p_d and η_A goes in."""
    for func, params in [
        (bounds_two_decoy, ["obs", "mu", "nu1", "nu2", "p_d"]),
        (bounds_one_decoy, ["obs", "mu", "nu", "p_d"]),
        (bounds_no_decoy, ["obs", "mu", "p_d", "eta_a"]),
    ]:
        assert list(inspect.signature(func).parameters) == params
    # links that differ only in what Alice and Bob cannot see give identical bounds
    a = reference_scenario(0.1, 8, 50)
    b = a.with_overrides(detectors__jitter_ps=55.0, covariance__k=7.0)
    assert (a.detectors.jitter, a.cov_k) != (b.detectors.jitter, b.cov_k)
    obs_a = simulated_observables((0.1, 0.05, 0.01), a)
    obs_b = simulated_observables((0.1, 0.05, 0.01), b)
    assert obs_a == obs_b
    assert bounds_two_decoy(obs_a, 0.1, 0.05, 0.01, a.p_d) == bounds_two_decoy(obs_b, 0.1, 0.05, 0.01, b.p_d)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(0.01, 0.99),
    st.floats(0.01, 0.99),
    st.floats(0.0, 0.999),
    st.integers(2, 30),
)
def test_multiphoton_inequality_chain(mu_scale, nu1_frac, nu2_frac, n):
    mu = mu_scale
    nu1 = nu1_frac * mu
    nu2 = nu2_frac * min(nu1, mu - nu1)
    assume(nu1 + nu2 < mu and nu2 < nu1)
    a, b = nu1 / mu, nu2 / mu
    assert a**n - b**n <= a**2 - b**2 + 1e-15


links = st.builds(
    dict,
    mu=st.floats(0.005, 0.6),
    d=st.sampled_from([4, 8, 16, 32]),
    length=st.floats(0, 250),
    eta_a=st.floats(0.2, 1.0),
    eta_b=st.floats(0.2, 1.0),
    rate_hz=st.floats(0, 5000),
    sigma_delta=st.floats(0, 20),
    delta_xi=st.one_of(st.none(), st.floats(0, 4)),
)


@settings(max_examples=150, deadline=None)
@given(links, st.floats(0, 0.999))
def test_soundness_on_random_links(link, nu2_frac):
    s = scenario(**link)
    truth = exact_reference_infinite(s)
    nu2 = nu2_frac * s.mu / 2
    for protocol in ("two_decoy", "one_decoy", "no_decoy"):
        b = run(protocol, s, nu2)
        assert 0 <= b.C0_LB <= b.C0_UB <= 1
        assert 0 <= b.F_mu_LB <= 1
        assert b.F_mu_LB <= truth.F_mu_LB + 1e-9
        assert b.xi_t_UB >= s.xi - 1e-9 and b.xi_omega_UB >= s.xi - 1e-9
