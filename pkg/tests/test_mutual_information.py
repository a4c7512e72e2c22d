import math

import numpy as np
import pytest

from hdqkd.covariance_model import CovParams, attacked_covariance, base_covariance
from hdqkd.keyrate import _eve_attack_at_true_noise, signal_mutual_info
from hdqkd.mutual_information import (
    ArrivalMixture,
    QuadratureError,
    adaptive_cubature,
    build_mixture,
    density_integral,
    gaussian_mi_closed_form,
    joint_density,
    mutual_info,
    mutual_info_with_error,
)
from hdqkd.photon_stats import CaseWeights
from hdqkd.scenario import reference_scenario

# nested scipy.integrate.quad over an independently coded density, breakpoints
# at ±T_f/2 and on the correlation ridge, tolerances 1e-11
MI_ORACLE = {
    (0.25, 8, 50): 1.3368257445425924,
    (0.25, 32, 100): 2.6346934006599296,
    (0.01, 8, 0): 2.260639664424123,
}


def weights(*pi):
    pi = list(pi) + [0.0] * (5 - len(pi))
    return CaseWeights(pi[0], pi[1], 0.0, pi[2], pi[3], pi[4])


def reference_mixture(mu=0.25, d=8, length=50.0):
    s = reference_scenario(mu, d, length)
    params = CovParams.from_scenario(s)
    attack = _eve_attack_at_true_noise(s.xi, params)
    return build_mixture(s, attacked_covariance(base_covariance(params), attack.noise))


def with_weights(mix, w):
    return ArrivalMixture(w, mix.sigma_a2, mix.sigma_b2, mix.cov_ab, mix.frame_time)


def test_closed_form_examples():
    assert gaussian_mi_closed_form([[1.0, 0.0], [0.0, 2.0]]) == 0.0
    assert gaussian_mi_closed_form([[1.0, math.sqrt(0.75)], [math.sqrt(0.75), 1.0]]) == pytest.approx(1.0, abs=1e-12)
    assert gaussian_mi_closed_form([[1.0, 0.99], [0.99, 1.0]]) == pytest.approx(2.825544, abs=1e-6)
    with pytest.raises(ValueError):
        gaussian_mi_closed_form([[1.0, 1.0], [1.0, 1.0]])


def test_mixture_without_attack():
    s = reference_scenario(0.01, 8).with_overrides(detectors__jitter_ps=0.0)
    params = CovParams.from_scenario(s)
    mix = build_mixture(s, base_covariance(params))
    assert mix.cov_ab == (params.u - params.v) / 16
    jittered = build_mixture(reference_scenario(0.01, 8), base_covariance(params))
    assert jittered.sigma_a2 - mix.sigma_a2 == pytest.approx(400.0, abs=1e-9)
    assert jittered.sigma_b2 - mix.sigma_b2 == pytest.approx(400.0, abs=1e-9)
    assert 0 < jittered.rho < 1


def test_mixture_validation():
    with pytest.raises(ValueError):
        ArrivalMixture(weights(1.0), 1.0, 1.0, 1.0, 10.0)
    with pytest.raises(ValueError):
        ArrivalMixture(weights(1.0), 0.0, 1.0, 0.0, 10.0)


def test_uniform_only_density():
    mix = with_weights(reference_mixture(), weights(0, 0, 0, 0, 1.0))
    t = mix.frame_time
    assert joint_density(mix, 0.3 * t, -0.4 * t) == pytest.approx(1 / t**2, rel=1e-14)
    assert joint_density(mix, 0.6 * t, 0.0) == 0.0


def test_density_symmetric_and_normalised():
    mix = reference_mixture()
    rng = np.random.default_rng(3)
    ta, tb = rng.normal(0, 300, (2, 100))
    np.testing.assert_array_equal(joint_density(mix, ta, tb), joint_density(mix, -ta, -tb))
    assert density_integral(mix) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("w", [weights(0, 1.0), weights(0, 0, 0, 0, 1.0)])
def test_independent_components_carry_no_information(w):
    assert mutual_info(with_weights(reference_mixture(), w)) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.parametrize("d", [8, 32])
def test_correlated_component_matches_closed_form(d):
    mix = with_weights(reference_mixture(0.25, d), weights(1.0))
    assert mutual_info(mix) == pytest.approx(gaussian_mi_closed_form(mix.Lambda), abs=2e-3)


@pytest.mark.parametrize("key", list(MI_ORACLE))
def test_full_mixture_matches_quad_oracle(key):
    assert mutual_info(reference_mixture(*key)) == pytest.approx(MI_ORACLE[key], abs=1e-6)


@pytest.mark.parametrize("key", list(MI_ORACLE))
def test_refinement_is_stable(key):
    mix = reference_mixture(*key)
    coarse, _ = mutual_info_with_error(mix, 1e-4)
    fine, err = mutual_info_with_error(mix, 1e-7)
    assert abs(coarse - fine) < 1e-4
    assert err < 1e-7


def test_sanity_caps():
    for d in (8, 32):
        for length in (0.0, 100.0, 250.0):
            mi = mutual_info(reference_mixture(0.25, d, length))
            assert 0 <= mi <= math.log2(d) + 1


def test_jitter_degrades_information():
    s = reference_scenario(0.25, 8, 50)
    values = [signal_mutual_info(s.with_overrides(detectors__jitter_ps=j)) for j in (0.0, 20.0, 100.0)]
    assert values[0] >= values[1] >= values[2]


def test_moving_weight_to_noise_degrades_information():
    mix = reference_mixture()
    w = mix.weights
    values = []
    for shift in np.linspace(0, w.pi_1, 5):
        moved = CaseWeights(w.pi_1 - shift, w.pi_2_multi + shift, w.pi_2_dark, w.pi_3, w.pi_4, w.pi_5)
        values.append(mutual_info(with_weights(mix, moved)))
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_budget_exhaustion_reports_estimate():
    ridge = lambda x, y: np.exp(-1e6 * (x - y) ** 2)
    with pytest.raises(QuadratureError) as err:
        adaptive_cubature(ridge, np.array([-1.0, 1.0]), np.array([-1.0, 1.0]), 1e-15, max_evaluations=5000)
    assert math.isfinite(err.value.estimate) and err.value.error > 0
