import math

import pytest
from hypothesis import given, strategies as st

from hdqkd.scenario import (
    ScenarioError,
    derive_scenario,
    dump_config,
    excess_noise_from_sigma_delta,
    load_config,
    reference_config,
    reference_scenario,
    transmittance,
)


def test_reference_link_derived_times():
    s = reference_scenario(0.01, 8)
    assert s.source.sigma_coh == 240.0
    assert s.source.frame_time == pytest.approx(565.1568, abs=1e-4)
    assert s.source.frame_time / s.source.sigma_coh == 2 * math.sqrt(2 * math.log(2))


def test_dark_count_probability():
    s = reference_scenario(0.01, 8)
    assert s.p_d == pytest.approx(5.651568e-7, rel=1e-6)


def test_fifty_km_is_ten_db():
    assert reference_scenario(0.01, 8, 50).channel.eta_p == pytest.approx(0.1, rel=1e-14)
    assert transmittance(0.2, 0.0) == 1.0


@pytest.mark.parametrize("sd, expected", [(0, 0.0), (10, 7 / 9), (30, 3.0)])
def test_excess_noise(sd, expected):
    assert excess_noise_from_sigma_delta(sd, 30) == pytest.approx(expected, abs=1e-15)


def test_excess_noise_rejects_bad_sigma_cor():
    with pytest.raises(ValueError):
        excess_noise_from_sigma_delta(10, 0)


def test_default_delta_xi_and_bits():
    s = reference_scenario(0.25, 32)
    assert s.noise.delta_xi_t == pytest.approx(1 + 7 / 9)
    assert s.protocol.n_r == 5.0


@pytest.mark.parametrize(
    "key, value, needle",
    [
        ("protocol.decoys", [0.006, 0.005], "ν₁ + ν₂ < μ"),
        ("protocol.decoys", [0.003, 0.004], "ν₂ ≥ ν₁"),
        ("protocol.decoys", [0.02], "0 < ν < μ"),
        ("source.mu", 1.5, "0 < μ < 1"),
        ("detectors.eta_a", 1.2, "[0, 1]"),
        ("detectors.dark_rate_hz", 1e8, "p_d"),
        ("source.sigma_cor_ps", 0.0, "> 0"),
    ],
)
def test_invariant_violations_name_the_inequality(key, value, needle):
    raw = reference_config(0.01, 8)
    raw[key] = value
    with pytest.raises(ScenarioError) as err:
        derive_scenario(raw)
    assert needle in str(err.value)


def test_missing_and_unknown_keys():
    raw = reference_config()
    del raw["protocol.beta"]
    with pytest.raises(ScenarioError, match="protocol.beta"):
        derive_scenario(raw)
    raw = reference_config()
    raw["source.colour"] = 3
    with pytest.raises(ScenarioError, match="source.colour"):
        derive_scenario(raw)


def test_negative_delta_xi_rejected():
    raw = dict(reference_config(), **{"noise.delta_xi": -0.1})
    with pytest.raises(ScenarioError):
        derive_scenario(raw)


def test_deterministic():
    assert reference_scenario(0.1, 32, 70) == reference_scenario(0.1, 32, 70)


def test_ini_round_trip(tmp_path):
    s = reference_scenario(0.1, 32, 37.5, decoys=[0.05, 0.0123456789012345])
    path = tmp_path / "link.ini"
    path.write_text(dump_config(s.to_config()))
    again = derive_scenario(load_config(path))
    assert again == s
    assert again.p_d == s.p_d and again.source.frame_time == s.source.frame_time


def test_shipped_configs_load():
    from pathlib import Path

    for path in sorted((Path(__file__).parents[1] / "configs").glob("*.ini")):
        s = derive_scenario(load_config(path))
        assert s.protocol.decoy_levels == (s.mu / 2,)


@given(st.floats(0, 500), st.floats(1e-3, 100))
def test_transmittance_strictly_decreasing(length, extra):
    assert transmittance(0.2, length) > transmittance(0.2, length + extra)
