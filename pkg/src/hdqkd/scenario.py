"""Link scenarios: source, detectors, channel, noise and decoy settings.

Config documents use the natural lab units (ps, km, dB/km, Hz).  Everything
is converted on load to one internal system: time in ps, rates in 1/ps and
angular frequency in rad/ps.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

#: FWHM / standard deviation of a Gaussian.
FWHM_FACTOR = 2.0 * math.sqrt(2.0 * math.log(2.0))

#: Hz -> 1/ps.
PER_SECOND_TO_PER_PS = 1e-12

#: Largest dark-count probability per frame for which the single-dark-count
#: approximation is accepted.
MAX_DARK_PROB = 0.01

REQUIRED_KEYS = (
    "source.sigma_cor_ps",
    "source.schmidt_d",
    "source.mu",
    "detectors.eta_a",
    "detectors.eta_b",
    "detectors.dark_rate_hz",
    "detectors.jitter_ps",
    "channel.alpha_db_per_km",
    "channel.length_km",
    "noise.sigma_delta_ps",
    "protocol.decoys",
    "protocol.beta",
)
OPTIONAL_KEYS = ("covariance.k", "noise.delta_xi")


class ScenarioError(ValueError):
    """Raised for missing config keys or violated parameter invariants."""


def excess_noise_from_sigma_delta(sigma_delta: float, sigma_cor: float) -> float:
    """Excess-noise factor for a correlation-time increase ``sigma_delta``.

    Eve widening the correlation time from ``sigma_cor`` to
    ``sigma_cor + sigma_delta`` inflates Var[T_A - T_B] by
    ``(1 + sigma_delta / sigma_cor) ** 2``.
    """
    if not sigma_cor > 0:
        raise ScenarioError(f"sigma_cor must be positive, got {sigma_cor}")
    if sigma_delta < 0:
        raise ScenarioError(f"sigma_delta must be non-negative, got {sigma_delta}")
    return (1.0 + sigma_delta / sigma_cor) ** 2 - 1.0


def transmittance(alpha_db_per_km: float, length_km: float) -> float:
    return 10.0 ** (-alpha_db_per_km * length_km / 10.0)


@dataclass(frozen=True)
class SourceSpec:
    sigma_cor: float  # ps
    schmidt_d: float
    mu: float

    @property
    def sigma_coh(self) -> float:
        return self.schmidt_d * self.sigma_cor

    @property
    def frame_time(self) -> float:
        return FWHM_FACTOR * self.sigma_coh


@dataclass(frozen=True)
class DetectorSpec:
    eta_a: float
    eta_b: float
    dark_rate: float  # 1/ps
    jitter: float  # ps
    frame_time: float  # ps, copied from the source

    @property
    def p_d(self) -> float:
        # linearised single-dark-count model, no 1 - exp(-x) correction
        return self.dark_rate * self.frame_time


@dataclass(frozen=True)
class ChannelSpec:
    alpha: float  # dB/km
    length: float  # km

    @property
    def eta_p(self) -> float:
        return transmittance(self.alpha, self.length)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_delta: float  # ps
    xi_t: float
    xi_omega: float
    delta_xi_t: float
    delta_xi_omega: float


@dataclass(frozen=True)
class ProtocolSpec:
    decoy_levels: tuple[float, ...]
    beta: float
    n_r: float  # bits per frame, log2(d)


@dataclass(frozen=True)
class Scenario:
    source: SourceSpec
    detectors: DetectorSpec
    channel: ChannelSpec
    noise: NoiseSpec
    protocol: ProtocolSpec
    cov_k: float = 1.0
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    # shorthands used all over the numerics
    @property
    def mu(self) -> float:
        return self.source.mu

    @property
    def d(self) -> float:
        return self.source.schmidt_d

    @property
    def p_d(self) -> float:
        return self.detectors.p_d

    @property
    def eta_a(self) -> float:
        return self.detectors.eta_a

    @property
    def eta_b_eta_p(self) -> float:
        return self.detectors.eta_b * self.channel.eta_p

    @property
    def xi(self) -> float:
        return self.noise.xi_t

    def with_length(self, length_km: float) -> "Scenario":
        """Same link at a different fibre length."""
        raw = dict(self.raw)
        raw["channel.length_km"] = float(length_km)
        return derive_scenario(raw)

    def with_decoys(self, decoys) -> "Scenario":
        raw = dict(self.raw)
        raw["protocol.decoys"] = [float(x) for x in decoys]
        return derive_scenario(raw)

    def with_overrides(self, **overrides: Any) -> "Scenario":
        """Re-derive with dotted config keys replaced (``source__mu=0.1``)."""
        raw = dict(self.raw)
        for key, value in overrides.items():
            raw[key.replace("__", ".")] = value
        return derive_scenario(raw)

    def to_config(self) -> dict[str, Any]:
        """Flat config document that re-derives to this scenario."""
        return dict(self.raw)


def _as_float(raw: Mapping[str, Any], key: str) -> float:
    value = raw[key]
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key}: expected a number, got {value!r}") from None


def _as_levels(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        text = value.strip().strip("[]")
        items = [s for s in text.replace(";", ",").split(",") if s.strip()]
    elif value is None:
        items = []
    else:
        items = list(value)
    try:
        return tuple(float(x) for x in items)
    except (TypeError, ValueError):
        raise ScenarioError(f"protocol.decoys: cannot parse {value!r}") from None


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def check_decoy_levels(mu: float, levels: tuple[float, ...]) -> None:
    if len(levels) > 2:
        raise ScenarioError(f"at most two decoy levels supported, got {len(levels)}")
    if len(levels) == 2:
        nu1, nu2 = levels
        _check(nu2 >= 0, f"decoy ordering violated: ν₂ = {nu2} < 0 (need 0 ≤ ν₂ < ν₁)")
        _check(nu2 < nu1, f"decoy ordering violated: ν₂ ≥ ν₁ ({nu2} ≥ {nu1}); need ν₂ < ν₁")
        _check(nu1 + nu2 < mu, f"decoy levels violate ν₁ + ν₂ < μ: ν₁+ν₂ ≥ μ ({nu1 + nu2} ≥ {mu})")
    elif len(levels) == 1:
        (nu,) = levels
        _check(0 < nu < mu, f"single decoy violates 0 < ν < μ (ν = {nu}, μ = {mu})")


def derive_scenario(raw_config: Mapping[str, Any]) -> Scenario:
    """Validate a flat key/value config and derive every secondary quantity."""
    missing = [k for k in REQUIRED_KEYS if k not in raw_config]
    if missing:
        raise ScenarioError("missing config key(s): " + ", ".join(missing))
    unknown = set(raw_config) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ScenarioError("unknown config key(s): " + ", ".join(sorted(unknown)))

    sigma_cor = _as_float(raw_config, "source.sigma_cor_ps")
    d = _as_float(raw_config, "source.schmidt_d")
    mu = _as_float(raw_config, "source.mu")
    _check(sigma_cor > 0, f"source.sigma_cor_ps must be > 0, got {sigma_cor}")
    _check(d >= 1, f"source.schmidt_d must be ≥ 1, got {d}")
    _check(0 < mu < 1, f"source.mu must satisfy 0 < μ < 1, got {mu}")
    source = SourceSpec(sigma_cor=sigma_cor, schmidt_d=d, mu=mu)

    eta_a = _as_float(raw_config, "detectors.eta_a")
    eta_b = _as_float(raw_config, "detectors.eta_b")
    rate_hz = _as_float(raw_config, "detectors.dark_rate_hz")
    jitter = _as_float(raw_config, "detectors.jitter_ps")
    _check(0 <= eta_a <= 1, f"detectors.eta_a must lie in [0, 1], got {eta_a}")
    _check(0 <= eta_b <= 1, f"detectors.eta_b must lie in [0, 1], got {eta_b}")
    _check(rate_hz >= 0, f"detectors.dark_rate_hz must be ≥ 0, got {rate_hz}")
    _check(jitter >= 0, f"detectors.jitter_ps must be ≥ 0, got {jitter}")
    detectors = DetectorSpec(
        eta_a=eta_a,
        eta_b=eta_b,
        dark_rate=rate_hz * PER_SECOND_TO_PER_PS,
        jitter=jitter,
        frame_time=source.frame_time,
    )
    _check(detectors.p_d < MAX_DARK_PROB, f"dark-count probability p_d = {detectors.p_d:g} ≥ {MAX_DARK_PROB}")

    alpha = _as_float(raw_config, "channel.alpha_db_per_km")
    length = _as_float(raw_config, "channel.length_km")
    _check(alpha >= 0, f"channel.alpha_db_per_km must be ≥ 0, got {alpha}")
    _check(length >= 0, f"channel.length_km must be ≥ 0, got {length}")
    channel = ChannelSpec(alpha=alpha, length=length)
    _check(channel.eta_p > 0, f"transmittance underflows at L = {length} km")

    sigma_delta = _as_float(raw_config, "noise.sigma_delta_ps")
    xi = excess_noise_from_sigma_delta(sigma_delta, sigma_cor)
    if "noise.delta_xi" in raw_config and raw_config["noise.delta_xi"] not in (None, ""):
        delta_xi = _as_float(raw_config, "noise.delta_xi")
    else:
        delta_xi = 1.0 + xi
    _check(delta_xi >= 0, f"noise.delta_xi must be ≥ 0, got {delta_xi}")
    noise = NoiseSpec(sigma_delta, xi, xi, delta_xi, delta_xi)

    levels = _as_levels(raw_config["protocol.decoys"])
    check_decoy_levels(mu, levels)
    beta = _as_float(raw_config, "protocol.beta")
    _check(0 < beta <= 1, f"protocol.beta must lie in (0, 1], got {beta}")
    protocol = ProtocolSpec(decoy_levels=levels, beta=beta, n_r=math.log2(d))

    k = float(raw_config.get("covariance.k", 1.0) or 1.0)
    _check(k > 0, f"covariance.k must be > 0, got {k}")

    normalised = {key: raw_config[key] for key in REQUIRED_KEYS}
    normalised["protocol.decoys"] = list(levels)
    for key in OPTIONAL_KEYS:
        if key in raw_config:
            normalised[key] = raw_config[key]
    return Scenario(source, detectors, channel, noise, protocol, cov_k=k, raw=normalised)


def load_config(path: str | Path) -> dict[str, Any]:
    """Read an INI-style config; ``[section] key = value`` becomes ``section.key``."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    raw: dict[str, Any] = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            raw[f"{section}.{key}"] = value
    return raw


def dump_config(raw: Mapping[str, Any]) -> str:
    """Inverse of :func:`load_config`, using ``repr`` so floats round-trip."""
    sections: dict[str, list[str]] = {}
    for key in sorted(raw):
        section, _, name = key.partition(".")
        value = raw[key]
        if isinstance(value, (list, tuple)):
            text = ", ".join(repr(float(x)) for x in value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        sections.setdefault(section, []).append(f"{name} = {text}")
    return "\n\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()) + "\n"


def reference_config(mu: float = 0.01, d: float = 8, length_km: float = 0.0, decoys=None) -> dict[str, Any]:
    """The reference link: 30 ps correlation time, 0.2 dB/km fibre, 93 % SNSPDs."""
    if decoys is None:
        decoys = [mu / 2]
    return {
        "source.sigma_cor_ps": 30.0,
        "source.schmidt_d": float(d),
        "source.mu": float(mu),
        "detectors.eta_a": 0.93,
        "detectors.eta_b": 0.93,
        "detectors.dark_rate_hz": 1000.0,
        "detectors.jitter_ps": 20.0,
        "channel.alpha_db_per_km": 0.2,
        "channel.length_km": float(length_km),
        "noise.sigma_delta_ps": 10.0,
        "protocol.decoys": list(decoys),
        "protocol.beta": 0.9,
    }


def reference_scenario(mu: float = 0.01, d: float = 8, length_km: float = 0.0, decoys=None) -> Scenario:
    return derive_scenario(reference_config(mu, d, length_km, decoys))


__all__ = [
    "ChannelSpec",
    "DetectorSpec",
    "NoiseSpec",
    "ProtocolSpec",
    "Scenario",
    "ScenarioError",
    "SourceSpec",
    "check_decoy_levels",
    "derive_scenario",
    "dump_config",
    "excess_noise_from_sigma_delta",
    "load_config",
    "reference_config",
    "reference_scenario",
    "transmittance",
]
