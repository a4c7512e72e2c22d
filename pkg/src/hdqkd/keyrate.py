"""Secure-key capacity ΔI per protocol, ν₂ optimisation and distance sweeps.

ΔI = β·I(A;B)_μ - (1 - F)·n_R - F·χ^UB(ξ^UB), in bits per coincidence.

I(A;B) is what Alice and Bob actually observe on the signal state, so it is
evaluated on the true channel: the attack that produces the true excess noise
and maximises Eve's Holevo information.  It therefore does not depend on the
decoy levels, and one quadrature serves a whole ν₂ search.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ._golden import golden_max
from .covariance_model import CovParams, attacked_covariance, base_covariance
from .decoy_estimators import (
    BoundSet,
    bounds_no_decoy,
    bounds_one_decoy,
    bounds_two_decoy,
    exact_reference_infinite,
)
from .holevo_bound import HolevoBound, holevo_upper_bound
from .mutual_information import build_mixture, mutual_info
from .photon_stats import simulated_observables
from .scenario import Scenario, ScenarioError

PROTOCOLS = ("infinite", "two_decoy", "one_decoy", "no_decoy", "ideal_single_photon")

NU2_GRID_POINTS = 60
NU2_FLOOR = 1e-6  # relative to μ
NU2_CEILING = 0.999  # relative to min(ν₁, μ - ν₁)
NU2_REL_TOL = 1e-4

SCAN_STEP_KM = 10.0
SCAN_MAX_KM = 1000.0
DISTANCE_TOL_KM = 0.5


@dataclass(frozen=True)
class KeyRateResult:
    protocol: str
    delta_I: float  # pre-clamp
    mutual_info_term: float
    multiphoton_penalty: float
    holevo_penalty: float
    bounds: BoundSet
    mutual_info: float
    chi_ub: float
    n_r: float
    nu2: float | None = None
    cause: str | None = None

    @property
    def secure(self) -> bool:
        """ΔI > 0 and the estimators produced usable bounds."""
        return self.cause is None and self.delta_I > 0

    @property
    def delta_I_clamped(self) -> float:
        return self.delta_I if self.secure else 0.0

    @property
    def n_ecc(self) -> float:
        """Syndrome bits implied by the reconciliation efficiency."""
        return self.n_r - self.mutual_info_term


@lru_cache(maxsize=1024)
def _eve_attack_at_true_noise(xi: float, params: CovParams) -> HolevoBound | None:
    return holevo_upper_bound(xi, xi, params)


def signal_mutual_info(scenario: Scenario) -> float:
    """I(A;B)_μ in bits on the true attacked channel."""
    params = CovParams.from_scenario(scenario)
    xi = scenario.noise.xi_t
    if not math.isclose(scenario.noise.xi_omega, xi, rel_tol=1e-12, abs_tol=1e-15):
        # Eve's attack is parametrised by one ξ; the larger one is the harsher channel
        xi = max(xi, scenario.noise.xi_omega)
    attack = _eve_attack_at_true_noise(xi, params)
    if attack is None:
        raise ValueError(f"no physical attack produces excess noise ξ = {xi}")
    cov = attacked_covariance(base_covariance(params), attack.noise)
    return mutual_info(build_mixture(scenario, cov))


def protocol_bounds(scenario: Scenario, protocol: str, nu2: float | None = None) -> BoundSet:
    """Run the estimator matching ``protocol`` on simulated observables."""
    mu, p_d = scenario.mu, scenario.p_d
    levels = scenario.protocol.decoy_levels
    if protocol in ("infinite", "ideal_single_photon"):
        return exact_reference_infinite(scenario)
    if protocol == "no_decoy":
        obs = simulated_observables((mu,), scenario)
        return bounds_no_decoy(obs, mu, p_d, scenario.eta_a)
    if not levels:
        raise ScenarioError(f"protocol {protocol} needs at least one decoy level")
    nu1 = levels[0]
    if protocol == "one_decoy":
        obs = simulated_observables((mu, nu1), scenario)
        return bounds_one_decoy(obs, mu, nu1, p_d)
    if protocol == "two_decoy":
        if nu2 is None:
            if len(levels) < 2:
                raise ScenarioError("two_decoy needs ν₂: give two decoy levels or pass nu2")
            nu2 = levels[1]
        obs = simulated_observables((mu, nu1, nu2), scenario)
        return bounds_two_decoy(obs, mu, nu1, nu2, p_d)
    raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")


def secure_key_capacity(scenario: Scenario, protocol: str, nu2: float | None = None) -> KeyRateResult:
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    bounds = protocol_bounds(scenario, protocol, nu2)
    params = CovParams.from_scenario(scenario)
    beta, n_r = scenario.protocol.beta, scenario.protocol.n_r
    mi = signal_mutual_info(scenario)
    mi_term = beta * mi
    if protocol == "two_decoy" and nu2 is None:
        nu2 = scenario.protocol.decoy_levels[1]
    nu2 = nu2 if protocol == "two_decoy" else None

    cause = bounds.no_security
    chi = math.nan
    f_lb = 1.0 if protocol == "ideal_single_photon" else bounds.F_mu_LB
    if cause is None:
        chi_bound = holevo_upper_bound(bounds.xi_UB, bounds.xi_UB, params)
        if chi_bound is None:
            cause = f"no physical attack matches ξ^UB = {bounds.xi_UB}"
        else:
            chi = chi_bound.chi
    if cause is not None:
        # no security derivable: treat every frame as a multiphoton frame (F = 0)
        return KeyRateResult(protocol, mi_term - n_r, mi_term, n_r, 0.0, bounds, mi, chi, n_r, nu2, cause)

    multiphoton = (1.0 - f_lb) * n_r
    holevo = f_lb * chi
    delta = mi_term - multiphoton - holevo
    return KeyRateResult(protocol, delta, mi_term, multiphoton, holevo, bounds, mi, chi, n_r, nu2)


def _rank(result: KeyRateResult) -> float:
    """Ordering key for ν₂ candidates: insecure bounds rank below everything."""
    return result.delta_I if result.cause is None else -math.inf


def nu2_search_range(mu: float, nu1: float) -> tuple[float, float]:
    return NU2_FLOOR * mu, NU2_CEILING * min(nu1, mu - nu1)


def optimize_nu2(scenario: Scenario) -> tuple[float, KeyRateResult]:
    """ν₂ maximising the two-decoy ΔI with ν₁ held at the first decoy level."""
    levels = scenario.protocol.decoy_levels
    if not levels:
        raise ScenarioError("optimize_nu2 needs ν₁ as the first decoy level")
    mu, nu1 = scenario.mu, levels[0]
    lo, hi = nu2_search_range(mu, nu1)
    if not lo < hi:
        raise ScenarioError(f"empty ν₂ range ({lo}, {hi}) for μ = {mu}, ν₁ = {nu1}")

    grid = np.geomspace(lo, hi, NU2_GRID_POINTS)
    results = [secure_key_capacity(scenario, "two_decoy", float(x)) for x in grid]
    ranks = [_rank(r) for r in results]
    i = int(np.argmax(ranks))  # first maximum -> smallest ν₂ on ties
    best = results[i]
    if ranks[i] == -math.inf:
        return float(grid[i]), best

    cache: dict[float, KeyRateResult] = {}

    def objective(log_nu2: float) -> float:
        nu2 = float(math.exp(log_nu2))
        cache[log_nu2] = secure_key_capacity(scenario, "two_decoy", nu2)
        return _rank(cache[log_nu2])

    a = math.log(grid[max(i - 1, 0)])
    b = math.log(grid[min(i + 1, len(grid) - 1)])
    # golden search in log ν₂; an interval of width w in log is relative width ~w
    log_x, value = golden_max(objective, a, b, NU2_REL_TOL)
    if value > ranks[i]:
        best = cache[log_x]
    return float(best.nu2), best


def key_rate(scenario: Scenario, protocol: str) -> KeyRateResult:
    """ΔI for ``protocol``, with ν₂ optimised for the two-decoy protocol."""
    if protocol == "two_decoy":
        return optimize_nu2(scenario)[1]
    return secure_key_capacity(scenario, protocol)


@dataclass(frozen=True)
class SweepRow:
    length_km: float
    results: dict = field(default_factory=dict)  # protocol -> KeyRateResult or Exception

    @property
    def nu2_opt(self) -> float | None:
        r = self.results.get("two_decoy")
        return r.nu2 if isinstance(r, KeyRateResult) else None


def _sweep_point(scenario: Scenario, length_km: float, protocols) -> SweepRow:
    try:
        at_length = scenario.with_length(length_km)
    except Exception as exc:  # per-row failure, the sweep continues
        return SweepRow(length_km, {p: exc for p in protocols})
    results = {}
    for protocol in protocols:
        try:
            results[protocol] = key_rate(at_length, protocol)
        except Exception as exc:
            results[protocol] = exc
    return SweepRow(length_km, results)


def sweep_distance(scenario: Scenario, lengths_km, protocols, threads: int = 1) -> list[SweepRow]:
    """One row per length, in input order whatever the thread scheduling."""
    lengths = [float(x) for x in lengths_km]
    protocols = list(protocols)
    if not protocols:
        raise ValueError("no protocols requested")
    unknown = [p for p in protocols if p not in PROTOCOLS]
    if unknown:
        raise ValueError(f"unknown protocols {unknown}; choose from {PROTOCOLS}")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("lengths must be strictly increasing")
    if threads <= 1:
        return [_sweep_point(scenario, x, protocols) for x in lengths]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda x: _sweep_point(scenario, x, protocols), lengths))


class NonMonotoneKeyRate(RuntimeError):
    pass


def max_secure_distance(
    scenario: Scenario,
    protocol: str,
    step_km: float = SCAN_STEP_KM,
    max_km: float = SCAN_MAX_KM,
) -> float:
    """Largest length with ΔI > 0, to within ±0.5 km.

    Returns 0 when the link is insecure at zero length and ``math.inf`` when
    it is still secure at ``max_km``.
    """

    def secure(length: float) -> bool:
        return key_rate(scenario.with_length(length), protocol).secure

    if not secure(0.0):
        return 0.0
    lengths = np.arange(0.0, max_km + 0.5 * step_km, step_km)
    flags = [True] + [secure(float(x)) for x in lengths[1:]]
    if all(flags):
        return math.inf
    first_bad = flags.index(False)
    if any(flags[first_bad:]):
        pattern = "".join("+" if f else "-" for f in flags)
        raise NonMonotoneKeyRate(f"{protocol}: secure/insecure pattern is not monotone in L: {pattern}")

    good, bad = float(lengths[first_bad - 1]), float(lengths[first_bad])
    while bad - good > 2.0 * DISTANCE_TOL_KM:
        mid = 0.5 * (good + bad)
        if secure(mid):
            good = mid
        else:
            bad = mid
    return 0.5 * (good + bad)
