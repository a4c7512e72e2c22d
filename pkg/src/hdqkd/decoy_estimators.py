"""Bounds on C₀, C₁, F_μ and ξ from what Alice and Bob can measure.

Every estimator here sees only an :class:`Observables` record plus the two
device numbers Eve cannot touch (p_d and, without decoys, η_A).  Nothing else
from the scenario is read, which keeps the estimators honest: they cannot
peek at the true channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .photon_stats import (
    Observables,
    coincidence_prob,
    poisson_pmf,
    single_pair_fraction,
    truncation_order,
)
from .scenario import Scenario, check_decoy_levels

PROTOCOLS = ("infinite", "two_decoy", "one_decoy", "no_decoy")
MIN_SIGNAL_PROB = 1e-14


@dataclass(frozen=True)
class BoundSet:
    protocol: str
    C0_LB: float
    C0_UB: float
    C1_LB: float
    F_mu_LB: float
    xi_t_UB: float
    xi_omega_UB: float
    diagnostics: dict = field(default_factory=dict, compare=False)
    no_security: str | None = None

    @property
    def secure_derivable(self) -> bool:
        return self.no_security is None

    @property
    def xi_UB(self) -> float:
        """The larger of the two quadrature bounds."""
        return max(self.xi_t_UB, self.xi_omega_UB)


def _insecure(protocol: str, reason: str, p_d: float, diagnostics: dict) -> BoundSet:
    diagnostics = dict(diagnostics, no_security=reason)
    return BoundSet(protocol, 0.0, p_d, 0.0, 0.0, math.inf, math.inf, diagnostics, reason)


def _clamp_f(value: float, diag: dict) -> float:
    if value > 1.0:
        diag["F_clamp"] = f"{value!r} -> 1"
        return 1.0
    if value < 0.0:
        diag["F_clamp"] = f"{value!r} -> 0"
        return 0.0
    return value


def _clamp_xi(value: float, key: str, diag: dict) -> float:
    if value < 0.0:
        diag[key] = f"{value!r} -> 0"
        return 0.0
    return value


def f_single_intensity(obs: Observables, mu: float, lam: float, c0_ub: float) -> float:
    """F_μ lower bound from P_μ and one weaker intensity λ, given C₀ ≤ c0_ub."""
    p_mu = obs.p(mu)
    ratio = obs.p(lam) / p_mu * math.exp(lam - mu)
    bracket = ratio - lam**2 / mu**2 - (mu**2 - lam**2) / mu**2 * c0_ub * math.exp(-mu) / p_mu
    return mu**2 / (mu * lam - lam**2) * bracket


def c0_lower_two_decoy(obs: Observables, nu1: float, nu2: float, p_d: float) -> tuple[float, str]:
    diff = (nu1 * obs.p(nu2) * math.exp(nu2) - nu2 * obs.p(nu1) * math.exp(nu1)) / (nu1 - nu2)
    floor = p_d**2
    return (diff, "difference") if diff > floor else (floor, "p_d^2")


def f_two_decoy_difference(obs: Observables, mu: float, nu1: float, nu2: float, c0_lb: float) -> float:
    p_mu = obs.p(mu)
    pref = mu**2 / (mu * nu1 - mu * nu2 - nu1**2 + nu2**2)
    bracket = (
        obs.p(nu1) / p_mu * math.exp(nu1 - mu)
        - obs.p(nu2) / p_mu * math.exp(nu2 - mu)
        - (nu1**2 - nu2**2) / mu**2 * (1.0 - c0_lb * math.exp(-mu) / p_mu)
    )
    return pref * bracket


def xi_pair_bound(obs: Observables, mu: float, lam1: float, lam2: float, f_lb: float, quadrature: str) -> float:
    """Upper bound on 1 + ξ_x from the ordered pair λ₁ > λ₂."""
    p_mu = obs.p(mu)
    x1, x2 = obs.xi_mult(lam1, quadrature), obs.xi_mult(lam2, quadrature)
    diff = x1 * obs.p(lam1) / p_mu * math.exp(lam1) - x2 * obs.p(lam2) / p_mu * math.exp(lam2)
    return mu * math.exp(-mu) / ((lam1 - lam2) * f_lb) * diff


def xi_single_bound(obs: Observables, mu: float, lam: float, f_lb: float, quadrature: str) -> float:
    """Upper bound on 1 + ξ_x from one intensity λ > 0."""
    return math.exp(lam - mu) * mu * obs.p(lam) / (lam * obs.p(mu)) * obs.xi_mult(lam, quadrature) / f_lb


def _xi_bounds(obs, mu, pairs, singles, f_lb, diag) -> tuple[float, float]:
    out = []
    for x in ("t", "omega"):
        candidates = [(xi_pair_bound(obs, mu, a, b, f_lb, x), f"pair({a!r},{b!r})") for a, b in pairs]
        candidates += [(xi_single_bound(obs, mu, lam, f_lb, x), f"single({lam!r})") for lam in singles if lam > 0]
        value, branch = min(candidates, key=lambda c: c[0])
        diag[f"xi_{x}_branch"] = branch
        out.append(_clamp_xi(value - 1.0, f"xi_{x}_clamp", diag))
    return out[0], out[1]


def _signal_too_weak(obs: Observables, mu: float) -> bool:
    return not obs.p(mu) >= MIN_SIGNAL_PROB


def bounds_two_decoy(obs: Observables, mu: float, nu1: float, nu2: float, p_d: float) -> BoundSet:
    check_decoy_levels(mu, (nu1, nu2))
    diag: dict = {}
    if _signal_too_weak(obs, mu):
        return _insecure("two_decoy", "P_mu below 1e-14", p_d, diag)

    c0_lb, diag["C0_branch"] = c0_lower_two_decoy(obs, nu1, nu2, p_d)
    candidates = [(f_two_decoy_difference(obs, mu, nu1, nu2, c0_lb), "difference")]
    singles = (nu1, nu2) if nu2 > 0 else (nu1,)
    candidates += [(f_single_intensity(obs, mu, lam, p_d), f"single({lam!r})") for lam in singles]
    f_raw, diag["F_branch"] = max(candidates, key=lambda c: c[0])
    diag["F_raw"] = f_raw
    f_lb = _clamp_f(f_raw, diag)
    if f_lb <= 0.0:
        return _insecure("two_decoy", "F_mu lower bound is not positive", p_d, diag)

    c1_lb = f_lb * obs.p(mu) * math.exp(mu) / mu
    pairs = ((mu, nu1), (mu, nu2), (nu1, nu2))
    xi_t, xi_w = _xi_bounds(obs, mu, pairs, (mu, nu1, nu2), f_lb, diag)
    return BoundSet("two_decoy", c0_lb, p_d, c1_lb, f_lb, xi_t, xi_w, diag)


def bounds_one_decoy(obs: Observables, mu: float, nu: float, p_d: float) -> BoundSet:
    check_decoy_levels(mu, (nu,))
    diag: dict = {}
    if _signal_too_weak(obs, mu):
        return _insecure("one_decoy", "P_mu below 1e-14", p_d, diag)

    f_raw = f_single_intensity(obs, mu, nu, p_d)
    diag["F_raw"] = f_raw
    f_lb = _clamp_f(f_raw, diag)
    if f_lb <= 0.0:
        return _insecure("one_decoy", "F_mu lower bound is not positive", p_d, diag)

    c1_lb = f_lb * obs.p(mu) * math.exp(mu) / mu
    xi_t, xi_w = _xi_bounds(obs, mu, ((mu, nu),), (mu, nu), f_lb, diag)
    return BoundSet("one_decoy", p_d**2, p_d, c1_lb, f_lb, xi_t, xi_w, diag)


def multiphoton_tail_upper(mu: float, p_d: float, eta_a: float) -> float:
    """Σ_{n≥2} μⁿ/n! · C_n^UB with C_n^UB = 1 - (1-η_A)ⁿ(1-p_d), truncated like P_λ."""
    n_max = truncation_order(mu)
    total = []
    for n in range(2, n_max + 1):
        c_ub = 1.0 - (1.0 - eta_a) ** n * (1.0 - p_d)
        total.append(poisson_pmf(mu, n) * math.exp(mu) * c_ub)
    return math.fsum(total)


def multiphoton_tail_closed_form(mu: float, p_d: float, eta_a: float) -> float:
    q = mu * (1.0 - eta_a)
    return math.expm1(mu) - mu - (1.0 - p_d) * (math.expm1(q) - q)


def bounds_no_decoy(obs: Observables, mu: float, p_d: float, eta_a: float) -> BoundSet:
    diag: dict = {}
    if _signal_too_weak(obs, mu):
        return _insecure("no_decoy", "P_mu below 1e-14", p_d, diag)

    p_mu = obs.p(mu)
    tail = multiphoton_tail_upper(mu, p_d, eta_a)
    f_raw = 1.0 - p_d * math.exp(-mu) / p_mu - tail * math.exp(-mu) / p_mu
    diag["F_raw"] = f_raw
    f_lb = _clamp_f(f_raw, diag)
    if f_lb <= 0.0:
        return _insecure("no_decoy", "F_mu lower bound is not positive", p_d, diag)

    c1_lb = f_lb * p_mu * math.exp(mu) / mu
    xi_t, xi_w = _xi_bounds(obs, mu, (), (mu,), f_lb, diag)
    return BoundSet("no_decoy", p_d**2, p_d, c1_lb, f_lb, xi_t, xi_w, diag)


def exact_reference_infinite(scenario: Scenario) -> BoundSet:
    """True C₀, C₁, F_μ and ξ: what infinitely many decoys would reveal."""
    mu = scenario.mu
    c = coincidence_prob([0, 1], scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d)
    f = single_pair_fraction(mu, scenario)
    noise = scenario.noise
    return BoundSet("infinite", float(c[0]), float(c[0]), float(c[1]), f, noise.xi_t, noise.xi_omega, {})
