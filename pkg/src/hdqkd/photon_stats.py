"""Poissonian pair emission, coincidence probabilities and measured observables.

All series over the pair number n are truncated at the smallest N whose
Poisson upper-tail mass is below ``TAIL_MASS`` and whose n²-weighted tail is
below ``TAIL_MASS`` times Pr₁.  Every summand is bounded by its Poisson weight
and C_n ≤ n²·C₁, so the truncation error is small in absolute terms and
relative to P_λ alike.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .scenario import Scenario

TAIL_MASS = 1e-12


def poisson_pmf(lam: float, n: int) -> float:
    if lam < 0 or n < 0:
        raise ValueError(f"poisson_pmf needs lam >= 0 and n >= 0, got ({lam}, {n})")
    if lam == 0:
        return 1.0 if n == 0 else 0.0
    if n <= 20:
        return lam**n * math.exp(-lam) / math.factorial(n)
    return math.exp(n * math.log(lam) - lam - math.lgamma(n + 1))


def _weighted_tail(lam: float, n: int) -> float:
    k = np.arange(n + 1, n + 400, dtype=float)
    return float(np.sum(k * k * stats.poisson.pmf(k, lam)))


@lru_cache(maxsize=1024)
def truncation_order(lam: float) -> int:
    """Smallest N with P(n > N) < TAIL_MASS that also keeps the series relatively exact.

    C_n ≤ n²·C₁, so Σ_{n>N} n² Pr_n < TAIL_MASS·Pr₁ bounds the relative
    truncation error of P_λ even when P_λ itself is tiny (small λ).
    """
    if lam <= 0:
        return 0
    n = max(int(stats.poisson.isf(TAIL_MASS, lam)), 1)
    while stats.poisson.sf(n, lam) >= TAIL_MASS:
        n += 1
    first = poisson_pmf(lam, 1)
    while _weighted_tail(lam, n) >= TAIL_MASS * first:
        n += 1
    return n


def _poisson_weights(lam: float) -> np.ndarray:
    n_max = truncation_order(lam)
    return np.array([poisson_pmf(lam, n) for n in range(n_max + 1)])


def log_miss(n, eta: float) -> np.ndarray:
    """log (1 - η)ⁿ, exact at η = 1 and n = 0."""
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = n * math.log1p(-eta) if eta < 1.0 else np.where(n > 0, -np.inf, 0.0)
    return np.where(n > 0, out, 0.0)


def click_prob(n, eta: float, p_d: float) -> np.ndarray:
    """1 - (1-η)ⁿ(1-p_d) without cancellation when η and p_d are tiny."""
    return -np.expm1(log_miss(n, eta) + math.log1p(-p_d))


def coincidence_prob(n, eta_a: float, eta_b_eta_p: float, p_d: float):
    """C_n: both parties register at least one click given n emitted pairs."""
    out = click_prob(n, eta_a, p_d) * click_prob(n, eta_b_eta_p, p_d)
    return float(out) if out.ndim == 0 else out


def coincidence_prob_no_eve(n: int, scenario: Scenario) -> float:
    if n < 0:
        raise ValueError(f"pair number must be non-negative, got {n}")
    return coincidence_prob(n, scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d)


def postselect_prob(lam: float, scenario: Scenario) -> float:
    """P_λ as the truncated series Σ Pr_n C_n."""
    if lam < 0:
        raise ValueError(f"mean pair number must be non-negative, got {lam}")
    w = _poisson_weights(lam)
    c = coincidence_prob(np.arange(w.size), scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d)
    return math.fsum(w * np.atleast_1d(c))


def postselect_prob_closed_form(lam: float, eta_a: float, eta_b_eta_p: float, p_d: float) -> float:
    """Resummed P_λ; used as an oracle for the series.

    1 - qA - qB + q²AB·e^{λη_Aη_Bη_P} rearranged as a sum of non-negative
    terms, so small λ or p_d does not cancel.
    """
    log_q = math.log1p(-p_d)
    alice = -math.expm1(log_q - lam * eta_a)
    bob = -math.expm1(log_q - lam * eta_b_eta_p)
    both_miss = math.exp(2.0 * log_q - lam * (eta_a + eta_b_eta_p))
    return alice * bob + both_miss * math.expm1(lam * eta_a * eta_b_eta_p)


def single_pair_fraction(lam: float, scenario: Scenario) -> float:
    """F_λ = λ e^{-λ} C_1 / P_λ."""
    p = postselect_prob(lam, scenario)
    if p == 0.0:
        raise ZeroDivisionError("post-selection probability is zero: degenerate scenario")
    return lam * math.exp(-lam) * coincidence_prob_no_eve(1, scenario) / p


@dataclass(frozen=True)
class CaseWeights:
    """Conditional probabilities of the five arrival-time cases.

    ``pi_2_multi`` and ``pi_2_dark`` are the two sub-cases of case 2
    (multi-pair emission; one pair plus a dark count).
    """

    pi_1: float
    pi_2_multi: float
    pi_2_dark: float
    pi_3: float
    pi_4: float
    pi_5: float

    @property
    def pi_2(self) -> float:
        return self.pi_2_multi + self.pi_2_dark

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.pi_1, self.pi_2, self.pi_3, self.pi_4, self.pi_5)

    @property
    def total(self) -> float:
        return math.fsum(self.as_tuple())


def case_probabilities(mu: float, scenario: Scenario) -> CaseWeights:
    return case_probabilities_raw(mu, scenario.eta_a, scenario.eta_b_eta_p, scenario.p_d)


def case_probabilities_raw(mu: float, eta_a: float, eta_bp: float, p_d: float) -> CaseWeights:
    w = _poisson_weights(mu)
    n = np.arange(w.size, dtype=float)
    # same truncated series as postselect_prob, so the five cases partition it
    p_mu = math.fsum(w * coincidence_prob(n, eta_a, eta_bp, p_d))
    if not p_mu > 0:
        raise ZeroDivisionError("post-selection probability is zero: degenerate scenario")
    miss_a = np.exp(log_miss(n, eta_a))
    miss_b = np.exp(log_miss(n, eta_bp))
    hit_a = -np.expm1(log_miss(n, eta_a))
    hit_b = -np.expm1(log_miss(n, eta_bp))
    single = float(w[1] * hit_a[1] * hit_b[1]) if w.size > 1 else 0.0

    pi_1 = single * (1.0 - p_d) ** 2 / p_mu
    pi_2_multi = math.fsum((w * hit_a * hit_b)[2:]) / p_mu
    pi_2_dark = single * p_d * (2.0 - p_d) / p_mu
    pi_3 = math.fsum((w * hit_a * p_d * miss_b)[1:]) / p_mu
    pi_4 = math.fsum((w * p_d * miss_a * hit_b)[1:]) / p_mu
    pi_5 = math.fsum(w * p_d**2 * miss_a * miss_b) / p_mu
    return CaseWeights(pi_1, pi_2_multi, pi_2_dark, pi_3, pi_4, pi_5)


@dataclass(frozen=True)
class Observables:
    """What Alice and Bob measure at each intensity.

    Only these numbers (plus their own p_d and η_A) reach the estimators.
    """

    intensities: tuple[float, ...]
    P: tuple[float, ...]
    Xi_t: tuple[float, ...]
    Xi_omega: tuple[float, ...]

    def _index(self, lam: float) -> int:
        for i, x in enumerate(self.intensities):
            if x == lam:
                return i
        raise KeyError(f"no observables recorded at intensity {lam}")

    def p(self, lam: float) -> float:
        return self.P[self._index(lam)]

    def xi_mult(self, lam: float, quadrature: str = "t") -> float:
        i = self._index(lam)
        return self.Xi_t[i] if quadrature == "t" else self.Xi_omega[i]


def simulated_observables(intensities, scenario: Scenario) -> Observables:
    """Eve-absent P_λ with averaged excess-noise multipliers Ξ_{x,λ}."""
    intensities = tuple(float(x) for x in intensities)
    if not intensities:
        raise ValueError("need at least one intensity")
    noise = scenario.noise
    P, Xt, Xw = [], [], []
    for lam in intensities:
        if lam < 0:
            raise ValueError(f"intensity must be non-negative, got {lam}")
        p = postselect_prob(lam, scenario)
        f = lam * math.exp(-lam) * coincidence_prob_no_eve(1, scenario) / p if p > 0 else 0.0
        P.append(p)
        Xt.append(f * (1.0 + noise.xi_t) + (1.0 - f) * noise.delta_xi_t)
        Xw.append(f * (1.0 + noise.xi_omega) + (1.0 - f) * noise.delta_xi_omega)
    return Observables(intensities, tuple(P), tuple(Xt), tuple(Xw))
