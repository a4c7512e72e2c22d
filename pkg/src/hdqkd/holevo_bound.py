"""Eve's Holevo information about Alice's arrival-time record."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import gaussian
from ._golden import golden_max
from .covariance_model import (
    CovMatrix4,
    CovParams,
    EveNoise,
    InfeasibleNoise,
    attacked_standard,
    check_constraints,
    epsilon_from_eta,
    feasible_eta_interval,
)
from .gaussian import entropy_f

GRID_POINTS = 200
ETA_TOL = 1e-7


@dataclass(frozen=True)
class SymplecticData:
    I1: float
    I2: float
    d_plus: float
    d_minus: float


def symplectic_data(gamma: CovMatrix4) -> SymplecticData:
    i1, i2 = gaussian.symplectic_invariants(gamma.m)
    d_plus, d_minus = gaussian.symplectic_eigenvalues(gamma.m)
    return SymplecticData(float(i1), float(i2), float(d_plus), float(d_minus))


def joint_entropy(gamma_prime: CovMatrix4) -> float:
    """S(ρ_AB) = f(d₊) + f(d₋) in bits."""
    d_plus, d_minus = gaussian.symplectic_eigenvalues(gamma_prime.m)
    if not (d_minus >= 0.5 - gaussian.EIG_TOL):
        raise ValueError(f"non-physical covariance: d_minus = {d_minus}")
    return float(entropy_f(d_plus) + entropy_f(d_minus))


def conditional_covariance_given_ta(gamma_prime: CovMatrix4) -> np.ndarray:
    if not gamma_prime.aa[0, 0] > 0:
        raise ValueError("cannot condition on T_A: Var[T_A] must be positive")
    return gaussian.condition_on_ta(gamma_prime.m)


def conditional_entropy_given_ta(gamma_prime: CovMatrix4) -> float:
    """S(ρ_{B|T_A}) = f(sqrt(det γ'_{B|T_A}))."""
    det = gaussian.det2(conditional_covariance_given_ta(gamma_prime))
    if det < 0.25 - gaussian.EIG_TOL:
        raise ValueError(f"non-physical conditional state: det = {det}")
    return float(entropy_f(math.sqrt(max(det, 0.25))))


def _chi_batch(m: np.ndarray) -> np.ndarray:
    d_plus, d_minus = gaussian.symplectic_eigenvalues(m)
    cond = gaussian.det2(gaussian.condition_on_ta(m))
    chi = entropy_f(d_plus) + entropy_f(d_minus) - entropy_f(np.sqrt(np.maximum(cond, 0.25)))
    return np.maximum(np.atleast_1d(chi), 0.0)


def holevo_given_noise(noise: EveNoise, params: CovParams) -> float:
    """χ(A;E) = S(ρ_AB) - S(ρ_{B|T_A}) for one attack, floored at zero."""
    if not check_constraints(noise.eta, noise.xi, params).feasible[0]:
        raise InfeasibleNoise(f"η={noise.eta}, ε={noise.epsilon} is not a feasible attack")
    m = attacked_standard(params, noise.eta, noise.epsilon)
    return float(_chi_batch(m)[0])


@dataclass(frozen=True)
class HolevoBound:
    chi: float
    eta: float
    epsilon: float
    xi: float
    interval: tuple[float, float]

    @property
    def noise(self) -> EveNoise:
        return EveNoise(self.eta, self.epsilon, self.xi)


def chi_profile(xi: float, params: CovParams, eta) -> np.ndarray:
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    eps = epsilon_from_eta(eta, xi, params.schmidt_d)
    return _chi_batch(attacked_standard(params, eta, eps))


@lru_cache(maxsize=4096)
def _upper_bound(xi: float, params: CovParams) -> HolevoBound | None:
    interval = feasible_eta_interval(xi, params)
    if interval is None:
        return None
    lo, hi = interval
    d = params.schmidt_d
    if hi - lo <= ETA_TOL:
        eta = lo
        chi = float(chi_profile(xi, params, eta)[0])
    else:
        grid = np.linspace(lo, hi, GRID_POINTS)
        values = chi_profile(xi, params, grid)
        i = int(np.argmax(values))  # first maximum -> smallest η on ties
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
        eta, chi = golden_max(lambda x: float(chi_profile(xi, params, x)[0]), a, b, ETA_TOL)
        if values[i] >= chi:
            eta, chi = float(grid[i]), float(values[i])
    return HolevoBound(chi, float(eta), float(epsilon_from_eta(eta, xi, d)), xi, (lo, hi))


def holevo_upper_bound(xi_t: float, xi_omega: float, params: CovParams) -> HolevoBound | None:
    """Largest χ over feasible attacks producing the given excess noise.

    ``None`` signals that no physical attack is consistent with the noise.
    """
    if not math.isclose(xi_t, xi_omega, rel_tol=1e-12, abs_tol=1e-15):
        raise ValueError("only the symmetric case ξ_t = ξ_ω is supported")
    if xi_t < 0:
        raise ValueError(f"excess noise must be non-negative, got {xi_t}")
    return _upper_bound(float(xi_t), params)
