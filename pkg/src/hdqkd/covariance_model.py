"""Time-frequency covariance matrix of the biphoton, before and after Eve.

The matrix as written in lab coordinates depends on the dispersion
coefficient ``k`` and spans many orders of magnitude (ps² next to 1/ps²).
Per-party shears and rescalings (local symplectic maps, unit determinant)
bring it to a k-free standard form

    t-block  [[ν, c], [c, ν]]        ω-block  [[ν, -c], [-c, ν]]

with ν = (u + v) / (4 sqrt(uv)), c = (u - v) / (4 sqrt(uv)) and ν² - c² = 1/4.
Eve's symmetric attack scales the cross block and Bob's block by scalars, so
it commutes with those maps; all entropies are therefore evaluated on the
well-conditioned standard form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import gaussian
from .scenario import Scenario

SYMMETRY_TOL = 1e-12
ETA_GRID_STEP = 1e-3
ETA_BISECT_TOL = 1e-9


class InfeasibleNoise(ValueError):
    """Eve's noise parameters violate a physical constraint."""


@dataclass(frozen=True)
class CovParams:
    u: float  # 16 σ_coh², ps²
    v: float  # 4 σ_cor², ps²
    k: float = 1.0

    def __post_init__(self):
        if not (self.u > self.v > 0):
            raise ValueError(f"need u > v > 0, got u={self.u}, v={self.v}")
        if not self.k > 0:
            raise ValueError(f"dispersion coefficient k must be positive, got {self.k}")

    @classmethod
    def from_times(cls, sigma_coh: float, sigma_cor: float, k: float = 1.0) -> "CovParams":
        return cls(16.0 * sigma_coh**2, 4.0 * sigma_cor**2, k)

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "CovParams":
        src = scenario.source
        return cls.from_times(src.sigma_coh, src.sigma_cor, scenario.cov_k)

    @property
    def schmidt_d(self) -> float:
        return math.sqrt(self.u / (4.0 * self.v))

    @property
    def nu(self) -> float:
        """Symplectic eigenvalue of either party's reduced state."""
        return (self.u + self.v) / (4.0 * math.sqrt(self.u * self.v))

    @property
    def c(self) -> float:
        return (self.u - self.v) / (4.0 * math.sqrt(self.u * self.v))


@dataclass(frozen=True, eq=False)
class CovMatrix4:
    """Symmetric 4×4 covariance over (t_A, ω_A, t_B, ω_B)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {m.shape}")
        scale = max(np.max(np.abs(m)), 1e-300)
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance matrix is not symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    @property
    def aa(self) -> np.ndarray:
        return self.m[:2, :2]

    @property
    def ab(self) -> np.ndarray:
        return self.m[:2, 2:]

    @property
    def ba(self) -> np.ndarray:
        return self.m[2:, :2]

    @property
    def bb(self) -> np.ndarray:
        return self.m[2:, 2:]

    @classmethod
    def from_blocks(cls, aa, ab, bb) -> "CovMatrix4":
        aa, ab, bb = (np.asarray(x, dtype=float) for x in (aa, ab, bb))
        return cls(np.block([[aa, ab], [ab.T, bb]]))

    def var_time_difference(self) -> float:
        """Var[T_A - T_B] from the (t, t) entries."""
        return self.m[0, 0] + self.m[2, 2] - 2.0 * self.m[0, 2]

    def symplectic_eigenvalues(self) -> tuple[float, float]:
        d_plus, d_minus = gaussian.symplectic_eigenvalues(self.m)
        return float(d_plus), float(d_minus)

    def physicality_tolerance(self) -> float:
        """Eigenvalue slack justified by float64 rounding of the entries.

        Lab-frame matrices mix ps² and 1/ps² entries and are badly conditioned,
        so the 1e-9 floor is widened by eps * cond(Γ).
        """
        return max(gaussian.EIG_TOL, 4.0 * np.finfo(float).eps * float(np.linalg.cond(self.m)))

    def is_physical(self, tol: float | None = None) -> bool:
        if not bool(gaussian.is_positive_definite(self.m)):
            return False
        if tol is None:
            tol = self.physicality_tolerance()
        _, d_minus = self.symplectic_eigenvalues()
        return bool(d_minus >= 0.5 - tol)


@dataclass(frozen=True)
class EveNoise:
    eta: float
    epsilon: float
    xi: float

    @classmethod
    def from_eta(cls, eta: float, xi: float, d: float) -> "EveNoise":
        return cls(eta, epsilon_from_eta(eta, xi, d), xi)


def base_covariance(params: CovParams) -> CovMatrix4:
    """Γ of the unattacked biphoton in lab coordinates."""
    u, v, k = params.u, params.v, params.k
    s, dif = u + v, u - v
    q = (4.0 * k * k + u * v) / (4.0 * k * k * u * v)
    aa = [[s / 16.0, -s / (8.0 * k)], [-s / (8.0 * k), s * q]]
    ab = [[dif / 16.0, dif / (8.0 * k)], [-dif / (8.0 * k), -dif * q]]
    bb = [[s / 16.0, s / (8.0 * k)], [s / (8.0 * k), s * q]]
    return CovMatrix4.from_blocks(aa, ab, bb)


def standard_form(params: CovParams) -> CovMatrix4:
    """Γ after the local maps of :func:`local_symplectic`; independent of k."""
    nu, c = params.nu, params.c
    return CovMatrix4(
        np.array(
            [
                [nu, 0.0, c, 0.0],
                [0.0, nu, 0.0, -c],
                [c, 0.0, nu, 0.0],
                [0.0, -c, 0.0, nu],
            ]
        )
    )


def local_symplectic(params: CovParams) -> np.ndarray:
    """S = S_A ⊕ S_B with S Γ Sᵀ = standard form; each block has unit determinant.

    Alice's map shears ω_A -> ω_A + (2/k) t_A, Bob's ω_B -> ω_B - (2/k) t_B;
    both then rescale t -> t/s, ω -> s ω.  Neither map mixes t into a new t, so
    conditioning on T_A is unaffected.
    """
    a = (params.u + params.v) / 16.0
    s = math.sqrt(a / params.nu)
    scale = np.diag([1.0 / s, s])
    s_a = scale @ np.array([[1.0, 0.0], [2.0 / params.k, 1.0]])
    s_b = scale @ np.array([[1.0, 0.0], [-2.0 / params.k, 1.0]])
    out = np.zeros((4, 4))
    out[:2, :2] = s_a
    out[2:, 2:] = s_b
    return out


def epsilon_from_eta(eta, xi, d):
    """Bob's excess noise ε that, with correlation loss η, yields excess noise ξ."""
    d2 = d * d
    return (-2.0 * eta * (d2 - 0.25) + xi) / (d2 + 0.25)


def xi_from_noise(eta, epsilon, d):
    d2 = d * d
    return epsilon * (d2 + 0.25) + 2.0 * eta * (d2 - 0.25)


def _scaled(m: np.ndarray, eta, epsilon) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    epsilon = np.asarray(epsilon, dtype=float)
    shape = np.broadcast(eta, epsilon).shape
    out = np.broadcast_to(m, shape + (4, 4)).copy()
    g = (1.0 - eta)[..., None, None]
    e = (1.0 + epsilon)[..., None, None]
    out[..., :2, 2:] *= g
    out[..., 2:, :2] *= g
    out[..., 2:, 2:] *= e
    return out


def attacked_covariance(gamma: CovMatrix4, noise: EveNoise, params: CovParams | None = None) -> CovMatrix4:
    """Γ' = [[γ_AA, (1-η)γ_AB], [(1-η)γ_BA, (1+ε)γ_BB]].

    With ``params`` the attack is checked against all three feasibility
    constraints on the standard form; otherwise only Γ' itself is checked.
    """
    out = CovMatrix4(_scaled(gamma.m, noise.eta, noise.epsilon))
    if params is not None:
        ok = bool(check_constraints(noise.eta, noise.xi, params).feasible[0])
    else:
        ok = 0.0 <= noise.eta <= 1.0 and out.is_physical()
    if not ok:
        raise InfeasibleNoise(f"attack (η={noise.eta}, ε={noise.epsilon}) is not feasible")
    return out


def attacked_standard(params: CovParams, eta, epsilon) -> np.ndarray:
    """Batched attacked standard-form matrices, shape (..., 4, 4)."""
    return _scaled(standard_form(params).m, eta, epsilon)


@dataclass(frozen=True)
class ConstraintReport:
    mutual_info_ok: np.ndarray  # (a)
    physical_ok: np.ndarray  # (b)
    degrade_ok: np.ndarray  # (c)

    @property
    def feasible(self) -> np.ndarray:
        return self.mutual_info_ok & self.physical_ok & self.degrade_ok


def check_constraints(eta, xi: float, params: CovParams, tol: float = 1e-12) -> ConstraintReport:
    """Evaluate the three feasibility constraints at the given η values."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    d = params.schmidt_d
    eps = epsilon_from_eta(eta, xi, d)
    m = attacked_standard(params, eta, eps)

    d_plus, d_minus = gaussian.symplectic_eigenvalues(m)
    physical = gaussian.is_positive_definite(m) & (d_minus >= 0.5 - gaussian.EIG_TOL)
    physical &= (eta >= 0.0) & (eta <= 1.0)

    mi_ok = np.zeros_like(physical)
    if np.any(physical):
        mi0 = float(gaussian.mutual_information_gaussian(standard_form(params).m))
        mi = gaussian.mutual_information_gaussian(m[physical])
        mi_ok[physical] = np.atleast_1d(mi) <= mi0 + tol

    # Var[T'_A - T'_B] >= Var[T_A - T_B], i.e. ε(u+v) + 2η(u-v) >= 0
    degrade = eps * (params.u + params.v) + 2.0 * eta * (params.u - params.v) >= -tol * params.v
    return ConstraintReport(mi_ok, physical, degrade)


def _feasible(eta: float, xi: float, params: CovParams) -> bool:
    return bool(check_constraints(eta, xi, params).feasible[0])


def _bisect_edge(good: float, bad: float, xi: float, params: CovParams) -> float:
    while abs(bad - good) > ETA_BISECT_TOL:
        mid = 0.5 * (good + bad)
        if _feasible(mid, xi, params):
            good = mid
        else:
            bad = mid
    return good


def feasible_eta_interval(xi: float, params: CovParams) -> tuple[float, float] | None:
    """Largest closed η-interval in [0, 1] on which every constraint holds.

    Returns ``None`` when no grid point is feasible.
    """
    if xi < 0:
        raise ValueError(f"excess noise must be non-negative, got {xi}")
    n = int(round(1.0 / ETA_GRID_STEP))
    grid = np.linspace(0.0, 1.0, n + 1)
    ok = check_constraints(grid, xi, params).feasible
    if not ok.any():
        return None

    # longest run of consecutive feasible grid points; ties -> first
    best_len, best_start, run_start = 0, 0, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and run_start is None:
            run_start = i
        elif not flag and run_start is not None:
            if i - run_start > best_len:
                best_len, best_start = i - run_start, run_start
            run_start = None
    lo_i, hi_i = best_start, best_start + best_len - 1

    lo = grid[lo_i] if lo_i == 0 else _bisect_edge(grid[lo_i], grid[lo_i - 1], xi, params)
    hi = grid[hi_i] if hi_i == n else _bisect_edge(grid[hi_i], grid[hi_i + 1], xi, params)
    return float(lo), float(hi)
