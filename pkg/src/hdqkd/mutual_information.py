"""Shannon information between Alice's and Bob's arrival times.

Post-selected frames fall into five cases (one correlated pair; uncorrelated
Gaussian clicks; Gaussian x dark; dark x Gaussian; dark x dark), so the joint
arrival-time density is a five-component mixture.  Dark counts are uniform
over the frame [-T_f/2, T_f/2].  The Gaussian components are not truncated
to the frame: with T_f equal to the FWHM of the marginal, roughly a quarter of
their mass lies outside it.  The integral therefore runs over the whole
plane, cut off where every Gaussian tail is below 1e-20.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .covariance_model import CovMatrix4
from .photon_stats import CaseWeights, case_probabilities
from .scenario import Scenario

DENSITY_FLOOR = 1e-300
TAIL_SIGMAS = 10.0
GL_ORDER = 8
DEFAULT_TOL = 1e-5
MAX_EVALUATIONS = 60_000_000


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate {estimate:.6g}, error bound {error:.3g})")
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class ArrivalMixture:
    weights: CaseWeights
    sigma_a2: float  # ps², jitter included
    sigma_b2: float
    cov_ab: float
    frame_time: float

    def __post_init__(self):
        if not (self.sigma_a2 > 0 and self.sigma_b2 > 0):
            raise ValueError("arrival-time variances must be positive")
        if self.cov_ab**2 >= self.sigma_a2 * self.sigma_b2:
            raise ValueError("Λ is not positive definite")

    @property
    def Lambda(self) -> np.ndarray:
        return np.array([[self.sigma_a2, self.cov_ab], [self.cov_ab, self.sigma_b2]])

    @property
    def rho(self) -> float:
        return self.cov_ab / math.sqrt(self.sigma_a2 * self.sigma_b2)


def build_mixture(scenario: Scenario, attacked_cov: CovMatrix4) -> ArrivalMixture:
    jitter2 = scenario.detectors.jitter**2
    m = attacked_cov.m
    return ArrivalMixture(
        weights=case_probabilities(scenario.mu, scenario),
        sigma_a2=float(m[0, 0]) + jitter2,
        sigma_b2=float(m[2, 2]) + jitter2,
        cov_ab=float(m[0, 2]),
        frame_time=scenario.source.frame_time,
    )


def gaussian_mi_closed_form(Lambda) -> float:
    """-½ log₂(1 - ρ²) for a bivariate Gaussian with covariance Λ."""
    lam = np.asarray(Lambda, dtype=float)
    det = lam[0, 0] * lam[1, 1] - lam[0, 1] * lam[1, 0]
    if not (lam[0, 0] > 0 and lam[1, 1] > 0 and det > 0):
        raise ValueError("Λ must be positive definite")
    rho2 = lam[0, 1] * lam[1, 0] / (lam[0, 0] * lam[1, 1])
    return -0.5 * math.log2(1.0 - rho2)


def _gauss(t, var):
    return np.exp(-0.5 * t * t / var) / math.sqrt(2.0 * math.pi * var)


def _uniform(t, frame):
    return np.where(np.abs(t) <= 0.5 * frame, 1.0 / frame, 0.0)


def _densities(mix: ArrivalMixture, ta, tb):
    """Joint density and both marginals at the given points."""
    w = mix.weights
    pi1, pi2, pi3, pi4, pi5 = w.as_tuple()
    ga, gb = _gauss(ta, mix.sigma_a2), _gauss(tb, mix.sigma_b2)
    ua, ub = _uniform(ta, mix.frame_time), _uniform(tb, mix.frame_time)

    det = mix.sigma_a2 * mix.sigma_b2 - mix.cov_ab**2
    quad = (mix.sigma_b2 * ta * ta - 2.0 * mix.cov_ab * ta * tb + mix.sigma_a2 * tb * tb) / det
    bg = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))

    joint = pi1 * bg + pi2 * ga * gb + pi3 * ga * ub + pi4 * ua * gb + pi5 * ua * ub
    marg_a = (pi1 + pi2 + pi3) * ga + (pi4 + pi5) * ua
    marg_b = (pi1 + pi2 + pi4) * gb + (pi3 + pi5) * ub
    return joint, marg_a, marg_b


def joint_density(mixture: ArrivalMixture, t_a, t_b):
    """p(t_A, t_B) in 1/ps²."""
    joint, _, _ = _densities(mixture, np.asarray(t_a, float), np.asarray(t_b, float))
    return float(joint) if np.ndim(joint) == 0 else joint


def _mi_integrand(mix: ArrivalMixture):
    def h(ta, tb):
        p, pa, pb = _densities(mix, ta, tb)
        p = np.maximum(p, DENSITY_FLOOR)
        ratio = p / np.maximum(pa * pb, DENSITY_FLOOR)
        return np.where(p > DENSITY_FLOOR, p * np.log2(ratio), 0.0)

    return h


def _axis_edges(half_width: float, frame: float, panel: float) -> np.ndarray:
    """Panel edges on [-R, R] with ±T_f/2 always present as breakpoints."""
    breaks = sorted({-half_width, -0.5 * frame, 0.5 * frame, half_width})
    edges = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 0:
            continue
        n = max(1, int(math.ceil((hi - lo) / panel)))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.array(edges)


_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)


def _panel_integrals(func, x0, x1, y0, y1) -> np.ndarray:
    """Tensor Gauss-Legendre rule on each rectangle [x0,x1]×[y0,y1]."""
    hx = 0.5 * (x1 - x0)
    hy = 0.5 * (y1 - y0)
    xs = (0.5 * (x0 + x1))[:, None] + hx[:, None] * _NODES[None, :]
    ys = (0.5 * (y0 + y1))[:, None] + hy[:, None] * _NODES[None, :]
    vals = func(xs[:, :, None], ys[:, None, :])
    return hx * hy * np.einsum("i,j,pij->p", _WEIGHTS, _WEIGHTS, vals)


def _split(x0, x1, y0, y1):
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)
    cx0 = np.concatenate([x0, xm, x0, xm])
    cx1 = np.concatenate([xm, x1, xm, x1])
    cy0 = np.concatenate([y0, y0, ym, ym])
    cy1 = np.concatenate([ym, ym, y1, y1])
    return cx0, cx1, cy0, cy1


def adaptive_cubature(func, x_edges, y_edges, tol: float, max_evaluations: int = MAX_EVALUATIONS):
    """Integrate ``func(x, y)`` over the rectangle mesh given by the edges.

    Every panel carries its own Gauss-Legendre estimate and the sum over its
    four children; the difference is its error estimate.  Panels whose error
    exceeds tol / (number of panels) are split until the summed error is below
    ``tol``.  Returns ``(value, error_estimate)``.  Accepted contributions are
    combined with ``math.fsum`` in a fixed order, so the result does not depend
    on evaluation order.
    """
    gx0, gy0 = np.meshgrid(x_edges[:-1], y_edges[:-1], indexing="ij")
    gx1, gy1 = np.meshgrid(x_edges[1:], y_edges[1:], indexing="ij")
    x0, x1, y0, y1 = (a.ravel().astype(float) for a in (gx0, gx1, gy0, gy1))
    n_pts = GL_ORDER * GL_ORDER
    evaluations = 0

    own = _panel_integrals(func, x0, x1, y0, y1)
    kids = _split(x0, x1, y0, y1)
    kid_vals = _panel_integrals(func, *kids).reshape(4, -1)
    evaluations += 5 * own.size * n_pts
    refined = kid_vals.sum(axis=0)
    err = np.abs(own - refined)

    done_vals: list[np.ndarray] = []
    done_errs: list[np.ndarray] = []
    while True:
        total_err = math.fsum(err) + math.fsum(math.fsum(e) for e in done_errs)
        if total_err <= tol or err.size == 0:
            break
        threshold = tol / max(err.size + sum(e.size for e in done_errs), 1)
        split = err > threshold
        if not split.any():
            split = err >= err.max()
        keep = ~split
        done_vals.append(refined[keep])
        done_errs.append(err[keep])

        # the children of split panels become panels; their values are known
        cx0, cx1, cy0, cy1 = (k.reshape(4, -1)[:, split].ravel() for k in kids)
        own = kid_vals[:, split].ravel()
        kids = _split(cx0, cx1, cy0, cy1)
        evaluations += 4 * own.size * n_pts
        if evaluations > max_evaluations:
            estimate = math.fsum(np.concatenate(done_vals + [own]))
            raise QuadratureError("cubature budget exhausted", estimate, total_err)
        kid_vals = _panel_integrals(func, *kids).reshape(4, -1)
        refined = kid_vals.sum(axis=0)
        err = np.abs(own - refined)

    done_vals.append(refined)
    done_errs.append(err)
    value = math.fsum(np.concatenate(done_vals))
    error = math.fsum(np.concatenate(done_errs))
    return value, error


def integration_mesh(mixture: ArrivalMixture):
    """Initial panel edges for both axes."""
    ra = max(0.5 * mixture.frame_time, TAIL_SIGMAS * math.sqrt(mixture.sigma_a2))
    rb = max(0.5 * mixture.frame_time, TAIL_SIGMAS * math.sqrt(mixture.sigma_b2))
    # ridge width along t_A - t_B sets the starting resolution
    ridge = math.sqrt(max(mixture.sigma_a2 + mixture.sigma_b2 - 2.0 * mixture.cov_ab, 1e-12))
    panel = max(8.0 * ridge, max(ra, rb) / 64.0)
    return _axis_edges(ra, mixture.frame_time, panel), _axis_edges(rb, mixture.frame_time, panel)


def density_integral(mixture: ArrivalMixture, tol: float = 1e-9) -> float:
    """∫∫ p over the integration domain (normalisation check)."""
    xe, ye = integration_mesh(mixture)
    value, _ = adaptive_cubature(lambda a, b: _densities(mixture, a, b)[0], xe, ye, tol)
    return value


def mutual_info_with_error(mixture: ArrivalMixture, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    xe, ye = integration_mesh(mixture)
    return adaptive_cubature(_mi_integrand(mixture), xe, ye, tol)


@lru_cache(maxsize=512)
def _mutual_info_cached(mixture: ArrivalMixture, tol: float) -> float:
    value, _ = mutual_info_with_error(mixture, tol)
    return max(value, 0.0)


def mutual_info(mixture: ArrivalMixture, tol: float = DEFAULT_TOL) -> float:
    """I(A;B) in bits per post-selected frame.

    Memoised on the mixture parameters, which are identical across the many
    key-rate evaluations of a decoy-level search.
    """
    return _mutual_info_cached(mixture, tol)
