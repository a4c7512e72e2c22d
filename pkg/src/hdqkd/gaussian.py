"""Two-mode Gaussian-state primitives on (..., 4, 4) covariance arrays.

Coordinates are ordered (t_A, ω_A, t_B, ω_B) with [t, ω] = i, so the vacuum
symplectic eigenvalue is 1/2.  Every function broadcasts over leading axes.
"""
from __future__ import annotations

import numpy as np

#: tolerance below 1/2 still treated as the pure-mode limit
EIG_TOL = 1e-9

SYMPLECTIC_FORM = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def blocks(m: np.ndarray):
    """(γ_AA, γ_AB, γ_BA, γ_BB) views of a (..., 4, 4) array."""
    return m[..., :2, :2], m[..., :2, 2:], m[..., 2:, :2], m[..., 2:, 2:]


def entropy_f(x):
    """Entropy in bits of a thermal mode with symplectic eigenvalue x."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.5 - EIG_TOL) or np.any(np.isnan(x)):
        raise ValueError(f"symplectic eigenvalue below 1/2: {np.min(x)!r}")
    xp = np.maximum(x, 0.5) + 0.5
    xm = np.maximum(x, 0.5) - 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(xm > 0, xm * np.log2(np.where(xm > 0, xm, 1.0)), 0.0)
    out = xp * np.log2(xp) - tail
    return float(out) if out.ndim == 0 else out


def det4(m: np.ndarray) -> np.ndarray:
    """det Γ = det γ_AA · det(γ_BB - γ_BA adj(γ_AA) γ_AB / det γ_AA), by 2×2 blocks."""
    aa, ab, ba, bb = blocks(m)
    det_a = det2(aa)
    adj = np.empty_like(aa)
    adj[..., 0, 0] = aa[..., 1, 1]
    adj[..., 1, 1] = aa[..., 0, 0]
    adj[..., 0, 1] = -aa[..., 0, 1]
    adj[..., 1, 0] = -aa[..., 1, 0]
    schur = det_a[..., None, None] * bb - ba @ adj @ ab
    # det(det_a * B - ...) = det_a**2 * det(schur / det_a)
    return det2(schur) / det_a


def symplectic_invariants(m: np.ndarray):
    """(I1, I2) = (det γ_AA + det γ_BB + 2 det γ_AB, det Γ) in extended precision."""
    m = np.asarray(m, dtype=np.longdouble)
    aa, ab, _, bb = blocks(m)
    i1 = det2(aa) + det2(bb) + 2 * det2(ab)
    return i1, det4(m)


def symplectic_eigenvalues(m: np.ndarray):
    """(d_plus, d_minus) from the two invariants; NaN where the state is unphysical.

    Near a degenerate spectrum the discriminant loses half its digits, which is
    why the invariants are carried in extended precision.
    """
    i1, i2 = symplectic_invariants(m)
    disc = i1 * i1 - 4 * i2
    scale = np.maximum(np.abs(i1 * i1), np.longdouble(1e-300))
    disc = np.where((disc < 0) & (disc > -1e-15 * scale), 0, disc)
    with np.errstate(invalid="ignore"):
        root = np.sqrt(disc)
        d_plus = np.sqrt((i1 + root) / 2)
        d_minus = np.sqrt((i1 - root) / 2)
    return d_plus.astype(float), d_minus.astype(float)


def symplectic_eigenvalues_direct(m: np.ndarray) -> np.ndarray:
    """Moduli of the eigenvalues of iΩΓ, sorted descending (independent route)."""
    ev = np.abs(np.linalg.eigvals(1j * SYMPLECTIC_FORM @ np.asarray(m, dtype=float)))
    ev = np.sort(ev)[::-1]
    return ev[::2]


def is_positive_definite(m: np.ndarray) -> np.ndarray:
    """Sylvester's criterion on the leading minors, broadcasting."""
    m1 = m[..., 0, 0]
    m2 = det2(m[..., :2, :2])
    m3 = np.linalg.det(m[..., :3, :3])
    m4 = np.linalg.det(m)
    return (m1 > 0) & (m2 > 0) & (m3 > 0) & (m4 > 0)


def condition_on_ta(m: np.ndarray) -> np.ndarray:
    """γ_{B|T_A} after a homodyne-like measurement of Alice's t quadrature.

    The pseudoinverse of X_t γ_AA X_t is diag(1/γ_AA[0,0], 0), so the update is
    rank one in the first row of γ_AB.
    """
    aa, ab, ba, bb = blocks(m)
    col = ba[..., :, 0]
    row = ab[..., 0, :]
    return bb - col[..., :, None] * row[..., None, :] / aa[..., 0, 0][..., None, None]


def mutual_information_gaussian(m: np.ndarray):
    """Quantum mutual information S_A + S_B - S_AB in bits."""
    aa, _, _, bb = blocks(m)
    d_plus, d_minus = symplectic_eigenvalues(m)
    s_a = entropy_f(np.sqrt(det2(aa)))
    s_b = entropy_f(np.sqrt(det2(bb)))
    return s_a + s_b - entropy_f(d_plus) - entropy_f(d_minus)
