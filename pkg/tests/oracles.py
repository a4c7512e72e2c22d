"""Independent high-precision reference implementations used only by tests.

Everything here works in mpmath on the lab-frame covariance matrix, with
symplectic eigenvalues taken from the spectrum of iΩΓ rather than from the
invariant formula used by the package.
"""
import mpmath as mp

DPS = 50


def lab_covariance(u, v, k, eta=0, eps=0, dps=DPS):
    mp.mp.dps = max(mp.mp.dps, dps)
    u, v, k, eta, eps = (mp.mpf(x) for x in (u, v, k, eta, eps))
    s, dif = u + v, u - v
    q = (4 * k * k + u * v) / (4 * k * k * u * v)
    aa = mp.matrix([[s / 16, -s / (8 * k)], [-s / (8 * k), s * q]])
    ab = mp.matrix([[dif / 16, dif / (8 * k)], [-dif / (8 * k), -dif * q]])
    bb = mp.matrix([[s / 16, s / (8 * k)], [s / (8 * k), s * q]])
    g = mp.matrix(4, 4)
    for i in range(2):
        for j in range(2):
            g[i, j] = aa[i, j]
            g[i, j + 2] = (1 - eta) * ab[i, j]
            g[i + 2, j] = (1 - eta) * ab[j, i]
            g[i + 2, j + 2] = (1 + eps) * bb[i, j]
    return g


def symplectic_spectrum(g):
    omega = mp.matrix([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0]])
    ev = mp.eig(mp.mpc(0, 1) * omega * g, left=False, right=False)
    mags = sorted((abs(x) for x in ev), reverse=True)
    return mags[0], mags[2]


def entropy(x):
    x = mp.mpf(x)
    if x <= mp.mpf(1) / 2:
        return mp.mpf(0)
    return (x + mp.mpf(1) / 2) * mp.log(x + mp.mpf(1) / 2, 2) - (x - mp.mpf(1) / 2) * mp.log(x - mp.mpf(1) / 2, 2)


def chi(u, v, k, eta, eps, dps=DPS):
    g = lab_covariance(u, v, k, eta, eps, dps)
    d_plus, d_minus = symplectic_spectrum(g)
    # Bob's block after projecting Alice's t quadrature
    cond = mp.matrix(2, 2)
    for i in range(2):
        for j in range(2):
            cond[i, j] = g[i + 2, j + 2] - g[i + 2, 0] * g[0, j + 2] / g[0, 0]
    det = cond[0, 0] * cond[1, 1] - cond[0, 1] * cond[1, 0]
    return entropy(d_plus) + entropy(d_minus) - entropy(mp.sqrt(det))


def epsilon(eta, xi, d):
    d2 = mp.mpf(d) ** 2
    return (mp.mpf(xi) - 2 * mp.mpf(eta) * (d2 - mp.mpf(1) / 4)) / (d2 + mp.mpf(1) / 4)
