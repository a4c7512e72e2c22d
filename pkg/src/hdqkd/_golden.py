import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, a: float, b: float, tol: float):
    """Maximise a unimodal ``f`` on [a, b] to an interval width below ``tol``.

    Returns ``(x, f(x))`` for the best point evaluated; ties go to the smaller x.
    """
    a, b = min(a, b), max(a, b)
    best = [(f(a), -a), (f(b), -b)]
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best += [(fc, -c), (fd, -d)]
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
            best.append((fc, -c))
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
            best.append((fd, -d))
    value, neg_x = max(best)
    return -neg_x, value
