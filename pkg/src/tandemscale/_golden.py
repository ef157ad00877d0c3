import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, rtol=1e-9, atol=1e-15, max_iter=200):
    """Minimise a unimodal ``f`` on the open interval ``(lo, hi)``.

    Endpoints are never evaluated.  Returns ``(x, f(x))`` for the best
    interior point seen.
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= rtol * max(1.0, abs(c)) + atol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    if fc <= fd:
        return c, fc
    return d, fd
