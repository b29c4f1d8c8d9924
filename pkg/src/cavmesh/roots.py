"""Scalar root finding used across the package.

Everything here is bracketed: bisection on a sign change, with brackets
grown by doubling when only one end is known. Cubic roots are isolated
between critical points so that every simple real root gets its own
bracket.
"""

import math


class BracketError(ArithmeticError):
    """No sign change could be found for a bracketing method."""


def bisect(f, lo, hi, xtol=0.0, max_iter=2000):
    """Bisection on ``[lo, hi]`` where ``f(lo)`` and ``f(hi)`` differ in sign.

    Iterates until the bracket is narrower than ``xtol`` or until the
    midpoint is no longer representable between the ends (full machine
    precision). An exact zero at a midpoint terminates early.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo < 0) == (fhi < 0):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f = {flo!r}, {fhi!r}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= min(lo, hi) or mid >= max(lo, hi) or abs(hi - lo) <= xtol:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def expand_upper(f, lo, start, limit=1e300):
    """Double ``start`` until ``f`` changes sign relative to ``f(lo)``."""
    s_lo = f(lo) < 0
    hi = start
    while (f(hi) < 0) == s_lo:
        hi *= 2.0
        if hi > limit:
            raise BracketError(f"no sign change found above {lo!r}")
    return hi


def quadratic_roots(a, b, c):
    """Real roots of ``a z^2 + b z + c`` in ascending order.

    Uses the cancellation-free form of the quadratic formula. Returns an
    empty tuple when the discriminant is negative.
    """
    if a == 0.0:
        if b == 0.0:
            return ()
        return (-c / b,)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return ()
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0.0:
        return (0.0, 0.0)
    r1, r2 = q / a, c / q
    return (r1, r2) if r1 <= r2 else (r2, r1)


def cubic_real_roots(a, b, c, d):
    """Real roots of ``a z^3 + b z^2 + c z + d`` in ascending order.

    The real line is cut at the critical points of the cubic (roots of its
    derivative) and at a Cauchy bound; each piece on which the cubic is
    monotone holds at most one root, which is then bisected to full
    precision. Repeated roots that touch zero without a sign change are
    only reported when the critical value is exactly zero.
    """
    if a == 0.0:
        return quadratic_roots(b, c, d)

    def f(z):
        return ((a * z + b) * z + c) * z + d

    bound = 1.0 + max(abs(b / a), abs(c / a), abs(d / a))
    crit = [z for z in quadratic_roots(3.0 * a, 2.0 * b, c) if -bound < z < bound]
    knots = [-bound] + sorted(crit) + [bound]
    roots = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        flo, fhi = f(lo), f(hi)
        if flo == 0.0:
            if not roots or roots[-1] != lo:
                roots.append(lo)
            continue
        if fhi == 0.0 or (flo < 0) != (fhi < 0):
            roots.append(bisect(f, lo, hi))
    if f(knots[-1]) == 0.0 and (not roots or roots[-1] != knots[-1]):
        roots.append(knots[-1])
    return tuple(roots)
