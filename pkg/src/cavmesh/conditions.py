"""Exact orientation-preservation conditions for curved annulus layers.

A layer ``eps <= |x| <= eps + tau`` carries ``N`` couples of curved
elements (types A and B). For a radial deformation sampled as
``(s0, s_half, s1)`` the interpolant is orientation preserving on

* every A element iff ``cond_14 > 0`` and ``cond_15 > 0``,
* every B element iff ``cond_25 < 0``,

and, equivalently, iff ``4 s_half > 3 s0 + s1`` together with
``cos(pi / 2N) > max(l1, l2)``. The thresholds ``l1, l2, l3`` are roots of
a quadratic, a cubic and a quadratic in ``z = cos(pi / 2N)``; they are
computed in the half-gap variable ``w = (1 - z) / 2`` where the
coefficients carry no cancellation, so that ``1 - l`` keeps full relative
accuracy when ``l`` is close to 1.
"""

import math
from dataclasses import asdict, dataclass

from .isoparam import RadialSamples, det_H_A, det_H_B, interp_radial_A, interp_radial_B
from .roots import cubic_real_roots, quadratic_roots

STRICT_TOL = 1e-12


class PreconditionError(ValueError):
    """Samples do not come from a positive, increasing, convex profile with 2 s_half > s1."""


class LayerTooThickError(ValueError):
    """``4 s_half > 3 s0 + s1`` fails: no angular count can make the layer valid."""


class NoCountExists(ValueError):
    """No finite angular count satisfies the requested strict inequality."""


def _gaps(samples):
    """``(s1 - s0, s1 - s_half)``; both positive for increasing samples."""
    return samples.s1 - samples.s0, samples.s1 - samples.s_half


def cond_13(samples):
    return 2 * samples.s_half - samples.s1


def cond_26(samples):
    d0, dh = _gaps(samples)
    return 3 * d0 - 4 * dh


def cond_14(samples, N):
    h = math.pi / (2 * N)
    return -3 * samples.s0 - samples.s1 * math.cos(2 * h) + 4 * samples.s_half * math.cos(h)


def cond_15(samples, N):
    c = math.cos(math.pi / (2 * N))
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return -6 * s1 * c ** 3 + 4 * sh * c * c + (s0 + 9 * s1) * c - 8 * sh


def cond_25(samples, N):
    c = math.cos(math.pi / (2 * N))
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return 2 * s0 * c * c - 4 * sh * c + s0 + s1


def require_admissible(samples):
    """Raise :class:`PreconditionError` naming the first failed hypothesis."""
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    tol = STRICT_TOL * s1
    if not (s0 < sh < s1):
        raise PreconditionError(f"samples must be strictly increasing (s' > 0): {samples}")
    if sh - s0 > s1 - sh + tol:
        raise PreconditionError(f"samples must come from a convex profile (s'' >= 0): {samples}")
    if not cond_13(samples) > tol:
        raise PreconditionError(f"hypothesis 2*s_half > s1 violated: 2*{sh!r} <= {s1!r}")


def check_type_A(samples, N):
    """Verdict for the A elements with the two defining values."""
    require_admissible(samples)
    v14, v15 = cond_14(samples, N), cond_15(samples, N)
    tol = STRICT_TOL * samples.s1
    return (v14 > tol and v15 > tol), {"cond_14": v14, "cond_15": v15}


def check_type_B(samples, N):
    require_admissible(samples)
    v25 = cond_25(samples, N)
    return v25 < -STRICT_TOL * samples.s1, v25


@dataclass(frozen=True)
class Thresholds:
    """Threshold roots in ``z`` and their half-gaps ``w = (1 - z) / 2``."""

    l1: float
    l2: float
    l3: float
    w1: float
    w2: float
    w3: float

    @property
    def cos_bound(self):
        return max(self.l1, self.l2)

    @property
    def w_bound(self):
        return min(self.w1, self.w2)


def thresholds(samples):
    """Threshold roots, or ``None`` when ``4 s_half > 3 s0 + s1`` fails.

    With ``z = 1 - 2w`` the three polynomials become

    * ``8 s0 w^2 + 8 (s_half - s0) w - c26 = 0``   (l1, larger ``w``)
    * ``48 s1 w^3 - (56 s1 + 16 dh) w^2 + (16 dh + 2 d0) w + 4 dh - d0 = 0``
      (l2, middle root)
    * ``8 s1 w^2 - 8 dh w - c26 = 0``             (l3, larger ``w``)

    where ``d0 = s1 - s0``, ``dh = s1 - s_half`` and ``c26 = 3 d0 - 4 dh``.
    """
    c26 = cond_26(samples)
    if not c26 > STRICT_TOL * samples.s1:
        return None
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    d0, dh = _gaps(samples)
    w1 = quadratic_roots(8 * s0, 8 * (sh - s0), -c26)[-1]
    w3 = quadratic_roots(8 * s1, -8 * dh, -c26)[-1]
    cub = cubic_real_roots(48 * s1, -(56 * s1 + 16 * dh), 16 * dh + 2 * d0, 4 * dh - d0)
    if len(cub) != 3:
        raise ArithmeticError(f"threshold cubic has {len(cub)} real roots for {samples}")
    w2 = cub[1]
    return Thresholds(l1=1 - 2 * w1, l2=1 - 2 * w2, l3=1 - 2 * w3, w1=w1, w2=w2, w3=w3)


def _count_ok(N, g, m):
    return math.sin(math.pi / (2 * m * N)) ** 2 < g * (1 - STRICT_TOL)


def smallest_count(g, m=2):
    """Smallest ``N >= 1`` with ``sin^2(pi / (2 m N)) < g``.

    ``m = 2`` encodes ``cos(pi / 2N) > 1 - 2g``; ``m = 1`` encodes
    ``cos(pi / N) > 1 - 2g``.
    """
    if not g > 0:
        raise NoCountExists(f"half-gap {g} is not positive")
    if g >= 1:
        return 1
    N = int(math.floor(math.pi / (2 * m * math.asin(math.sqrt(g))))) + 1
    while not _count_ok(N, g, m):
        N += 1
    while N > 1 and _count_ok(N - 1, g, m):
        N -= 1
    return N


def verdict_theorem1(samples, N):
    """Combined verdict for both element types from the thresholds alone."""
    require_admissible(samples)
    th = thresholds(samples)
    if th is None:
        return False
    return _count_ok(N, th.w_bound, 2)


def count_for_samples(samples):
    """Smallest ``N`` passing :func:`verdict_theorem1`."""
    require_admissible(samples)
    th = thresholds(samples)
    if th is None:
        raise LayerTooThickError(
            f"layer too thick: 4*s_half - 3*s0 - s1 = {cond_26(samples):.3e} <= 0 for {samples}; "
            "reduce tau")
    return smallest_count(th.w_bound, 2)


def corner_check_A(samples, N):
    """``H > 0`` at the three corners of ``{0 <= y <= 1, 0 <= z <= y^2/4}``."""
    form = interp_radial_A(samples, N)
    tol = STRICT_TOL * samples.s1 ** 2
    return all(det_H_A(form, y, z) > tol for y, z in ((0.0, 0.0), (1.0, 0.0), (1.0, 0.25)))


def midpoint_check_B(samples, N):
    """``H > 0`` at the image of the inner-edge midpoint of a B element."""
    form = interp_radial_B(samples, N)
    return det_H_B(form, 1.0, 0.25) > STRICT_TOL * samples.s1 ** 2


@dataclass(frozen=True)
class ConditionReport:
    N: int
    cond_13: float
    cond_26: float
    cond_14: float
    cond_15: float
    cond_25: float
    l1: float
    l2: float
    l3: float
    cos_bound: float
    verdict_A: bool
    verdict_B: bool
    verdict: bool

    def to_dict(self):
        return asdict(self)


def condition_report(samples, N):
    ok_a, vals = check_type_A(samples, N)
    ok_b, v25 = check_type_B(samples, N)
    th = thresholds(samples)
    nan = float("nan")
    return ConditionReport(
        N=N, cond_13=cond_13(samples), cond_26=cond_26(samples),
        cond_14=vals["cond_14"], cond_15=vals["cond_15"], cond_25=v25,
        l1=th.l1 if th else nan, l2=th.l2 if th else nan, l3=th.l3 if th else nan,
        cos_bound=th.cos_bound if th else nan,
        verdict_A=ok_a, verdict_B=ok_b, verdict=ok_a and ok_b,
    )


def identity_samples(kappa):
    """Samples of ``s(t) = t`` on a layer of aspect ratio ``kappa`` and unit thickness."""
    return RadialSamples(kappa, kappa + 0.5, kappa + 1.0)


def identity_thresholds(kappa):
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    return thresholds(identity_samples(kappa))


def mesh_validity_N(kappa):
    """Smallest couple count for which the curved layer map itself is valid."""
    return smallest_count(identity_thresholds(kappa).w_bound, 2)


def affine_count(samples, eps, tau):
    """Smallest ``N`` with ``cos(pi/N) > max(s0/s1, eps/(eps+tau))`` (straight elements)."""
    gap = min((samples.s1 - samples.s0) / samples.s1, tau / (eps + tau))
    return smallest_count(0.5 * gap, 1)


@dataclass(frozen=True)
class LayerPlan:
    eps: float
    tau: float
    kappa: float
    N_hat: int
    N_deform: int
    N_tilde: int
    N_affine: int
    tau_tilde0: float
    tau_within_bound: bool
    cond_13: float
    cond_26: float
    l1: float
    l2: float
    l3: float

    def to_dict(self):
        return asdict(self)


def _plan(samples, eps, tau, tau_tilde0):
    if not (eps > 0 and tau > 0):
        raise ValueError("eps and tau must be positive")
    N_def = count_for_samples(samples)
    th = thresholds(samples)
    N_hat = mesh_validity_N(eps / tau)
    return LayerPlan(
        eps=eps, tau=tau, kappa=eps / tau, N_hat=N_hat, N_deform=N_def,
        N_tilde=max(N_hat, N_def), N_affine=affine_count(samples, eps, tau),
        tau_tilde0=tau_tilde0, tau_within_bound=tau <= tau_tilde0,
        cond_13=cond_13(samples), cond_26=cond_26(samples), l1=th.l1, l2=th.l2, l3=th.l3,
    )


def tau_tilde0(solution, eps):
    return min(1.0 - eps, math.sqrt(2.0 * solution.r_c / solution.max_r_second))


def deformation_N(solution, eps, tau):
    """Angular counts for one layer under the tabulated cavity solution.

    ``N_tilde = max(N_hat, N_deform)`` makes both the mesh map and the
    interpolated deformation orientation preserving. The sufficient
    thickness bound ``tau <= tau_tilde0`` is reported, not enforced; the
    hypotheses it guarantees are checked directly.
    """
    slack = 1e-12
    if eps < solution.rho * (1 - slack) or eps + tau > 1.0 + slack:
        raise ValueError(f"layer [{eps}, {eps + tau}] not inside [{solution.rho}, 1]")
    samples = RadialSamples.from_solution(solution, eps, tau)
    return _plan(samples, eps, tau, tau_tilde0(solution, eps))


def identity_plan(eps, tau):
    """Layer counts for the undeformed mesh (``s = id``, no thickness bound)."""
    return _plan(RadialSamples.identity(eps, tau), eps, tau, math.inf)


def affine_N(solution, eps, tau):
    return affine_count(RadialSamples.from_solution(solution, eps, tau), eps, tau)
