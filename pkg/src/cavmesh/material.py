"""Isotropic stored-energy density for planar cavitation problems.

The density is written in terms of the singular values ``v1, v2`` of the
deformation gradient::

    Phi(v1, v2) = omega * (v1**2 + v2**2)**(p/2) + g(v1 * v2)
    g(d)        = c1 * (d - 1)**2 / 2 + c2 / d

with ``1 < p < 2``. The defaults reproduce the planar benchmark
``p = 3/2``, ``omega = 2/3`` and ``g(x) = 2**(-1/4) * ((x - 1)**2 / 2 + 1/x)``.
"""

from dataclasses import asdict, dataclass

from .roots import BracketError, bisect, expand_upper

_PAPER_C = 2.0 ** -0.25
# g' is -c2/d^2 dominated here; small enough to bracket every root, large enough to square
_TINY = 1e-100


@dataclass(frozen=True)
class MaterialParams:
    p: float = 1.5
    omega: float = 2.0 / 3.0
    c1: float = _PAPER_C
    c2: float = _PAPER_C

    def __post_init__(self):
        if not 1.0 < self.p < 2.0:
            raise ValueError(f"exponent p must lie in (1, 2), got {self.p}")
        for name in ("omega", "c1", "c2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**{k: float(data[k]) for k in ("p", "omega", "c1", "c2") if k in data})

    # volumetric part
    def g(self, d):
        return 0.5 * self.c1 * (d - 1.0) ** 2 + self.c2 / d

    def g_prime(self, d):
        return self.c1 * (d - 1.0) - self.c2 / (d * d)

    def g_second(self, d):
        return self.c1 + 2.0 * self.c2 / (d * d * d)


@dataclass(frozen=True)
class GDerivedRoots:
    """Roots of ``g'`` that bound ``d(R) = r r' / R`` along a cavity solution."""

    d0: float
    d_minus: float
    d_plus: float


def _check_singular(v1, v2):
    if not (v1 > 0.0 and v2 > 0.0):
        raise ValueError(f"singular values must be positive, got ({v1}, {v2})")


def phi(v1, v2, params):
    """Energy density at singular values ``(v1, v2)``."""
    _check_singular(v1, v2)
    s = v1 * v1 + v2 * v2
    return params.omega * s ** (0.5 * params.p) + params.g(v1 * v2)


def phi_partials(v1, v2, params):
    """Return ``(Phi_1, Phi_2, Phi_11, Phi_12)``.

    ``Phi_11`` is strictly positive for every admissible argument because
    ``(p - 1) v1^2 + v2^2 > 0`` and ``g'' > 0``.
    """
    _check_singular(v1, v2)
    p, w = params.p, params.omega
    s = v1 * v1 + v2 * v2
    d = v1 * v2
    sp2 = s ** (0.5 * p - 2.0)
    a = w * p * sp2 * s
    g1 = params.g_prime(d)
    g2 = params.g_second(d)
    phi_1 = a * v1 + g1 * v2
    phi_2 = a * v2 + g1 * v1
    phi_11 = w * p * sp2 * ((p - 1.0) * v1 * v1 + v2 * v2) + g2 * v2 * v2
    phi_12 = w * p * (p - 2.0) * sp2 * v1 * v2 + g2 * d + g1
    return phi_1, phi_2, phi_11, phi_12


def _invert_g_prime(params, target, lo, hi):
    return bisect(lambda d: params.g_prime(d) - target, lo, hi)


def g_roots(params, r_c, d0_plus):
    """Compute ``d0``, ``d_minus`` and ``d_plus``.

    ``d0`` is the zero of ``g'``; ``d_minus`` solves
    ``g'(d) = -omega p r_c^(p-2)`` below ``d0``; ``d_plus`` is
    ``(g')^-1(g'(d0_plus) + omega p r_c^(p-2))``. ``g'`` is strictly
    increasing, so each root is bisected on a bracket grown by doubling.
    """
    if not (r_c > 0.0 and d0_plus > 0.0):
        raise ValueError("r_c and d0_plus must be positive")
    shift = params.omega * params.p * r_c ** (params.p - 2.0)
    try:
        hi = expand_upper(params.g_prime, _TINY, 1.0)
        d0 = _invert_g_prime(params, 0.0, _TINY, hi)
        d_minus = _invert_g_prime(params, -shift, _TINY, d0)
        target = params.g_prime(d0_plus) + shift
        hi = expand_upper(lambda d: params.g_prime(d) - target, _TINY, max(d0_plus, 1.0))
        d_plus = _invert_g_prime(params, target, _TINY, hi)
    except BracketError as exc:
        raise ArithmeticError(f"could not bracket a root of g': {exc}") from exc
    return GDerivedRoots(d0=d0, d_minus=d_minus, d_plus=d_plus)
