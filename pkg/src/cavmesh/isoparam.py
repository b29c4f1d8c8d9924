"""Quadratic iso-parametric triangles and radial interpolants.

Reference triangle: vertices ``(0, 0), (1, 0), (0, 1)`` with barycentric
coordinates ``l1 = 1 - x1 - x2, l2 = x1, l3 = x2``. Six-node quantities are
always ordered ``(a1, a2, a3, a12, a13, a23)``.

For a radial deformation ``v(x) = s(|x|) x / |x|`` sampled on a layer
``eps <= |x| <= eps + tau`` the interpolant of a layer element only
depends on ``s0 = s(eps)``, ``s_half = s(eps + tau/2)``, ``s1 = s(eps + tau)``
and the angular count ``N``. Its Jacobian determinant is a quadratic
``H(y, z)`` in ``y = x1 + x2`` and ``z = x1 * x2``; closed forms for both
element orientations (A: one vertex on the inner circle, B: one vertex on
the outer circle) live here next to generic differentiation of the
quadratic map, so the two can be checked against each other.
"""

import math
from dataclasses import dataclass

import numpy as np

NODE_ORDER = ("a1", "a2", "a3", "a12", "a13", "a23")


def barycentric(xhat):
    xhat = np.asarray(xhat, dtype=float)
    x1, x2 = xhat[..., 0], xhat[..., 1]
    return np.stack([1.0 - x1 - x2, x1, x2])


def basis(xhat):
    """Values of the six quadratic basis functions, shape ``(6, ...)``."""
    l1, l2, l3 = barycentric(xhat)
    return np.stack([
        l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), l3 * (2 * l3 - 1),
        4 * l1 * l2, 4 * l1 * l3, 4 * l2 * l3,
    ])


def basis_gradients(xhat):
    """Derivatives of the basis w.r.t. ``(x1, x2)``, shape ``(6, 2, ...)``."""
    l1, l2, l3 = barycentric(xhat)
    zero = np.zeros_like(l1)
    return np.array([
        [1 - 4 * l1, 1 - 4 * l1],
        [4 * l2 - 1, zero],
        [zero, 4 * l3 - 1],
        [4 * (l1 - l2), -4 * l2],
        [-4 * l3, 4 * (l1 - l3)],
        [4 * l3, 4 * l2],
    ])


@dataclass(frozen=True, eq=False)
class ControlNet:
    """Six control points of a quadratic triangle in the node order above."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(6, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_nodes(cls, a1, a2, a3, a12, a13, a23):
        return cls(np.array([a1, a2, a3, a12, a13, a23], dtype=float))

    @classmethod
    def straight(cls, a1, a2, a3):
        a1, a2, a3 = (np.asarray(a, dtype=float) for a in (a1, a2, a3))
        return cls.from_nodes(a1, a2, a3, (a1 + a2) / 2, (a1 + a3) / 2, (a2 + a3) / 2)

    def __getattr__(self, name):
        if name in NODE_ORDER:
            return self.points[NODE_ORDER.index(name)]
        raise AttributeError(name)

    def rotated(self, angle):
        c, s = math.cos(angle), math.sin(angle)
        return ControlNet(self.points @ np.array([[c, s], [-s, c]]))

    def mapped(self, func):
        """Apply a point map to every control point (nodal interpolation)."""
        return ControlNet(np.array([func(p) for p in self.points]))


def map_FT(net, xhat):
    """Evaluate the quadratic map at reference point(s) ``xhat`` (``(..., 2)``)."""
    return np.einsum("k...,kd->...d", basis(xhat), net.points)


def jacobian_FT(net, xhat):
    """Jacobian matrix ``dF/dxhat`` (``(..., 2, 2)``) and its determinant."""
    grads = basis_gradients(xhat)  # (6, 2, ...)
    jac = np.einsum("kj...,kd->...dj", grads, net.points)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    return jac, det


def det_poly_coeffs(net):
    """Monomial coefficients of ``det dF/dxhat``.

    Returns ``(c00, c10, c01, c20, c11, c02)`` with
    ``det = c00 + c10 x1 + c01 x2 + c20 x1^2 + c11 x1 x2 + c02 x2^2``.
    Each column of the Jacobian is affine in ``xhat``, so the coefficients
    are sums of 2-D cross products of the affine parts.
    """
    a1, a2, a3, a12, a13, a23 = net.points
    u0 = -3 * a1 - a2 + 4 * a12
    u1 = 4 * a1 + 4 * a2 - 8 * a12
    u2 = 4 * a1 - 4 * a12 - 4 * a13 + 4 * a23
    w0 = -3 * a1 - a3 + 4 * a13
    w1 = u2
    w2 = 4 * a1 + 4 * a3 - 8 * a13

    def cross(p, q):
        return p[0] * q[1] - p[1] * q[0]

    return np.array([
        cross(u0, w0),
        cross(u0, w1) + cross(u1, w0),
        cross(u0, w2) + cross(u2, w0),
        cross(u1, w1),
        cross(u1, w2) + cross(u2, w1),
        cross(u2, w2),
    ])


def eval_det_poly(coeffs, xhat):
    xhat = np.asarray(xhat, dtype=float)
    x1, x2 = xhat[..., 0], xhat[..., 1]
    c00, c10, c01, c20, c11, c02 = coeffs
    return c00 + x1 * (c10 + c20 * x1 + c11 * x2) + x2 * (c01 + c02 * x2)


@dataclass(frozen=True)
class RadialSamples:
    """``s`` at the inner radius, mid radius and outer radius of one layer."""

    s0: float
    s_half: float
    s1: float

    def __post_init__(self):
        if not (self.s0 > 0 and self.s_half > 0 and self.s1 > 0):
            raise ValueError(f"samples must be positive: {self}")

    @property
    def kappa0(self):
        return self.s0 / self.s1

    @property
    def kappa_half(self):
        return self.s_half / self.s1

    def scaled(self, c):
        return RadialSamples(c * self.s0, c * self.s_half, c * self.s1)

    @classmethod
    def identity(cls, eps, tau):
        return cls(eps, eps + 0.5 * tau, eps + tau)

    @classmethod
    def from_solution(cls, solution, eps, tau):
        return cls(solution.r_at(eps), solution.r_at(eps + 0.5 * tau), solution.r_at(eps + tau))

    @classmethod
    def from_function(cls, s, eps, tau):
        return cls(s(eps), s(eps + 0.5 * tau), s(eps + tau))


@dataclass(frozen=True)
class JacobianFormA:
    alpha1: float
    alpha2: float
    alpha3: float
    beta: float
    gamma: float
    N: int
    samples: RadialSamples


@dataclass(frozen=True)
class JacobianFormB:
    """Coefficients of the outer-vertex element (barred quantities)."""

    alpha1: float
    alpha2: float
    alpha3: float
    beta: float
    gamma: float
    N: int
    samples: RadialSamples


def _check_n(N):
    if N < 2:
        raise ValueError(f"angular count N must be at least 2, got {N}")


def _trig(N):
    h = math.pi / (2 * N)
    return math.cos(h), math.sin(h), math.cos(2 * h), math.sin(2 * h)


def interp_radial_A(samples, N):
    _check_n(N)
    c, s, c2, s2 = _trig(N)
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return JacobianFormA(
        alpha1=s0 + s1 - 2 * sh * c,
        alpha2=-3 * s0 - s1 * c2 + 4 * sh * c,
        alpha3=s1 * c * c - 2 * sh * c + s0,
        beta=s1 * s2 - 4 * sh * s,
        gamma=s1 * s2 - 2 * sh * s,
        N=N, samples=samples,
    )


def interp_radial_B(samples, N):
    _check_n(N)
    c, s, c2, s2 = _trig(N)
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return JacobianFormB(
        alpha1=s0 + s1 - 2 * sh * c,
        alpha2=-3 * s1 - s0 * c2 + 4 * sh * c,
        alpha3=s0 * c * c - 2 * sh * c + s1,
        beta=s0 * s2 - 4 * sh * s,
        gamma=s0 * s2 - 2 * sh * s,
        N=N, samples=samples,
    )


def det_H_A(form, y, z):
    """``det d(Pi v)/dxhat`` on an A element at ``y = x1 + x2``, ``z = x1 x2``."""
    s1 = form.samples.s1
    sin2 = math.sin(math.pi / (2 * form.N)) ** 2
    a1, a2, b, g = form.alpha1, form.alpha2, form.beta, form.gamma
    return (16 * g * a1 * y * y - 64 * s1 * g * sin2 * z
            + (-8 * b * (a1 - s1 * sin2) + 4 * g * a2) * y - 2 * b * a2)


def det_H_B(form, y, z):
    s0 = form.samples.s0
    sin2 = math.sin(math.pi / (2 * form.N)) ** 2
    a1, a2, a3, b, g = form.alpha1, form.alpha2, form.alpha3, form.beta, form.gamma
    return (-16 * g * a1 * y * y + 64 * s0 * g * sin2 * z
            + (8 * b * a3 - 4 * g * a2) * y + 2 * b * a2)


def _polar(r, theta):
    return (r * math.cos(theta), r * math.sin(theta))


def radial_net_A(samples, N):
    """Nodal values of ``v`` on the A element centred on the positive x-axis."""
    if N < 1:
        raise ValueError(f"angular count N must be positive, got {N}")
    t, h = math.pi / N, math.pi / (2 * N)
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return ControlNet.from_nodes(
        (s0, 0.0), _polar(s1, -t), _polar(s1, t),
        _polar(sh, -h), _polar(sh, h), (s1, 0.0),
    )


def radial_net_B(samples, N):
    """Nodal values of ``v`` on the B element centred on the positive x-axis."""
    if N < 1:
        raise ValueError(f"angular count N must be positive, got {N}")
    t, h = math.pi / N, math.pi / (2 * N)
    s0, sh, s1 = samples.s0, samples.s_half, samples.s1
    return ControlNet.from_nodes(
        (s1, 0.0), _polar(s0, t), _polar(s0, -t),
        _polar(sh, h), _polar(sh, -h), (s0, 0.0),
    )


def yz_to_xhat(y, z):
    """Inverse of ``(x1, x2) -> (x1 + x2, x1 x2)`` choosing ``x1 >= x2``."""
    disc = np.sqrt(np.maximum(np.asarray(y) ** 2 / 4.0 - z, 0.0))
    return np.stack([y / 2.0 + disc, y / 2.0 - disc], axis=-1)
