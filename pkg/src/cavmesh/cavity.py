"""Radially symmetric cavity solutions of the deficiency model.

A radial deformation ``u(x) = r(|x|) x / |x|`` of the annulus
``rho <= |x| <= 1`` is a critical point of ``int R Phi(r', r/R) dR`` when
``r`` solves the Euler-Lagrange equation, is traction free at the cavity
wall ``R = rho`` and satisfies ``r(1) = lambda``. The boundary value
problem is solved by shooting on the cavity radius ``a = r(rho)``: the
traction-free condition fixes ``r'(rho)`` for each ``a``, the second order
ODE is integrated outward with fixed-step RK4 on a geometric grid, and
``a`` is bisected until ``r(1)`` hits ``lambda``.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .material import MaterialParams, phi_partials
from .roots import BracketError, bisect, expand_upper

logger = logging.getLogger(__name__)


class NoCavitySolution(RuntimeError):
    """Shooting found no bracket: lambda is at or below the critical stretch."""


class IntegrationError(ArithmeticError):
    """The outward integration left the admissible set (r, r' > 0, finite)."""


@dataclass(frozen=True)
class CavityProblem:
    params: MaterialParams = field(default_factory=MaterialParams)
    rho: float = 0.01
    lam: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if not self.lam > 1.0:
            raise ValueError(f"lambda must exceed 1, got {self.lam}")


def residual_natural_bc(r0, rp0, problem):
    """Normal traction at the cavity wall for starting data ``(r(rho), r'(rho))``.

    Strictly increasing in ``rp0`` for fixed ``r0``; zero for the
    traction-free start.
    """
    if not (r0 > 0.0 and rp0 > 0.0):
        raise ValueError("r(rho) and r'(rho) must be positive")
    par, rho = problem.params, problem.rho
    s = rp0 * rp0 + (r0 / rho) ** 2
    d = r0 * rp0 / rho
    return par.omega * par.p * s ** (0.5 * par.p - 1.0) * rp0 * rho / r0 + par.g_prime(d)


def rhs_second_order(R, r, rp, params):
    """``r''`` from the expanded Euler-Lagrange equation.

    The numerator ``Phi_2 - Phi_1 + Phi_12 (r/R - r')`` is the product of
    ``(r/R - r')`` with a positive factor, so it vanishes exactly on
    homogeneous states without dividing by ``r/R - r'``.
    """
    v1, v2 = rp, r / R
    p1, p2, p11, p12 = phi_partials(v1, v2, params)
    if not p11 > 0.0:
        raise ArithmeticError(f"Phi_11 = {p11} is not positive")
    return (p2 - p1 + p12 * (v2 - v1)) / (R * p11)


def natural_slope(r0, problem):
    """Solve the traction-free condition for ``r'(rho)`` given ``r(rho)``."""
    # at d = 1e-100 the volumetric term dominates, so the residual is negative
    lo = 1e-100 * problem.rho / r0
    hi = expand_upper(lambda b: residual_natural_bc(r0, b, problem), lo, 1.0)
    return bisect(lambda b: residual_natural_bc(r0, b, problem), lo, hi)


def geometric_grid(rho, n):
    """``n`` geometric intervals from ``rho`` to 1, denser near the cavity."""
    grid = rho * (1.0 / rho) ** (np.arange(n + 1) / n)
    grid[0], grid[-1] = rho, 1.0
    return grid


def _rk4_path(grid, r, rp, params, keep=True):
    acc = lambda x, y, yp: rhs_second_order(x, y, yp, params)  # noqa: E731
    n = len(grid) - 1
    rs, rps = [r], [rp]
    for k in range(n):
        x = float(grid[k])
        h = float(grid[k + 1]) - x
        k1r, k1v = rp, acc(x, r, rp)
        k2r = rp + 0.5 * h * k1v
        k2v = acc(x + 0.5 * h, r + 0.5 * h * k1r, k2r)
        k3r = rp + 0.5 * h * k2v
        k3v = acc(x + 0.5 * h, r + 0.5 * h * k2r, k3r)
        k4r = rp + h * k3v
        k4v = acc(x + h, r + h * k3r, k4r)
        r = r + h / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r)
        rp = rp + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (math.isfinite(r) and math.isfinite(rp) and r > 0.0 and rp > 0.0):
            raise IntegrationError(f"left admissible set at R = {grid[k + 1]:.6g}")
        if keep:
            rs.append(r)
            rps.append(rp)
    return (np.array(rs), np.array(rps)) if keep else (r, rp)


def integrate_from(R0, r0, rp0, R1, params, steps=200):
    """Integrate the ODE from ``R0`` to ``R1`` with ``steps`` uniform RK4 steps.

    Returns ``(r, r', r'')`` at ``R1``. Used to restart the integration
    from a tabulated state, independently of any interpolation.
    """
    grid = np.linspace(R0, R1, steps + 1)
    r, rp = _rk4_path(grid, r0, rp0, params, keep=False)
    return r, rp, rhs_second_order(R1, r, rp, params)


@dataclass(frozen=True, eq=False)
class RadialSolution:
    """Tabulated cavity solution ``r, r', r''`` on an increasing grid over ``[rho, 1]``."""

    grid: np.ndarray
    r: np.ndarray
    r_prime: np.ndarray
    r_second: np.ndarray
    rho: float
    lam: float
    params: MaterialParams

    def __post_init__(self):
        for name in ("grid", "r", "r_prime", "r_second"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.grid) == len(self.r) == len(self.r_prime) == len(self.r_second)):
            raise ValueError("tabulated arrays must have equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    @property
    def r_c(self):
        return float(self.r[0])

    @cached_property
    def m(self):
        return float(np.min(self.r_prime / self.grid))

    @cached_property
    def M(self):
        return float(np.max(self.r_prime / self.grid))

    @cached_property
    def Q(self):
        """Finite-difference estimate of ``max |r'''|``."""
        return float(np.max(np.abs(np.gradient(self.r_second, self.grid))))

    @property
    def max_r_second(self):
        return float(np.max(self.r_second))

    @property
    def d(self):
        """Area stretch ``d(R) = r r' / R`` on the grid."""
        return self.r * self.r_prime / self.grid

    @property
    def stress(self):
        """Radial Cauchy stress ``T(R) = (R / r) Phi_1(r', r/R)`` on the grid."""
        return np.array([
            R / r * phi_partials(rp, r / R, self.params)[0]
            for R, r, rp in zip(self.grid, self.r, self.r_prime)
        ])

    @cached_property
    def _splines(self):
        return (
            CubicHermiteSpline(self.grid, self.r, self.r_prime),
            CubicHermiteSpline(self.grid, self.r_prime, self.r_second),
            PchipInterpolator(self.grid, self.r_second),
        )

    def sample(self, t):
        """Return ``(r, r', r'')`` at radius ``t`` in ``[rho, 1]``.

        ``r`` and ``r'`` are cubic Hermite interpolants built from the exact
        tabulated derivatives; ``r''`` is shape-preserving (PCHIP). All
        three reproduce the table at grid points.
        """
        lo, hi = self.grid[0], self.grid[-1]
        slack = 1e-12 * hi
        if not (lo - slack <= t <= hi + slack):
            raise ValueError(f"radius {t} outside [{lo}, {hi}]")
        t = min(max(t, lo), hi)
        k = np.searchsorted(self.grid, t)
        if k < len(self.grid) and self.grid[k] == t:
            return float(self.r[k]), float(self.r_prime[k]), float(self.r_second[k])
        sr, srp, srpp = self._splines
        return float(sr(t)), float(srp(t)), float(srpp(t))

    def r_at(self, t):
        return self.sample(t)[0]

    def to_dict(self):
        return {
            "rho": self.rho,
            "lambda": self.lam,
            "params": self.params.to_dict(),
            "grid": self.grid.tolist(),
            "r": self.r.tolist(),
            "r_prime": self.r_prime.tolist(),
            "r_second": self.r_second.tolist(),
            "m": self.m,
            "M": self.M,
            "Q": self.Q,
            "r_c": self.r_c,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                grid=data["grid"], r=data["r"], r_prime=data["r_prime"],
                r_second=data["r_second"], rho=float(data["rho"]),
                lam=float(data["lambda"]), params=MaterialParams.from_dict(data["params"]),
            )
        except KeyError as exc:
            raise ValueError(f"solution document is missing field {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def from_profile(cls, r, r_prime, r_second, rho, grid_size=400, params=None):
        """Tabulate an analytic profile, e.g. a synthetic convex ``s(t)``."""
        grid = geometric_grid(rho, grid_size)
        return cls(
            grid=grid, r=[r(t) for t in grid], r_prime=[r_prime(t) for t in grid],
            r_second=[r_second(t) for t in grid], rho=rho, lam=float(r(1.0)),
            params=params or MaterialParams(),
        )


def shoot(a, problem, grid):
    """Outward integration from ``r(rho) = a``; returns ``(r, r')`` arrays."""
    return _rk4_path(grid, a, natural_slope(a, problem), problem.params)


def solve(problem, grid_size=2000, tol=1e-12):
    """Shoot on ``r(rho)`` until ``|r(1) - lambda| < tol`` or the bracket collapses.

    ``r(1)`` exceeds ``a`` for any admissible shot, so ``a = lambda`` is an
    upper bracket; lower brackets are searched by halving ``a``. Raises
    :class:`NoCavitySolution` if no shot lands below ``lambda``.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    grid = geometric_grid(problem.rho, grid_size)
    lam = problem.lam
    seen = []

    def end_value(a):
        try:
            r, _ = _rk4_path(grid, a, natural_slope(a, problem), problem.params, keep=False)
        except (IntegrationError, BracketError, OverflowError, ZeroDivisionError):
            return None
        seen.append((a, r))
        return r

    hi = lam
    f_hi = end_value(hi)
    if f_hi is None or f_hi < lam:
        raise NoCavitySolution(f"shot from r(rho) = lambda did not overshoot (lambda = {lam})")
    lo = None
    a = lam
    for _ in range(60):
        a *= 0.5
        f = end_value(a)
        if f is not None and f < lam:
            lo = a
            break
        if f is not None:
            hi = a
    if lo is None:
        raise NoCavitySolution(f"no cavity solution found for lambda = {lam}, rho = {problem.rho}")

    def miss(a):
        f = end_value(a)
        if f is None:
            raise IntegrationError(f"shot from r(rho) = {a!r} blew up inside the bracket")
        return f - lam

    best = bisect(miss, lo, hi, xtol=0.0) if abs(miss(lo)) > tol else lo
    pts = sorted(seen)
    if any(b[1] < a[1] - 1e-12 * lam for a, b in zip(pts[:-1], pts[1:])):
        logger.warning("r(1) was not monotone in r(rho) over the evaluated shots")

    r, rp = shoot(best, problem, grid)
    rpp = np.array([rhs_second_order(R, x, y, problem.params) for R, x, y in zip(grid, r, rp)])
    sol = RadialSolution(grid=grid, r=r, r_prime=rp, r_second=rpp,
                         rho=problem.rho, lam=lam, params=problem.params)
    logger.info("cavity solved: r_c=%.12g r(1)-lambda=%.3e", sol.r_c, r[-1] - lam)
    return sol
