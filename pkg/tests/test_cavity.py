import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavmesh.cavity import (
    CavityProblem, RadialSolution, integrate_from, natural_slope, residual_natural_bc,
    rhs_second_order, solve,
)
from cavmesh.material import MaterialParams, g_roots, phi_partials

P = MaterialParams()
PROB = CavityProblem()


def test_problem_validation():
    with pytest.raises(ValueError):
        CavityProblem(rho=0.0)
    with pytest.raises(ValueError):
        CavityProblem(rho=1.0)
    with pytest.raises(ValueError):
        CavityProblem(lam=1.0)


def test_grid_size_validated():
    with pytest.raises(ValueError):
        solve(PROB, grid_size=50)


def test_residual_increasing_in_slope():
    slopes = np.geomspace(1e-4, 50, 400)
    res = [residual_natural_bc(1.3, b, PROB) for b in slopes]
    assert np.all(np.diff(res) > 0)


@given(st.floats(0.01, 5.0), st.floats(1e-4, 5.0))
def test_negative_residual_means_d_below_d0(r0, rp0):
    d0 = g_roots(P, 1.0, 2.0).d0
    if residual_natural_bc(r0, rp0, PROB) < 0:
        assert r0 * rp0 / PROB.rho < d0


def test_natural_slope_zeroes_residual():
    b = natural_slope(1.3, PROB)
    assert abs(residual_natural_bc(1.3, b, PROB)) < 1e-12


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.0])
def test_homogeneous_state_has_zero_curvature(lam):
    for R in (0.01, 0.3, 1.0):
        assert rhs_second_order(R, lam * R, lam, P) == 0.0


@given(st.floats(0.01, 1.0), st.floats(0.05, 4.0), st.floats(0.05, 4.0))
def test_curvature_sign(R, ratio, rp):
    r = ratio * R
    val = rhs_second_order(R, r, rp, P)
    gap = r / R - rp
    if abs(gap) > 1e-9:
        assert np.sign(val) == np.sign(gap)


def test_solution_invariants(solution):
    s = solution
    assert abs(s.r[-1] - 2.0) < 1e-8
    assert np.all(np.diff(s.r) > 0)
    assert np.all(s.r_prime > 0)
    assert np.all(s.r_second > 0)
    ratio = s.r_prime / s.grid
    assert s.m == ratio.min() and s.M == ratio.max()
    assert s.m > 0 and math.isfinite(s.M)
    assert abs(residual_natural_bc(s.r[0], s.r_prime[0], PROB)) < 1e-6


def test_solution_recorded_values(solution):
    # frozen from the shooting run
    assert solution.r_c == pytest.approx(1.3137210842, rel=1e-9)
    assert solution.m == pytest.approx(1.11558, rel=1e-4)
    assert solution.M == pytest.approx(1.53101, rel=1e-4)
    assert solution.max_r_second == pytest.approx(1.6454, rel=1e-3)


def test_lower_slope_bound(solution):
    roots = g_roots(P, solution.r_c, float(solution.d.max()))
    assert np.all(solution.r_prime >= roots.d_minus / solution.lam * solution.grid)
    assert np.all(solution.d >= roots.d_minus) and np.all(solution.d <= roots.d_plus)


def test_curvature_matches_fd_of_slope(solution):
    g, rp, rpp = solution.grid, solution.r_prime, solution.r_second
    fd = (rp[2:] - rp[:-2]) / (g[2:] - g[:-2])
    # non-uniform central difference is first-order; compare on the smooth part
    np.testing.assert_allclose(fd, rpp[1:-1], rtol=1e-5, atol=1e-5 * rpp.max())


def test_euler_lagrange_residual_fd(solution):
    g, r, rp = solution.grid, solution.r, solution.r_prime
    flux = np.array([R * phi_partials(b, x / R, P)[0] for R, x, b in zip(g, r, rp)])
    p2 = np.array([phi_partials(b, x / R, P)[1] for R, x, b in zip(g, r, rp)])
    dflux = (flux[2:] - flux[:-2]) / (g[2:] - g[:-2])
    assert np.max(np.abs(dflux - p2[1:-1])) < 1e-5 * max(1.0, np.max(np.abs(p2)))


def test_stress_nondecreasing_and_traction_free(solution):
    t = solution.stress
    assert abs(t[0]) < 1e-6
    assert np.all(np.diff(t) >= -1e-12)


def test_sample_exact_at_nodes(solution):
    for k in (0, 17, 1000, len(solution.grid) - 1):
        got = solution.sample(float(solution.grid[k]))
        assert got == (solution.r[k], solution.r_prime[k], solution.r_second[k])


def test_sample_range(solution):
    with pytest.raises(ValueError):
        solution.sample(0.005)
    with pytest.raises(ValueError):
        solution.sample(1.01)


def test_sample_monotone_between_nodes(solution):
    t = np.linspace(solution.rho, 1.0, 5001)
    r = np.array([solution.r_at(x) for x in t])
    assert np.all(np.diff(r) > 0)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.01, 1.0))
def test_sample_matches_reintegration(solution, u, frac):
    eps = solution.rho * (1.0 / solution.rho) ** (0.9 * u)
    tau = frac * (1.0 - eps)
    target = eps + 0.5 * tau
    k = int(np.searchsorted(solution.grid, target)) - 1
    k = max(k, 0)
    r, rp, _ = integrate_from(solution.grid[k], solution.r[k], solution.r_prime[k], target, P, steps=50)
    assert solution.r_at(target) == pytest.approx(r, rel=1e-6)


def test_grid_refinement(solution):
    fine = solve(PROB, grid_size=4000)
    assert abs(fine.r_c - solution.r_c) < 1e-6


def test_json_round_trip(solution, tmp_path):
    path = tmp_path / "sol.json"
    solution.save(path)
    back = RadialSolution.load(path)
    for name in ("grid", "r", "r_prime", "r_second"):
        np.testing.assert_array_equal(getattr(back, name), getattr(solution, name))
    assert back.params == solution.params and back.lam == solution.lam


def test_from_dict_missing_field():
    with pytest.raises(ValueError):
        RadialSolution.from_dict({"grid": [0.1, 1.0]})


def test_from_profile():
    s = RadialSolution.from_profile(lambda t: 1 + t ** 3, lambda t: 3 * t * t, lambda t: 6 * t, 0.1)
    assert s.r_c == pytest.approx(1.001)
    assert s.r_at(0.5) == pytest.approx(1.125, rel=1e-8)


def test_near_critical_stretch_is_recorded():
    # lambda barely above 1: the solver either fails cleanly or returns a tiny cavity
    from cavmesh.cavity import NoCavitySolution
    try:
        s = solve(CavityProblem(lam=1.0001), grid_size=400)
    except NoCavitySolution:
        return
    assert abs(s.r[-1] - 1.0001) < 1e-8
    assert s.r_c < 0.05
