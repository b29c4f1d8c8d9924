import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from cavmesh.material import MaterialParams, g_roots, phi, phi_partials

P = MaterialParams()
pos = st.floats(0.05, 20.0, allow_nan=False)


def test_defaults():
    assert (P.p, P.omega) == (1.5, 2.0 / 3.0)
    assert P.c1 == P.c2 == pytest.approx(2.0 ** -0.25, rel=1e-15)


def test_phi_at_identity():
    # omega * 2^(p/2) + g(1)
    assert phi(1.0, 1.0, P) == pytest.approx(2 / 3 * 2 ** 0.75 + 2 ** -0.25, rel=1e-14)


@pytest.mark.parametrize("bad", [dict(p=1.0), dict(p=2.0), dict(omega=0.0), dict(c1=-1.0), dict(c2=0.0)])
def test_param_validation(bad):
    with pytest.raises(ValueError):
        MaterialParams(**bad)


@pytest.mark.parametrize("v", [(0.0, 1.0), (1.0, -0.1)])
def test_nonpositive_singular_values(v):
    with pytest.raises(ValueError):
        phi(*v, P)
    with pytest.raises(ValueError):
        phi_partials(*v, P)


def _fd(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


def test_partials_match_central_differences():
    v1, v2, h = 1.3, 0.9, 1e-6
    p1, p2, p11, p12 = phi_partials(v1, v2, P)
    assert p1 == pytest.approx(_fd(lambda t: phi(t, v2, P), v1, h), rel=1e-6)
    assert p2 == pytest.approx(_fd(lambda t: phi(v1, t, P), v2, h), rel=1e-6)
    assert p11 == pytest.approx(_fd(lambda t: phi_partials(t, v2, P)[0], v1, h), rel=1e-6)
    assert p12 == pytest.approx(_fd(lambda t: phi_partials(v1, t, P)[0], v2, h), rel=1e-6)


@given(pos, pos)
def test_partials_match_fd_everywhere(v1, v2):
    h = 1e-6 * min(v1, v2)
    p1, p2, p11, p12 = phi_partials(v1, v2, P)
    for got, ref in ((p1, _fd(lambda t: phi(t, v2, P), v1, h)),
                     (p11, _fd(lambda t: phi_partials(t, v2, P)[0], v1, h)),
                     (p12, _fd(lambda t: phi_partials(v1, t, P)[0], v2, h))):
        assert got == pytest.approx(ref, rel=1e-4, abs=1e-6 * (1 + abs(p1)))


@given(pos, pos, st.floats(1.01, 1.99), st.floats(0.1, 5.0))
def test_phi11_positive(v1, v2, p, w):
    assert phi_partials(v1, v2, MaterialParams(p=p, omega=w))[2] > 0


@given(pos, pos)
def test_symmetry(v1, v2):
    assert phi(v1, v2, P) == pytest.approx(phi(v2, v1, P), rel=1e-14)
    a = phi_partials(v1, v2, P)
    b = phi_partials(v2, v1, P)
    assert a[0] == pytest.approx(b[1], rel=1e-12)


def test_g_roots_against_brentq():
    r_c, d0p = 1.3137210842, 2.36
    roots = g_roots(P, r_c, d0p)
    shift = P.omega * P.p * r_c ** (P.p - 2)
    assert roots.d0 == pytest.approx(brentq(P.g_prime, 0.1, 10.0, xtol=1e-15), rel=1e-12)
    assert roots.d_minus == pytest.approx(brentq(lambda d: P.g_prime(d) + shift, 0.1, 10.0, xtol=1e-15), rel=1e-12)
    target = P.g_prime(d0p) + shift
    assert roots.d_plus == pytest.approx(brentq(lambda d: P.g_prime(d) - target, 0.1, 100.0, xtol=1e-15), rel=1e-12)
    assert roots.d_minus < roots.d0 < roots.d_plus


def test_g_roots_input_validation():
    with pytest.raises(ValueError):
        g_roots(P, -1.0, 2.0)


def test_dict_round_trip():
    q = MaterialParams(p=1.2, omega=0.5, c1=1.0, c2=3.0)
    assert MaterialParams.from_dict(q.to_dict()) == q


def test_g_second_positive_on_grid():
    d = np.geomspace(1e-3, 1e3, 200)
    assert np.all(P.g_second(d) > 0)
