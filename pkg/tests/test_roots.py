import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cavmesh.roots import BracketError, bisect, cubic_real_roots, expand_upper, quadratic_roots

coef = st.floats(-50, 50, allow_nan=False).filter(lambda v: abs(v) > 1e-3)


def test_bisect_reaches_machine_precision():
    root = bisect(lambda x: x * x - 2.0, 0.0, 2.0)
    assert abs(root - math.sqrt(2.0)) <= 2 * math.ulp(math.sqrt(2.0))


def test_bisect_requires_sign_change():
    with pytest.raises(BracketError):
        bisect(lambda x: x * x + 1.0, -1.0, 1.0)


def test_expand_upper_doubles_until_sign_change():
    hi = expand_upper(lambda x: x - 37.0, 0.0, 1.0)
    assert hi == 64.0


def test_quadratic_cancellation_free():
    # roots 1e-9 and 1e9: the naive formula loses the small one entirely
    r = quadratic_roots(1.0, -(1e9 + 1e-9), 1.0)
    assert r[0] == pytest.approx(1e-9, rel=1e-12)
    assert r[1] == pytest.approx(1e9, rel=1e-12)


def test_quadratic_no_real_roots():
    assert quadratic_roots(1.0, 0.0, 1.0) == ()


@settings(max_examples=200, deadline=None)
@given(coef, coef, coef, coef)
def test_cubic_matches_companion_eigenvalues(a, b, c, d):
    ref = np.roots([a, b, c, d])
    real = np.sort(ref[np.abs(ref.imag) < 1e-9 * (1 + np.abs(ref))].real)
    ours = cubic_real_roots(a, b, c, d)
    # skip near-double roots, where "real" is ill-conditioned for both methods
    gaps = np.diff(np.sort(ref.real))
    assume(len(gaps) == 0 or np.min(np.abs(np.diff(np.sort_complex(ref)))) > 1e-4)
    assert len(ours) == len(real)
    np.testing.assert_allclose(ours, real, rtol=1e-7, atol=1e-9)


def test_cubic_three_known_roots():
    roots = cubic_real_roots(1.0, -6.0, 11.0, -6.0)
    np.testing.assert_allclose(roots, [1.0, 2.0, 3.0], rtol=1e-14)
