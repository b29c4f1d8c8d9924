import numpy as np
import pytest

from cavmesh.conditions import check_type_A, check_type_B, identity_samples
from cavmesh.isoparam import ControlNet, det_poly_coeffs, eval_det_poly, radial_net_A, radial_net_B
from cavmesh.oracle import (
    COUNTEREXAMPLE, INDETERMINATE, POSITIVE, OracleConfig, batch_min_det, certify_net,
    certify_positive, decisive_sign, net_min_det, sample_min_det, triangle_grid,
)

ID1 = identity_samples(1.0)


@pytest.mark.parametrize("kw", [dict(grid=8), dict(grid=32.5), dict(margin=0.0), dict(subdivision_depth=-1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OracleConfig(**kw)


def test_grid_covers_closed_triangle():
    pts = triangle_grid(16)
    assert len(pts) == 17 * 18 // 2
    for v in ([0, 0], [1, 0], [0, 1], [0.5, 0.5]):
        assert np.any(np.all(np.isclose(pts, v), axis=1))
    assert np.all(pts.sum(axis=1) <= 1 + 1e-15)


def test_affine_constant():
    net = ControlNet.straight([0, 0], [2, 0], [0, 3])
    m, _ = net_min_det(net)
    assert m == pytest.approx(6.0, rel=1e-14)
    cert = certify_net(net)
    assert cert.status == POSITIVE and cert.depth == 0


def test_identity_type_A():
    assert net_min_det(radial_net_A(ID1, 2))[0] > 0
    assert net_min_det(radial_net_A(ID1, 1))[0] < 0
    cert = certify_net(radial_net_A(ID1, 1))
    assert cert.status == COUNTEREXAMPLE and cert.value <= 0


def test_failing_type_B_argmin_at_inner_midpoint():
    # near-threshold failures put the minimum at the inner edge midpoint
    for k in (1.0, 10.0, 100.0):
        s = identity_samples(k)
        for N in range(2, 40):
            if not check_type_B(s, N)[0]:
                m, arg = net_min_det(radial_net_B(s, N))
                assert m < 0
                assert np.allclose(arg, [0.5, 0.5])


def test_sample_matches_lemmas():
    for k in (1.0, 30.0):
        s = identity_samples(k)
        for N in range(2, 30):
            assert (net_min_det(radial_net_A(s, N))[0] > 0) == check_type_A(s, N)[0]
            assert (net_min_det(radial_net_B(s, N))[0] > 0) == check_type_B(s, N)[0]


def test_batch_equals_single():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(20, 6, 2))
    mins, args = batch_min_det(pts, OracleConfig(grid=40))
    for p, m, a in zip(pts, mins, args):
        m1, a1 = net_min_det(ControlNet(p), OracleConfig(grid=40))
        assert m == pytest.approx(m1, rel=1e-12, abs=1e-12)


def test_sample_min_det_generic_callable():
    m, arg = sample_min_det(lambda p: (p[:, 0] - 0.25) ** 2 + p[:, 1], OracleConfig(grid=20))
    assert m == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(arg, [0.25, 0.0])


def test_decisive_sign():
    assert decisive_sign(1e-3, 1.0) == 1
    assert decisive_sign(-1e-3, 1.0) == -1
    assert decisive_sign(1e-12, 1.0) == 0


def test_certificate_cross_oracle():
    rng = np.random.default_rng(5)
    cfg = OracleConfig(grid=100)
    n_pos = n_neg = 0
    for _ in range(500):
        # perturbed straight triangles: a mix of valid and tangled nets
        base = ControlNet.straight([0, 0], [1, 0], [0, 1]).points
        net = ControlNet(base + rng.normal(scale=rng.choice([0.05, 0.2, 0.4]), size=(6, 2)))
        m, _ = net_min_det(net, cfg)
        cert = certify_net(net, cfg)
        if m < 0:
            assert cert.status != POSITIVE
        if cert.status == POSITIVE:
            assert m > 0
            n_pos += 1
        elif cert.status == COUNTEREXAMPLE:
            n_neg += 1
            x1, x2 = cert.point
            assert eval_det_poly(det_poly_coeffs(net), cert.point) <= 0
            assert x1 >= 0 and x2 >= 0 and x1 + x2 <= 1
        if m > 1e-6:
            assert cert.status == POSITIVE
    assert n_pos > 50 and n_neg > 50


def test_certificate_indeterminate_on_touching_zero():
    # p = (x1 - 1/3)^2 + 1e-30: positive, but no shallow subdivision separates it from zero
    coeffs = np.array([1 / 9 + 1e-30, -2 / 3, 0.0, 1.0, 0.0, 0.0])
    cert = certify_positive(coeffs, OracleConfig(subdivision_depth=6))
    assert cert.status == INDETERMINATE


def test_certificate_to_dict():
    d = certify_net(radial_net_A(ID1, 1)).to_dict()
    assert d["status"] == COUNTEREXAMPLE and len(d["point"]) == 2
