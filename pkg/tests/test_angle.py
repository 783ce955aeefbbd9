import math

import numpy as np
import pytest

from adsflow.angle import (
    angle_by_continuation,
    angle_by_eigenvalues,
    angle_from_mixed,
    angle_gradient_ginv,
    angle_hessian,
    curvature_function_derivs,
    curvature_function_hessian,
    curvature_spec,
    elementary_symmetric,
    sigma_forms,
    sigma_inverse_closed_form,
    smooth_angle,
    two_positive_margin,
    weingarten_powers,
)
from adsflow.pseudo_euclidean import ContractError

I2 = np.eye(2)
H11 = np.array([[1.0, 1.0], [1.0, 2.0]])


def test_angle_maximal_point():
    ev = smooth_angle(I2, np.zeros((2, 2)), 1.0)
    assert ev.phi == 0.0 and ev.a == 0.0 and ev.b == 1.0


def test_angle_umbilic_unit():
    assert smooth_angle(I2, I2, 1.0).phi == pytest.approx(math.pi / 2, abs=1e-15)


def test_angle_beyond_quarter_turn():
    ev = smooth_angle(I2, np.diag([2.0, 3.0]), 1.0)
    assert (ev.a, ev.b) == (5.0, -5.0)
    assert ev.phi == pytest.approx(3 * math.pi / 4, abs=1e-15)
    assert ev.phi == pytest.approx(math.atan(2) + math.atan(3), abs=1e-15)


def test_angle_scaled_curvature():
    assert smooth_angle(I2, 2 * I2, 4.0).phi == pytest.approx(math.pi / 4, abs=1e-15)


def test_angle_rejects_nonpositive_kappa():
    with pytest.raises(ContractError):
        smooth_angle(I2, I2, 0.0)


def test_angle_rejects_indefinite_metric():
    with pytest.raises(ContractError):
        smooth_angle(np.diag([1.0, -1.0]), I2, 1.0)


def test_three_dim_branch_needs_prior():
    # eigenvalues (3, 3, 3): sqrt(k) phi = 3 atan(3) > pi; atan2 alone is ambiguous
    with pytest.raises(ContractError):
        smooth_angle(np.eye(3), 3 * np.eye(3), 1.0)
    ev = smooth_angle(np.eye(3), 3 * np.eye(3), 1.0, prior=3.7)
    assert ev.phi == pytest.approx(3 * math.atan(3), abs=1e-13)
    assert ev.winding == 1


def test_continuation_matches_arctan_sum(rng):
    for _ in range(20):
        lam = rng.uniform(-6, 6, 4)
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        h = Q @ np.diag(lam) @ Q.T
        ev = angle_by_continuation(np.eye(4), h, 1.0)
        assert ev.phi == pytest.approx(np.arctan(lam).sum(), abs=1e-12)


def test_elementary_symmetric_of_diagonal():
    s = elementary_symmetric(np.diag([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(s, [1, 6, 11, 6], atol=1e-13)


def test_angle_from_mixed_non_symmetric():
    # a non-symmetric matrix with real eigenvalues 1 and 2
    X = np.array([[1.0, 5.0], [0.0, 2.0]])
    assert angle_from_mixed(X, 1.0).phi == pytest.approx(math.atan(1) + math.atan(2), abs=1e-15)


def test_angle_oracle_agrees(rng):
    A = rng.standard_normal((50, 3, 3))
    g = A @ A.transpose(0, 2, 1) + np.eye(3)
    B = rng.standard_normal((50, 3, 3))
    h = 0.3 * (B + B.transpose(0, 2, 1))
    np.testing.assert_allclose(smooth_angle(g, h, 2.0).phi, angle_by_eigenvalues(g, h, 2.0), atol=1e-12)


@pytest.mark.parametrize(
    "h,sigma,sigma_inv",
    [
        (np.zeros((2, 2)), I2, I2),
        (np.diag([1.0, 2.0]), np.diag([2.0, 5.0]), np.diag([0.5, 0.2])),
        (H11, np.array([[3.0, 3.0], [3.0, 6.0]]), np.array([[2.0, -1.0], [-1.0, 1.0]]) / 3),
    ],
)
def test_sigma_examples(h, sigma, sigma_inv):
    s, si = sigma_forms(I2, h, 1.0)
    np.testing.assert_allclose(s, sigma, atol=1e-15)
    np.testing.assert_allclose(si, sigma_inv, atol=1e-15)
    np.testing.assert_allclose(sigma_inverse_closed_form(I2, h, 1.0), sigma_inv, atol=1e-15)


def test_sigma_closed_form_identity():
    # H = 3, K = 1 gives (9 I - 3 h) / 9
    np.testing.assert_allclose(sigma_inverse_closed_form(I2, H11, 1.0), (9 * I2 - 3 * H11) / 9, atol=1e-15)


def test_hessian_vanishes_at_h_zero():
    assert np.all(angle_hessian(I2, np.zeros((2, 2)), 1.0) == 0)


def test_gradient_ginv_vanishes_at_h_zero():
    assert np.all(angle_gradient_ginv(2 * I2, np.zeros((2, 2)), 1.0) == 0)


def test_weingarten_powers():
    g = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(weingarten_powers(g, H11, 0), g)
    np.testing.assert_allclose(weingarten_powers(I2, H11, 2), [[2, 3], [3, 5]], atol=1e-15)
    with pytest.raises(ContractError):
        weingarten_powers(I2, H11, -1)


@pytest.mark.parametrize("lam,expected", [((0.0, 0.0), 2.0), ((1.0, 1.0), 0.0), ((2.0, 0.0), 0.4)])
def test_two_positive_margin_examples(lam, expected):
    assert two_positive_margin(I2, np.diag(lam), 1.0) == pytest.approx(expected, abs=1e-15)


def test_two_positive_margin_matches_eigen_sum(rng):
    lam = rng.uniform(-3, 3, (100, 2))
    k = 1.7
    direct = sum((k - lam[:, i] ** 2) / (k + lam[:, i] ** 2) for i in range(2))
    h = np.zeros((100, 2, 2))
    h[:, 0, 0], h[:, 1, 1] = lam[:, 0], lam[:, 1]
    np.testing.assert_allclose(two_positive_margin(np.broadcast_to(I2, h.shape), h, k), direct, atol=1e-14)


def test_curvature_spec_mean():
    g = np.array([[2.0, 0.3], [0.3, 1.0]])
    GH, GK, Gup, _ = curvature_function_derivs(curvature_spec("H"), g, H11)
    assert GH == 1.0 and GK == 0.0
    np.testing.assert_allclose(Gup, np.linalg.inv(g), atol=1e-15)


def test_curvature_spec_gauss():
    _, _, Gup, Gdg = curvature_function_derivs(curvature_spec("K"), I2, H11)
    np.testing.assert_allclose(Gup, [[2, -1], [-1, 1]], atol=1e-15)
    np.testing.assert_allclose(Gdg, I2, atol=1e-15)


def test_curvature_spec_unknown():
    with pytest.raises(ContractError):
        curvature_spec("Q")


def test_angle_spec_hessian_matches_angle_hessian(rng):
    # the (H, K) chain rule and the sigma formula are independent routes
    A = rng.standard_normal((20, 2, 2))
    g = A @ A.transpose(0, 2, 1) + I2
    B = rng.standard_normal((20, 2, 2))
    h = 0.5 * (B + B.transpose(0, 2, 1))
    from adsflow.angle import symmetrize_hessian

    via_hk = symmetrize_hessian(curvature_function_hessian(curvature_spec("phi", 1.3), g, h))
    direct = symmetrize_hessian(angle_hessian(g, h, 1.3))
    np.testing.assert_allclose(via_hk, direct, atol=1e-12)
