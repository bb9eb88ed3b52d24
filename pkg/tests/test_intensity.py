import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, optimize

from kacgap import intensity as I
from kacgap.intervals import IntervalSet


def quad_a(x, j):
    return integrate.quad(lambda t: t**j * math.exp(2 * x * t), 0, 1, epsabs=0, epsrel=1e-13)[0]


def test_a_at_zero():
    for j in range(5):
        assert I.a_j(0.0, j) == pytest.approx(1 / (j + 1), abs=1e-15)


def test_a0_at_one():
    assert I.a_j(1.0, 0) == pytest.approx((math.e**2 - 1) / 2, rel=1e-14)
    assert I.a_j(1.0, 0) == pytest.approx(3.194528, abs=1e-6)


def test_a4_decay_ratio():
    assert I.a_j(-30.0, 4) / I.a_j(-60.0, 4) == pytest.approx(2**5, rel=0.2)


def test_a_j_range():
    with pytest.raises(ValueError):
        I.a_j(0.0, 5)


def test_dets_at_zero():
    d1, d2, eta = I.deltas_eta(0.0)
    assert d1 == pytest.approx(1 / 72, abs=1e-15)
    assert d2 == pytest.approx(1 / 240, abs=1e-15)
    assert eta == pytest.approx(1 / 2160, abs=1e-15)


def test_closed_vs_quadrature_200_points():
    for x in np.linspace(-20, 20, 200):
        for j in range(5):
            assert I.a_j(x, j) == pytest.approx(quad_a(x, j), rel=1e-10)


def test_seam_agreement():
    for x0 in (I.X_SWITCH, -I.X_SWITCH):
        for j in range(5):
            lo = I.a_j(np.nextafter(x0, 0), j)
            hi = I.a_j(x0, j)
            assert lo == pytest.approx(hi, rel=1e-11)
        below = I.deltas_eta(np.nextafter(x0, 0))
        above = I.deltas_eta(x0)
        for u, v in zip(below, above):
            assert u == pytest.approx(v, rel=1e-9)


def test_eta_gram_and_schur():
    for x in np.linspace(-20, 20, 41):
        H = np.array([[quad_a(x, i + k) for k in range(3)] for i in range(3)])
        _, d2, eta = I.deltas_eta(x)
        if abs(x) <= 5:
            # float determinants lose ~log10(x^9) digits beyond this
            assert eta == pytest.approx(np.linalg.det(H), rel=1e-8)
        a = [quad_a(x, j) for j in range(5)]
        if abs(x) <= 2:
            M = np.array([[a[2], a[3]], [a[3], a[4]]])
            v = np.array([a[1], a[2]])
            assert eta == pytest.approx(d2 * (a[0] - v @ np.linalg.solve(M, v)), rel=1e-8)


def test_sinh_form_cross_check():
    xs = np.concatenate([np.linspace(-15, -1, 30), np.linspace(1, 15, 30)])
    _, _, eta = I.deltas_eta(xs)
    np.testing.assert_allclose(I.eta_sinh_form(xs), eta, rtol=1e-6)


def test_positivity_dense_grid():
    xs = np.linspace(-50, 50, 10**4)
    d1, d2, eta = I.deltas_eta(xs)
    assert np.all(d1 > 0) and np.all(d2 > 0) and np.all(eta > 0)
    assert np.all(I.intensity_F(xs) > 0)
    assert np.all(I.intensity_F_joint(xs) > 0)


def test_F_at_zero():
    assert I.intensity_F(0.0) == pytest.approx(27 / (4 * math.pi * 1e4), rel=1e-10)
    assert I.intensity_F(0.0) == pytest.approx(2.14859e-4, rel=1e-5)


def test_F_tails():
    assert math.exp(40) * I.intensity_F(40.0) < math.exp(5) * I.intensity_F(5.0)
    assert I.intensity_F(-40.0) / I.intensity_F(-20.0) == pytest.approx(0.5**16, rel=2.0)
    r = I.intensity_F(-40.0) / I.intensity_F(-20.0) / 0.5**16
    assert 1 / 3 <= r <= 3


def test_joint_profile_even_and_value():
    xs = np.linspace(0, 30, 61)
    np.testing.assert_array_equal(I.intensity_F_joint(xs), I.intensity_F_joint(-xs))
    # eta^2 / (2 Delta0^3) at zero: (1/2160)^2 / (2 (1/12)^3)
    assert I.intensity_F_joint(0.0) == pytest.approx((1 / 2160) ** 2 / (2 / 12**3), rel=1e-13)


def test_c_star_K_basic():
    assert I.c_star_K(0) == 0
    assert I.c_star_K(5) <= I.c_star_K(10)
    assert I.c_star_K(10) == pytest.approx(I.c_star_K_gauss_legendre(10), rel=1e-8)
    with pytest.raises(ValueError):
        I.c_star_K(-1)


def test_c_star_certified():
    c = I.c_star()
    assert c.value - I.c_star_K(60) < 1e-9
    assert abs(c.value - I.c_star(120).value) < 1e-9
    for K in (1, 10, 40, 60):
        assert c.value >= I.c_star_K(K) - 1e-15
    assert c.error < 1e-9


def test_lambda():
    K = 10.0
    cK = I.c_star_K(K)
    assert I.lambda_K_U(K, IntervalSet.parse("0:2")) == pytest.approx(cK * 16 / 4)
    assert I.lambda_K_U(K, IntervalSet(())) == 0
    total = I.lambda_K_U(K, IntervalSet.parse("0:1")) + I.lambda_K_U(K, IntervalSet.parse("1:2"))
    assert total == pytest.approx(I.lambda_K_U(K, IntervalSet.parse("0:2")), abs=1e-12)
    with pytest.raises(ValueError):
        IntervalSet.parse("0:inf")


def test_survival():
    assert I.min_gap_survival(0.0) == 1.0
    s = np.linspace(0, 30, 200)
    assert np.all(np.diff(I.min_gap_survival(s)) < 0)
    c = I.c_star().value
    med = optimize.brentq(lambda t: I.min_gap_survival(t) - 0.5, 0, 100)
    assert med == pytest.approx(I.survival_median(c), rel=1e-10)
    with pytest.raises(ValueError):
        I.min_gap_survival(-1.0)


@given(st.floats(-40, 40))
def test_vectorised_matches_scalar(x):
    arr = I.intensity_F(np.array([x, 0.0]))
    assert arr[0] == I.intensity_F(x)


def test_table_and_csv(tmp_path):
    tab = I.build_table(-1, 1, 0.5)
    assert tab.grid.size == 5
    path = tmp_path / "t.csv"
    tab.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "x,a0,a1,a2,a3,a4,delta1,delta2,eta,F"
    assert tab.c_star_K[10.0] <= tab.c_star.value
