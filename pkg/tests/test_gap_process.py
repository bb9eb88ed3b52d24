import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kacgap import intensity as I
from kacgap.gap_process import (
    GapRecord, count_X_n, count_pairs, disk_min_gap, double_root_count, inversion_violations, min_gap,
    origin_double_root, pair_gaps, roots_in_annulus,
)
from kacgap.intervals import IntervalSet
from kacgap.rootfinder import find_roots
from kacgap.sampling import PolynomialSample, make_law, sample_trial


def test_roots_in_annulus():
    n = 100
    r = np.array([1j * (1 + 0.5 / n), 0.5, -2, 1.0, -1j])
    assert list(roots_in_annulus(r, 1, n)) == [r[0]]
    r4 = find_roots(PolynomialSample.from_coeffs([-1, 0, 0, 0, 1])).roots
    got = roots_in_annulus(r4, 1, 4)
    assert got.size == 1 and abs(got[0] - 1j) < 1e-12
    with pytest.raises(ValueError):
        roots_in_annulus(r, 0, n)


def test_constructed_gap():
    n = 256
    a = np.exp(1j)
    b = a + 3.0 * n**-1.25 * 1j * a
    g = pair_gaps(np.array([a, b, -1.0]), n, 1)
    assert g.size == 1 and g[0] == pytest.approx(3.0, abs=1e-9)


def test_x_counts():
    n = 256
    a = np.exp(1j)
    roots = np.array([a, a + 1.5 * n**-1.25, 0.3])
    assert count_X_n(roots, 1, IntervalSet.parse("1:2"), n) == 2
    assert count_X_n(roots, 1, IntervalSet.parse("2:3"), n) == 0
    assert count_X_n(roots, 1, IntervalSet.parse("0:0.5"), n) == 0
    with pytest.raises(TypeError):
        count_X_n(roots, 1, "1:2", n)


def test_min_gap_examples():
    assert min_gap(np.array([0, 0]), 2) == 0.0
    assert min_gap(np.array([1.0, -1.0]), 2) == pytest.approx(2**1.25 * 2)
    assert double_root_count(np.array([0.5, 0.5, 1.0])) == 1
    assert origin_double_root(np.array([0, 0, 1]))


def test_disk_min_gap():
    assert disk_min_gap(np.array([0.1, 0.2, 0.9]), 0.5) == pytest.approx(0.1)
    assert disk_min_gap(np.exp(1j * np.arange(5)), 0.5) == math.inf
    with pytest.raises(ValueError):
        disk_min_gap(np.array([0.1]), 1.0)


def test_annulus_fraction():
    rs = find_roots(sample_trial(make_law("gaussian"), 1000, 4, 0))
    fr = [roots_in_annulus(rs, K, 1000).size / 1000 for K in (1, 3, 10)]
    assert fr[0] < fr[1] < fr[2]
    # upper half plane only: about half the roots
    assert fr[2] > 0.45


def test_mean_gap_count_vs_lambda():
    """Mean count of Omega_10 pairs with scaled gap in [0, 1] against lambda.

    Expected count per trial is ~1e-4, so this test gathers pairs in [0, 4]
    and checks the quartic law of the count within Poisson noise of the
    joint-profile constant."""
    n, K, T = 400, 10.0, 400
    law = make_law("gaussian")
    U = IntervalSet.parse("0:4")
    total = 0
    for t in range(T):
        total += count_pairs(pair_gaps(find_roots(sample_trial(law, n, 21, t)), n, K, 5), U)
    lam = I.lambda_K_U(K, U, "joint") * T
    assert abs(total - lam) <= 5 * math.sqrt(lam) + 0.35 * lam


@given(st.lists(st.tuples(st.floats(0.999, 1.001), st.floats(0.01, 3.1)), min_size=2, max_size=30),
       st.floats(0, 5), st.floats(0, 5), st.floats(0, 5))
def test_monotone_in_U(pts, a, b, c):
    n = 1000
    roots = np.array([r * np.exp(1j * t) for r, t in pts])
    lo, hi = sorted((a, b))
    U = IntervalSet.of((lo, hi))
    U2 = IntervalSet.of((max(0, lo - c), hi + c))
    assert count_X_n(roots, 1, U, n) <= count_X_n(roots, 1, U2, n)


@given(st.integers(0, 10**5))
def test_gap_invariants(seed):
    n = 80
    rs = find_roots(sample_trial(make_law("gaussian"), n, seed, 0))
    g = pair_gaps(rs, n, 10)
    assert np.all(np.diff(g) >= 0)
    if g.size:
        assert min_gap(rs, n) <= g.min() + 1e-9
    # conjugation leaves the gaps of the upper half invariant once we take all pairs
    g2 = pair_gaps(np.conj(rs.roots), n, 10)
    np.testing.assert_allclose(np.sort(g), np.sort(g2), rtol=1e-9)
    assert inversion_violations(rs) == 0
    x = count_X_n(rs, 10, IntervalSet.parse("0:100"), n)
    assert x <= roots_in_annulus(rs, 10, n).size


def test_record_roundtrip():
    rec = GapRecord(1, 2**63 + 5, 100, "gaussian", 3.5, [1.0, 2.0], {"U0": 1}, math.inf, 1e-14, {"degraded": False})
    line = rec.to_json()
    assert '"disk_min_gap":null' in line
    back = GapRecord.from_json(line)
    assert back == rec
    assert list(back.scaled_gaps) == [1.0, 2.0]
