import numpy as np
import pytest
from hypothesis import given, strategies as st

from kacgap.rootfinder import (
    SolverOptions, cluster_means, companion_roots, find_roots, greedy_match, repeated_factor_degree, validate_roots,
)
from kacgap.sampling import PolynomialSample, make_law, sample_trial


def P(c):
    return PolynomialSample.from_coeffs(c)


def test_roots_of_unity():
    rs = find_roots(P([-1, 0, 0, 0, 1]))
    d, _ = greedy_match(rs.roots, np.array([1, -1, 1j, -1j]))
    assert d <= 1e-12 and rs.converged and len(rs) == 4


def test_constructed_quadratic():
    for solver in (find_roots, companion_roots):
        r = np.sort_complex(solver(P([1.1, -2.1, 1.0])).roots)
        assert np.allclose(r, [1.0, 1.1], atol=1e-12, rtol=0)


def test_triple_zero():
    assert np.all(companion_roots(P([0, 0, 0, 1])).roots == 0)
    assert np.all(find_roots(P([0, 0, 0, 1])).roots == 0)


@pytest.mark.parametrize("law,n", [("gaussian", 30), ("rademacher", 20)])
def test_companion_agreement(law, n):
    p = sample_trial(make_law(law), n, 3, 0)
    d, _ = greedy_match(find_roots(p).roots, companion_roots(p).roots)
    assert d <= 1e-8


def test_companion_range():
    with pytest.raises(ValueError):
        companion_roots(P(np.ones(70)))


def test_leading_zero_error():
    with pytest.raises(ValueError):
        find_roots(P([1.0, 2.0, 0.0]))


def test_validate_exact():
    roots = np.array([1, -1, 1j, -1j])
    p = P([-1, 0, 0, 0, 1])
    from kacgap.rootfinder import RootSet, residuals

    rs = RootSet(roots, residuals(p, roots), 0, True, 4, 4)
    v = validate_roots(p, rs)
    assert v.max_residual <= 1e-12 and v.vieta_sum_error <= 1e-12 and v.conjugate_defect <= 1e-12


def test_validate_perturbed():
    from kacgap.rootfinder import RootSet, residuals

    p = P([-1, 0, 0, 0, 1])
    roots = np.array([1 + 1e-3, -1, 1j, -1j])
    res = residuals(p, roots)
    rs = RootSet(roots, res, 0, True, 4, 4)
    v = validate_roots(p, rs)
    # |f'(1)| = 4; residual scale max|xi| max(1,|z|)^n ~ 1
    assert v.max_residual == pytest.approx(4e-3, rel=0.01)
    assert 0 in v.flagged


def test_vieta_n500():
    p = sample_trial(make_law("gaussian"), 500, 2, 0)
    v = validate_roots(p, find_roots(p))
    assert v.vieta_sum_error <= 1e-6


@given(st.integers(0, 10**6), st.integers(5, 64))
def test_invariants(seed, n):
    p = sample_trial(make_law("gaussian"), n, seed, 0)
    rs = find_roots(p)
    assert rs.roots.size == n
    perm = np.random.default_rng(seed).permutation(n)
    v1 = validate_roots(p, rs)
    from kacgap.rootfinder import RootSet

    rs2 = RootSet(rs.roots[perm], rs.residuals[perm], rs.iterations, rs.converged, rs.n, rs.algebraic_degree)
    v2 = validate_roots(p, rs2)
    assert v1.max_residual == v2.max_residual and v1.conjugate_defect == v2.conjugate_defect
    assert v1.conjugate_defect <= 10 * SolverOptions().residual_tol


def test_uniform3_zero_roots():
    p = P([0, 0, 1, -1, 1])
    rs = find_roots(p)
    assert rs.zero_roots == 2 and np.count_nonzero(rs.roots == 0) == 2


def test_repeated_factor_and_cluster_means():
    # (1 + z)^2 (1 - z) = 1 + z - z^2 - z^3
    c = [1, 1, -1, -1]
    assert repeated_factor_degree(c) == 1
    assert repeated_factor_degree([1, 0, 1]) == 0
    rs = find_roots(P(c))
    m = cluster_means(rs.roots, 1e-6)
    assert np.sum(np.abs(m + 1) <= 1e-14) == 2
    # the individual approximations are far worse
    assert np.max(np.abs(rs.roots[np.abs(rs.roots + 1) < 1e-4] + 1)) > 1e-11


def test_deterministic():
    p = sample_trial(make_law("gaussian"), 200, 4, 0)
    assert np.array_equal(find_roots(p).roots, find_roots(p).roots)


def test_close_pair_polish():
    # a pair at distance 3e-4 near the unit circle
    a = np.exp(1j)
    b = a * (1 + 3e-4j)
    base = sample_trial(make_law("gaussian"), 96, 1, 0).coeffs
    fac = np.real(np.poly([a, a.conjugate(), b, b.conjugate()]))[::-1]
    p = P(np.convolve(base, fac))
    rs = find_roots(p)
    da = np.min(np.abs(rs.roots - a))
    db = np.min(np.abs(rs.roots - b))
    assert da < 1e-10 and db < 1e-10


def test_triple_root_cluster_is_recentred():
    # (z - 1)^3 (z + 1)^2 (z^2 + 1): the triple root is only resolved to
    # eps^(1/3) individually, but the cluster mean should be near exact
    c = [-1, 1, 1, -1, 1, -1, -1, 1]
    assert repeated_factor_degree(c) == 3
    rs = find_roots(P(c))
    m = cluster_means(rs.roots, 1e-4)
    near = np.abs(rs.roots - 1) < 1e-3
    assert near.sum() == 3
    assert np.all(np.abs(m[near] - 1) < 1e-13)
    assert np.all(np.abs(m[np.abs(rs.roots + 1) < 1e-3] + 1) < 1e-13)
    assert any("recentred" in s for s in rs.notes)
    d, _ = greedy_match(m, cluster_means(companion_roots(P(c)).roots, 1e-4))
    assert d < 1e-12


def test_simple_roots_not_recentred():
    rs = find_roots(sample_trial(make_law("gaussian"), 300, 2, 0))
    assert not any("recentred" in s for s in rs.notes)


def test_close_simple_pair_not_recentred():
    # 1e-7 apart: inside the cluster radius, but f does not vanish at the
    # critical point between them, so the pair must keep its own midpoint
    a = np.exp(1j)
    b = a * (1 + 1e-7j)
    base = sample_trial(make_law("gaussian"), 96, 1, 0).coeffs
    fac = np.real(np.poly([a, a.conjugate(), b, b.conjugate()]))[::-1]
    rs = find_roots(P(np.convolve(base, fac)))
    assert not any("recentred" in s for s in rs.notes)
    i = np.argsort(np.abs(rs.roots - (a + b) / 2))[:2]
    assert abs(rs.roots[i].mean() - (a + b) / 2) < 1e-13
