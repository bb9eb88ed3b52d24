import numpy as np
import pytest
from hypothesis import given, strategies as st

from kacgap.sampling import (
    LawKind, PolynomialSample, derive_seed, make_law, make_rng, parse_law, sample_polynomial, sample_trial,
)

LAWS = ["gaussian", "rademacher", "uniform3", "uniform"]


def test_make_law_kinds():
    r = make_law("rademacher")
    assert r.kind is LawKind.RADEMACHER and not r.atom_at_zero
    u3 = make_law("uniform3")
    assert u3.atom_at_zero and u3.variance == pytest.approx(2 / 3)
    g = make_law("gaussian")
    assert g.variance == 1.0 and g.params == {}
    uc = make_law("uniform_continuous")
    assert uc.variance == pytest.approx(1.0)


def test_make_law_errors():
    with pytest.raises(ValueError):
        make_law("cauchy")
    with pytest.raises(ValueError):
        make_law("uniform_continuous", {"half_width": -1.0})
    with pytest.raises(ValueError):
        make_law("gaussian", {"scale": 2.0})


def test_parse_law_roundtrip():
    for text in ["gaussian", "rademacher", "uniform3", "uniform:2.5"]:
        law = parse_law(text)
        assert parse_law(law.tag) == law
    assert parse_law("uniform").params["half_width"] == pytest.approx(np.sqrt(3))


def test_rademacher_support():
    for seed in range(20):
        c = sample_polynomial(make_law("rademacher"), 2, seed).coeffs
        assert set(np.unique(c)) <= {-1.0, 1.0} and c.size == 3


def test_gaussian_moments_large_n():
    c = sample_polynomial(make_law("gaussian"), 10**4, 99).coeffs
    assert abs(c.mean()) <= 4 / np.sqrt(c.size)
    assert abs(c.var() - 1) <= 0.1


def test_uniform3_zero_fraction():
    c = sample_polynomial(make_law("uniform3"), 10**5, 7).coeffs
    p = 1 / 3
    sigma = np.sqrt(p * (1 - p) / c.size)
    assert abs(np.mean(c == 0) - p) <= 3 * sigma


@pytest.mark.parametrize("name", LAWS)
def test_law_moments(name):
    law = parse_law(name)
    x = law.draw(make_rng(derive_seed(5, 1)), 10**6)
    se_mean = np.sqrt(law.variance / x.size)
    assert abs(x.mean()) <= 5 * se_mean
    # second moment: zero-variance estimator for rademacher, hence the floor
    se_m2 = np.sqrt(np.var(x**2) / x.size)
    assert abs(np.mean(x**2) - law.variance) <= 5 * se_m2 + 1e-12


def test_degree_error():
    with pytest.raises(ValueError):
        sample_polynomial(make_law("gaussian"), 1, 0)


@given(st.sampled_from(LAWS), st.integers(2, 300), st.integers(0, 2**64 - 1))
def test_determinism(name, n, seed):
    law = parse_law(name)
    a = sample_polynomial(law, n, seed).coeffs
    b = sample_polynomial(law, n, seed).coeffs
    assert a.shape == (n + 1,) and np.array_equal(a, b)


def test_trial_independence():
    law = make_law("gaussian")
    a = sample_trial(law, 10**4, 3, 0).coeffs
    b = sample_trial(law, 10**4, 3, 1).coeffs
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.05
    assert not np.array_equal(a, b)


def test_uniform3_keeps_zero_leading():
    law = make_law("uniform3")
    zeros = [sample_trial(law, 5, 1, t).coeffs[-1] == 0 for t in range(300)]
    assert any(zeros)


def test_polynomial_sample_validation():
    with pytest.raises(ValueError):
        PolynomialSample(3, None, None, np.zeros(3))
    p = PolynomialSample.from_coeffs([1.0, 2.0, 3.0])
    assert p.n == 2 and np.array_equal(p.reversed().coeffs, [3.0, 2.0, 1.0])
    assert not p.coeffs.flags.writeable
