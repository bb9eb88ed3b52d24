"""Simulated close root pairs against the two intensity profiles.

Pairs are collected straight from the roots (midpoint in Omega_K, upper half
plane) so both the count and the radial position x = n log|midpoint| can be
compared with theory.
"""
import math

import numpy as np
import pytest
from scipy import integrate, stats as sps
from scipy.spatial import cKDTree

from kacgap import intensity as I
from kacgap.intervals import IntervalSet
from kacgap.rootfinder import find_roots
from kacgap.sampling import make_law, sample_trial

N_DEG, K, TRIALS, S_MAX = 200, 10.0, 1500, 6.0


@pytest.fixture(scope="module")
def pairs():
    law = make_law("gaussian")
    xs, gs = [], []
    for t in range(TRIALS):
        r = find_roots(sample_trial(law, N_DEG, 77, t)).roots
        tree = cKDTree(np.column_stack([r.real, r.imag]))
        for i, j in tree.query_pairs(S_MAX * N_DEG**-1.25):
            m = (r[i] + r[j]) / 2
            x = N_DEG * math.log(abs(m))
            if m.imag > 0 and abs(x) <= K:
                xs.append(x)
                gs.append(N_DEG**1.25 * abs(r[i] - r[j]))
    return np.array(xs), np.array(gs)


def test_pair_count_matches_joint_profile(pairs):
    _, g = pairs
    count = int(np.count_nonzero(g <= S_MAX))
    U = IntervalSet.of((0.0, S_MAX))
    lam_joint = TRIALS * I.lambda_K_U(K, U, "joint")
    lam_closed = TRIALS * I.lambda_K_U(K, U)
    assert abs(count - lam_joint) <= 4 * math.sqrt(lam_joint)
    # the closed-form constant is far outside Poisson noise
    assert abs(count - lam_closed) > 5 * math.sqrt(lam_closed)


def test_pair_positions_follow_joint_profile(pairs):
    x, g = pairs
    x = x[g <= S_MAX]
    grid = np.linspace(-K, K, 2001)
    dens = I.intensity_F_joint(grid)
    cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
    cdf /= cdf[-1]
    res = sps.kstest(x, lambda v: np.interp(v, grid, cdf))
    assert res.pvalue > 1e-3


def test_gap_law_is_quartic(pairs):
    # P[gap <= s | gap <= S] = (s/S)^4 under the t^3 intensity
    _, g = pairs
    g = g[g <= S_MAX]
    res = sps.kstest(g, lambda s: (np.clip(s, 0, S_MAX) / S_MAX) ** 4)
    assert res.pvalue > 1e-3
