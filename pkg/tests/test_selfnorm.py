from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from tstatlab.dist import (Cauchy, Discrete, Mixture, Normal, Pareto, PowerSingularity,
                           Uniform)
from tstatlab.selfnorm import (compute_stats, tstats, ustar_inverse_threshold,
                               ustar_threshold)

FAMILIES = [
    Normal(0, 1), Normal(3, 1), Cauchy(0, 1), Uniform(0, 1), Pareto(1.5, 1.0),
    PowerSingularity(1, 0.5, 1), Discrete([(0, 0.5), (1, 0.5)]),
    Discrete([(-1, 0.5), (1, 0.5)]), Discrete([(0.1, 0.3), (0.2, 0.3), (0.7, 0.4)]),
    Mixture((0.5, 0.5), (Discrete([(1, 1.0)]), Uniform(0, 1))),
]
X_GRID = (0.0, 0.1, 1.0, 10.0, 100.0)


def test_examples():
    s = compute_stats([1, 1, 1])
    assert s.t == 0 and s.ustar == 0 and s.degenerate_all_equal
    s = compute_stats([0, 0])
    assert s.t == 0 and s.ustar == 0 and s.degenerate_all_zero
    s = compute_stats([0, 1])
    assert (s.sum, s.vnorm, s.t, s.ustar) == (1.0, 1.0, 1.0, 1.0)
    assert abs(s.sigma_hat ** 2 - 0.5) < 1e-15


def test_n_less_than_two():
    with pytest.raises(ValueError):
        compute_stats([1.0])
    with pytest.raises(ValueError):
        compute_stats([1.0, math.inf])


def test_thresholds():
    assert ustar_threshold(2, 0) == 0
    assert ustar_threshold(2, 1) == 1
    assert ustar_threshold(5, math.inf) == 5
    assert ustar_threshold(5, 1e12) < 5
    assert ustar_inverse_threshold(3, 0) == 0
    assert ustar_inverse_threshold(3, 1) == 1
    assert abs(ustar_inverse_threshold(7, ustar_threshold(7, 3.5)) - 3.5) < 1e-12
    with pytest.raises(ValueError):
        ustar_inverse_threshold(3, 3)


@given(st.integers(2, 50), st.floats(0, 1e6))
def test_threshold_increasing_and_bounded(n, x):
    a = ustar_threshold(n, x)
    assert 0 <= a < n
    assert ustar_threshold(n, x + 1) > a


@given(st.integers(2, 50), st.floats(0, 1))
def test_threshold_round_trip(n, frac):
    z = frac * (n - 1e-6)
    assert abs(ustar_threshold(n, ustar_inverse_threshold(n, z)) - z) <= 1e-12 * max(1, n)


@pytest.mark.parametrize("dist", FAMILIES, ids=lambda d: d.kind)
@pytest.mark.parametrize("n", [2, 3, 5, 10])
def test_identity_no_violations(dist, n):
    x = dist.draw(np.random.default_rng(n), (20000, n))
    b = tstats(x)
    for thr in X_GRID:
        assert np.array_equal(b.t_sq > thr, b.ustar > ustar_threshold(n, thr))


def _arrays(n_min=2, n_max=8):
    return st.lists(st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False),
                    min_size=n_min, max_size=n_max)


@settings(max_examples=200)
@given(_arrays())
def test_summary_invariants(x):
    s = compute_stats(x)
    n = len(x)
    assert 0 <= s.ustar <= n
    assert (s.sigma_hat == 0) == s.degenerate_all_equal
    if s.sigma_hat == 0:
        assert s.t == 0
    v2 = float(np.dot(x, x))
    lhs = (n - 1) * s.sigma_hat ** 2
    rhs = v2 - s.sum ** 2 / n
    assert abs(lhs - rhs) <= 1e-9 * max(v2, 1e-300) + 1e-300


@settings(max_examples=200)
@given(_arrays(), st.sampled_from([0.5, 3.0, 1024.0, 1e-3]))
def test_scale_invariance(x, c):
    a, b = compute_stats(x), compute_stats([c * v for v in x])
    assert np.sign(a.t) == np.sign(b.t)
    assert abs(a.t - b.t) <= 1e-9 * abs(a.t) + 1e-12
    assert abs(a.ustar - b.ustar) <= 1e-9 * max(a.ustar, 1)


@settings(max_examples=200)
@given(_arrays(), st.randoms(use_true_random=False))
def test_permutation_invariance(x, rnd):
    y = list(x)
    rnd.shuffle(y)
    a, b = compute_stats(x), compute_stats(y)
    assert abs(a.t - b.t) <= 1e-12 * max(abs(a.t), 1)
    assert abs(a.ustar - b.ustar) <= 1e-12 * max(a.ustar, 1)


@settings(max_examples=200)
@given(_arrays(n_min=1, n_max=7))
def test_zero_entry_caps_ustar(x):
    s = compute_stats(list(x) + [0.0])
    assert s.ustar <= len(x) + 1e-12


@settings(max_examples=100)
@given(st.floats(-1e6, 1e6, allow_subnormal=False), st.integers(2, 12))
def test_all_equal_gives_zero(v, n):
    assume(v != 0)
    s = compute_stats([v] * n)
    assert s.ustar == 0 and s.t == 0 and s.degenerate_all_equal and not s.degenerate_all_zero


def test_batch_indexing_round_trip():
    x = np.random.default_rng(0).normal(size=(5, 4))
    b = tstats(x)
    assert len(b) == 5
    for i, s in enumerate(b):
        assert s == compute_stats(x[i])
    sv = b.self_normalized
    assert np.allclose(sv ** 2, b.ustar)


def _exact(row):
    x = [Fraction(v) for v in row]
    n, s, q = len(x), sum(x), sum(v * v for v in x)
    d = n * q - s * s
    return (n - 1) * s * s / d, s * s / q


def test_close_to_correctly_rounded():
    rng = np.random.default_rng(3)
    for n in (2, 3, 7, 30):
        x = rng.standard_cauchy((200, n))
        b = tstats(x)
        for i in range(len(x)):
            t2, u = _exact(x[i])
            assert abs(b.t_sq[i] - float(t2)) <= np.spacing(float(t2))
            assert abs(b.ustar[i] - float(u)) <= np.spacing(float(u))


@pytest.mark.parametrize("atoms", [(0.0, 1.0), (1.0, 2.0), (-1.0, 1.0), (1.0, 2.0, 5.0),
                                   (-1.5, 0.0, 0.7, 2.0), (-3.0, -1.0, 0.5, 2.0, 7.0)])
def test_identity_exhaustive_on_lattices(atoms):
    xs = (0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 9.0, 10.0, 16.0, 25.0, 100.0)
    for n in range(2, 9):
        tup = np.array(list(itertools.combinations_with_replacement(atoms, n)))
        b = tstats(tup)
        for x in xs:
            assert np.array_equal(b.t_sq > x, b.ustar > ustar_threshold(n, x)), (n, x)
