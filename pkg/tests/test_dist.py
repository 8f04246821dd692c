from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from tstatlab.common import SpecError
from tstatlab.dist import (DEFAULT_H_GRID, Cauchy, Discrete, Mixture, Normal, Pareto,
                           PowerSingularity, Uniform, check_prop4, concentration_profile,
                           concentration_q, concentration_Q, fit_lambda, from_dict, sample)

CONTINUOUS = [Normal(0, 1), Normal(2, 0.5), Cauchy(0, 1), Uniform(0, 1), Uniform(-1, 1),
              Pareto(2.5, 1.0), PowerSingularity(1, 0.5, 1), PowerSingularity(0, 0.3, 2),
              Mixture((0.4, 0.6), (Normal(0, 1), Pareto(3, 2)))]
DISCRETE = [Discrete([(0, 0.5), (1, 0.5)]), Discrete([(1, 0.5), (2, 0.5)]),
            Discrete([(-1.5, 0.2), (0, 0.1), (0.7, 0.3), (2, 0.4)]),
            Discrete([(1, 1.0)]), Discrete([(0, 0.7), (3, 0.3)])]


# --- construction --------------------------------------------------------

def test_discrete_rejects_bad_probabilities():
    with pytest.raises(SpecError, match="probabilities sum to 1.1"):
        Discrete([(0, 0.6), (1, 0.5)])


@pytest.mark.parametrize("atoms", [[], [(0, 0.0), (1, 1.0)], [(1, 0.5), (0, 0.5)],
                                   [(0, 0.5), (1e-13, 0.5)]])
def test_discrete_invariants(atoms):
    with pytest.raises(SpecError):
        Discrete(atoms)


def test_mixture_single_nesting():
    inner = Mixture((0.5, 0.5), (Normal(0, 1), Uniform(0, 1)))
    with pytest.raises(SpecError):
        Mixture((0.5, 0.5), (inner, Normal(0, 1)))
    with pytest.raises(SpecError):
        from_dict({"kind": "mixture", "weights": [1.0], "components": [
            {"kind": "mixture", "weights": [1.0], "components": [{"kind": "normal", "mean": 0,
                                                                   "stddev": 1}]}]})


@pytest.mark.parametrize("bad", [{"kind": "normal", "mean": 0, "stddev": 0},
                                 {"kind": "uniform", "a": 1, "b": 1},
                                 {"kind": "power_singularity", "center": 0, "exponent": 1.5,
                                  "halfwidth": 1},
                                 {"kind": "gamma", "shape": 1},
                                 {"kind": "normal", "mean": 0},
                                 {"kind": "normal", "mean": 0, "stddev": 1, "extra": 2}])
def test_from_dict_rejects(bad):
    with pytest.raises(SpecError):
        from_dict(bad)


@pytest.mark.parametrize("d", CONTINUOUS + DISCRETE)
def test_dict_round_trip(d):
    assert from_dict(d.to_dict()) == d


# --- sampling ------------------------------------------------------------

def test_sample_single_atom():
    assert sample(Discrete([(1, 1.0)]), 5, 123).tolist() == [1, 1, 1, 1, 1]


def test_sample_uniform_mean():
    assert abs(sample(Uniform(0, 1), 10**6, 7).mean() - 0.5) < 0.003


def test_sample_power_singularity_cdf():
    x = sample(PowerSingularity(1, 0.5, 1), 10**6, 7)
    assert abs(np.mean(x <= 1.25) - 0.75) < 0.01


@pytest.mark.parametrize("d", CONTINUOUS + DISCRETE)
def test_sample_deterministic(d):
    a, b = sample(d, 1000, 42), sample(d, 1000, 42)
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("d,ref", [(Normal(2, 0.5), stats.norm(2, 0.5)),
                                   (Cauchy(0, 1), stats.cauchy(0, 1)),
                                   (Uniform(-1, 1), stats.uniform(-1, 2)),
                                   (Pareto(2.5, 1.0), stats.pareto(2.5, scale=1.0))])
def test_samples_match_reference_law(d, ref):
    x = sample(d, 20000, 11)
    assert stats.kstest(x, ref.cdf).pvalue > 1e-3


@pytest.mark.parametrize("d,ref", [(Normal(2, 0.5), stats.norm(2, 0.5)),
                                   (Cauchy(0, 1), stats.cauchy(0, 1)),
                                   (Pareto(2.5, 1.0), stats.pareto(2.5, scale=1.0))])
def test_cdf_matches_reference(d, ref):
    x = np.linspace(-5, 8, 101)
    assert np.allclose(d.cdf(x), ref.cdf(x), atol=1e-14)
    assert np.allclose(d.sf(x), ref.sf(x), rtol=1e-10, atol=1e-300)


def test_power_singularity_cdf_closed_form():
    d = PowerSingularity(1, 0.5, 1)
    x = np.array([0.0, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
    expect = 0.5 + 0.5 * np.sign(x - 1) * np.abs(x - 1) ** 0.5
    assert np.allclose(d.cdf(x), expect, atol=1e-15)


@pytest.mark.parametrize("d", CONTINUOUS + DISCRETE)
def test_draw_window_stays_inside(d):
    rng = np.random.default_rng(0)
    x1 = d.draw(rng, 200)
    lo, hi = x1 - 0.1 * np.abs(x1), x1 + 0.1 * np.abs(x1)
    w = d.draw_window(rng, lo, hi, 3)
    mass = np.asarray(d.prob(lo, hi, closed=False))
    live = mass > 0
    assert np.all((w[live] >= lo[live, None]) & (w[live] <= hi[live, None]))


def test_draw_window_conditional_law():
    d = Normal(0, 1)
    rng = np.random.default_rng(5)
    w = d.draw_window(rng, np.full(50000, 0.5), np.full(50000, 1.5), 1)[:, 0]
    ref = stats.truncnorm(0.5, 1.5)
    assert stats.kstest(w, ref.cdf).pvalue > 1e-3


# --- concentration -------------------------------------------------------

def test_Q_examples():
    d = Discrete([(0, 0.5), (1, 0.5)])
    assert concentration_Q(d, 0.4) == 0.5
    assert concentration_Q(d, 0.5) == 1.0
    oracle = math.erf(0.1 / math.sqrt(2))  # 2Φ(0.1) - 1
    assert abs(concentration_Q(Normal(0, 1), 0.1) - oracle) < 1e-12
    assert abs(oracle - 0.0797) < 1e-4


def test_q_examples():
    assert concentration_q(Discrete([(1, 1.0)]), 0.5) == 1.0
    assert concentration_q(Normal(0, 1), 0.0) == 0.0


def test_q_slope_power_singularity():
    hs = [2.0 ** -k for k in range(4, 11)]
    fit = fit_lambda(hs, [concentration_q(PowerSingularity(1, 0.5, 1), h) for h in hs])
    assert abs(fit.slope - 0.5) < 0.05


def test_q_normal_against_direct_maximisation():
    # oracle: scipy bounded scalar maximisation of P(|X - x| <= |x| h) over x > 0
    from scipy.optimize import minimize_scalar
    for h in (0.125, 2.0 ** -6, 2.0 ** -10):
        def neg(lx, h=h):
            x = math.exp(lx)
            return -(stats.norm.cdf(x * (1 + h)) - stats.norm.cdf(x * (1 - h)))
        res = minimize_scalar(neg, bounds=(-5, 3), method="bounded",
                              options={"xatol": 1e-12})
        assert abs(concentration_q(Normal(0, 1), h) - (-res.fun)) < 1e-9


def test_fit_lambda_exact_power_laws():
    h = np.array([2.0 ** -k for k in range(3, 11)])
    assert abs(fit_lambda(h, h).slope - 1.0) < 1e-12
    assert abs(fit_lambda(h, np.sqrt(h)).slope - 0.5) < 1e-12


def test_fit_lambda_rejects():
    h = [0.5, 0.25, 0.125, 0.0625]
    with pytest.raises(ValueError, match="nonpositive"):
        fit_lambda(h, [0.1, 0.0, 0.1, 0.1])
    with pytest.raises(ValueError):
        fit_lambda(h[:3], [0.1, 0.1, 0.1])
    with pytest.raises(ValueError):
        fit_lambda([1.5, 0.25, 0.125, 0.0625], [0.1, 0.1, 0.1, 0.1])


def test_normal_q_profile_slope():
    prof = concentration_profile(Normal(0, 1))
    assert abs(prof.fitted_lambda_q - 1.0) < 0.1
    assert not prof.exact


@pytest.mark.parametrize("d", [c for c in CONTINUOUS if check_prop4(c)])
def test_prop4_families_have_linear_q(d):
    prof = concentration_profile(d, DEFAULT_H_GRID)
    assert prof.fitted_lambda_q >= 0.9


def test_check_prop4():
    assert check_prop4(Normal(0, 1))
    assert check_prop4(Cauchy(0, 1))
    assert check_prop4(PowerSingularity(1, 1.0, 1))
    assert not check_prop4(PowerSingularity(1, 0.5, 1))  # unbounded density at the center
    assert check_prop4(Mixture((0.5, 0.5), (Normal(0, 1), Pareto(2, 1))))
    with pytest.raises(SpecError):
        check_prop4(Discrete([(0, 0.5), (1, 0.5)]))
    with pytest.raises(SpecError):
        check_prop4(Mixture((0.5, 0.5), (Normal(0, 1), Discrete([(1, 1.0)]))))


def _brute_Q(d: Discrete, h: float) -> float:
    xs = np.concatenate([np.linspace(d.points[0] - 1, d.points[-1] + 1, 20001),
                         d.points - h, d.points + h])
    return float(np.max(d.prob(xs - h, xs + h)))


def _brute_q(d: Discrete, h: float) -> float:
    xs = np.linspace(d.points[0] - 1, d.points[-1] + 1, 20001)
    nz = d.points[d.points != 0]
    xs = np.concatenate([xs, nz, nz / (1 + h), nz / (1 - h)])
    xs = xs[xs != 0]
    return float(np.max(d.prob(xs - np.abs(xs) * h, xs + np.abs(xs) * h)))


@pytest.mark.parametrize("d", DISCRETE)
@pytest.mark.parametrize("h", [0.0, 0.05, 0.3, 0.5, 0.75])
def test_discrete_concentration_brute_force(d, h):
    assert abs(concentration_Q(d, h) - _brute_Q(d, h)) < 1e-12
    assert abs(concentration_q(d, h) - _brute_q(d, h)) < 1e-12


@pytest.mark.parametrize("d", CONTINUOUS + DISCRETE)
def test_concentration_monotone_and_bounded(d):
    hs = [0.0, 0.01, 0.05, 0.1, 0.3, 0.6, 0.9]
    q = [concentration_q(d, h) for h in hs]
    Q = [concentration_Q(d, h) for h in hs]
    assert all(0 <= v <= 1 for v in q + Q)
    assert all(b >= a - 1e-12 for a, b in zip(q, q[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(Q, Q[1:]))


@pytest.mark.parametrize("d", DISCRETE)
def test_discrete_dominance(d):
    top = max(p for _, p in d.atoms())
    top_nonzero = max((p for a, p in d.atoms() if a != 0), default=0.0)
    for h in (0.0, 0.1, 0.5):
        assert concentration_Q(d, h) >= top
        assert concentration_q(d, h) >= top_nonzero


_atom_lists = st.lists(st.tuples(st.integers(-20, 20), st.integers(1, 9)), min_size=1,
                       max_size=5, unique_by=lambda t: t[0])


@settings(max_examples=60, deadline=None)
@given(_atom_lists, st.floats(0.0, 0.95))
def test_discrete_q_matches_brute_force_property(raw, h):
    total = sum(w for _, w in raw)
    d = Discrete(sorted((x / 4, w / total) for x, w in raw))
    assert abs(concentration_q(d, h) - _brute_q(d, h)) < 1e-12
