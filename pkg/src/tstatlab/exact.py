"""Exact results for finite-support discrete laws.

E|T_n|^r is enumerated over multisets of atoms with multinomial weights.
The two equivalent finiteness conditions are evaluated in closed form:

  (ii)  E[ |X_1|^r · min_{i>=2} |X_i - X_1|^{-r} ; some X_i != X_1 ]
  (iii) Σ_{a_j != 0} p_j ∫_0^upper h^{-(r+1)} (G_j(h)^{n-1} - p_j^{n-1}) dh,
        G_j(h) = P(|X - a_j| < h |a_j|)

and R_{n,δ} = n^r × (iii) with upper = δ.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from itertools import combinations_with_replacement, islice

import numpy as np
from scipy.special import gammaln

from .common import INFINITE, BudgetExceeded
from .dist import Discrete, Distribution
from .selfnorm import tstats

ENUMERATION_BUDGET = 10**7
CHUNK = 1 << 15


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("TSTATLAB_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ExactMomentResult:
    n: int
    r: float
    value: float
    tuple_count: int


class Condition(str, Enum):
    COND_II = "condII"
    COND_III = "condIII"
    R_DELTA = "Rdelta"


@dataclass(frozen=True)
class ConditionValue:
    which: Condition
    n: int
    r: float
    delta: float
    value: object  # float, or INFINITE

    @property
    def is_finite(self) -> bool:
        return self.value is not INFINITE


def _require_discrete(dist: Distribution) -> Discrete:
    if not isinstance(dist, Discrete):
        raise TypeError("exact computation needs a finite-support Discrete law")
    return dist


def multiset_count(atoms: int, n: int) -> int:
    return math.comb(atoms + n - 1, n)


def _chunks(m: int, n: int):
    it = combinations_with_replacement(range(m), n)
    while True:
        block = list(islice(it, CHUNK))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _chunk_moment(idx: np.ndarray, points: np.ndarray, logp: np.ndarray, r: float) -> float:
    n = idx.shape[1]
    m = len(points)
    counts = np.stack([(idx == k).sum(axis=1) for k in range(m)], axis=1)
    logw = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + counts @ logp
    t = np.abs(tstats(points[idx]).t)
    contrib = np.exp(logw) * np.where(t > 0, t ** r, 0.0)
    return math.fsum(contrib)


def _check_budget(m: int, n: int, budget: int) -> int:
    if n < 2:
        raise ValueError("n must be >= 2")
    count = multiset_count(m, n)
    if count > budget:
        raise BudgetExceeded(
            f"{count} multisets for {m} atoms and n={n} exceeds budget {budget}; "
            "use Monte Carlo instead")
    return count


def exact_tmoment(dist: Distribution, n: int, r: float, *, threads: int | None = None,
                  budget: int = ENUMERATION_BUDGET) -> ExactMomentResult:
    """E|T_n|^r by enumerating multisets of atoms.

    Chunks are summed in enumeration order regardless of ``threads``, so the
    result does not depend on the degree of parallelism.
    """
    dist = _require_discrete(dist)
    if r <= 0:
        raise ValueError("r must be > 0")
    points, probs = dist.points, dist.probs
    count = _check_budget(len(points), n, budget)
    logp = np.log(probs)
    threads = threads or default_threads()
    partial: list[float] = []
    if threads == 1:
        partial = [_chunk_moment(c, points, logp, r) for c in _chunks(len(points), n)]
    else:
        with ThreadPoolExecutor(threads) as pool:
            gen = _chunks(len(points), n)
            while True:
                wave = list(islice(gen, 2 * threads))
                if not wave:
                    break
                partial += pool.map(lambda c: _chunk_moment(c, points, logp, r), wave)
    return ExactMomentResult(n, float(r), math.fsum(partial), count)


def exact_ustar_law(dist: Distribution, n: int, *,
                    budget: int = ENUMERATION_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """Support points and probabilities of U* (ascending, merged)."""
    dist = _require_discrete(dist)
    points, probs = dist.points, dist.probs
    _check_budget(len(points), n, budget)
    logp = np.log(probs)
    vals, wts = [], []
    for idx in _chunks(len(points), n):
        counts = np.stack([(idx == k).sum(axis=1) for k in range(len(points))], axis=1)
        logw = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + counts @ logp
        vals.append(tstats(points[idx]).ustar)
        wts.append(np.exp(logw))
    u, w = np.concatenate(vals), np.concatenate(wts)
    uniq, inv = np.unique(u, return_inverse=True)
    return uniq, np.bincount(inv, weights=w)


class ExactSurvival:
    """z ↦ P(U* > z) for a finite discrete law, with its jump points."""

    def __init__(self, dist: Distribution, n: int):
        self.n = n
        self.values, self.probs = exact_ustar_law(dist, n)
        self._tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])

    @property
    def breakpoints(self) -> np.ndarray:
        return self.values

    def __call__(self, z):
        idx = np.searchsorted(self.values, z, side="right")
        return self._tail[idx]


def exact_condition_ii(dist: Distribution, n: int, r: float) -> ConditionValue:
    """Condition (ii) from the distribution of max_{i>=2} |X_i - X_1|.

    Given X_1 = a_j the minimum of |X_i - a_j|^{-r} over i >= 2 is attained
    by the farthest coordinate, and P(max_i |X_i - a_j| <= d) = G(d)^{n-1}.
    """
    dist = _require_discrete(dist)
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    points, probs = dist.points, dist.probs
    terms = []
    for a, p in zip(points, probs):
        if a == 0.0:
            continue
        d = np.abs(points - a)
        uniq, inv = np.unique(d, return_inverse=True)
        G = np.cumsum(np.bincount(inv, weights=probs))  # P(|X - a| <= uniq[k])
        pw = G ** (n - 1)
        jumps = np.diff(pw)  # mass of max distance == uniq[1:]
        terms.append(p * abs(a) ** r * math.fsum(jumps * uniq[1:] ** (-r)))
    return ConditionValue(Condition.COND_II, n, float(r), math.inf, math.fsum(terms))


def _condition_iii_sum(dist: Discrete, n: int, r: float, upper: float) -> float:
    points, probs = dist.points, dist.probs
    terms = []
    for a, p in zip(points, probs):
        if a == 0.0:
            continue
        b = np.abs(points - a) / abs(a)
        other = b > 0
        uniq, inv = np.unique(b[other], return_inverse=True)
        # G(h) is p on (0, uniq[0]] and picks up the atoms at uniq[k] for h > uniq[k]
        G = p + np.cumsum(np.bincount(inv, weights=probs[other]))
        lo = uniq
        hi = np.append(uniq[1:], math.inf)
        lo_c, hi_c = np.minimum(lo, upper), np.minimum(hi, upper)
        keep = hi_c > lo_c
        with np.errstate(divide="ignore"):
            width = (lo_c[keep] ** (-r) - np.where(np.isinf(hi_c[keep]), 0.0,
                                                    hi_c[keep] ** (-r))) / r
        terms.append(p * math.fsum((G[keep] ** (n - 1) - p ** (n - 1)) * width))
    return math.fsum(terms)


def exact_condition_iii(dist: Distribution, n: int, r: float,
                        upper: float = 1.0) -> ConditionValue:
    """Condition (iii), integrated in closed form over each constant piece of G_j."""
    dist = _require_discrete(dist)
    if n < 2 or r <= 0 or not upper > 0:
        raise ValueError("need n >= 2, r > 0 and upper > 0")
    value = _condition_iii_sum(dist, n, float(r), float(upper))
    return ConditionValue(Condition.COND_III, n, float(r), float(upper), value)


def exact_R_n_delta(dist: Distribution, n: int, r: float, delta: float) -> ConditionValue:
    dist = _require_discrete(dist)
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if n < 2 or r <= 0:
        raise ValueError("need n >= 2 and r > 0")
    value = n ** r * _condition_iii_sum(dist, n, float(r), float(delta))
    return ConditionValue(Condition.R_DELTA, n, float(r), float(delta), value)


def to_value(cv: ConditionValue):
    """JSON-friendly value: a float or the string "Infinite"."""
    return str(INFINITE) if cv.value is INFINITE else cv.value
