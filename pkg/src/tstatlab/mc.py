"""Monte Carlo engine for T_n and U*.

Sampling is split into fixed-size blocks. Block ``i`` draws from its own
stream ``SeedSequence(seed).spawn(...)[i]`` and blocks are merged in index
order, so results depend on the seed alone and not on the thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .dist import Distribution
from .exact import default_threads
from .selfnorm import TStatBatch, tstats

BLOCK = 1 << 16
BATCHES = 32
TRACE_POINTS = 40
TRACE_START = 100
DIVERGENCE_SLOPE = 0.05
Z95 = 1.959963984540054


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("a seed is required for reproducible sampling")
    return np.random.SeedSequence(seed)


def _block_sizes(count: int) -> list[int]:
    full, rest = divmod(count, BLOCK)
    return [BLOCK] * full + ([rest] if rest else [])


def _run_blocks(work, sizes: list[int], seed, threads: int | None):
    """Apply ``work(rng, size)`` to every block and return results in block order."""
    children = _seed_sequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(c), s) for c, s in zip(children, sizes)]
    threads = threads or default_threads()
    if threads == 1 or len(jobs) == 1:
        return [work(rng, s) for rng, s in jobs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda job: work(*job), jobs))


def simulate_tstat(dist: Distribution, n: int, count: int, seed, *,
                   threads: int | None = None) -> TStatBatch:
    """``count`` independent samples of size ``n`` reduced to their statistics."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if count < 1:
        raise ValueError("count must be >= 1")
    parts = _run_blocks(lambda rng, size: tstats(dist.draw(rng, (size, n))),
                        _block_sizes(count), seed, threads)
    return TStatBatch.concat(parts)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentEstimate:
    r: float
    n: int | None
    value: float
    std_error: float
    prefix_trace: tuple[tuple[int, float], ...]
    divergence_flag: bool
    trace_slope: float

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.value - Z95 * self.std_error, self.value + Z95 * self.std_error)


def batch_means_stderr(values: np.ndarray, batches: int = BATCHES) -> float:
    means = np.array([b.mean() for b in np.array_split(values, batches)])
    return float(means.std(ddof=1) / math.sqrt(batches))


def prefix_trace(values: np.ndarray, points: int = TRACE_POINTS,
                 start: int = TRACE_START) -> tuple[tuple[int, float], ...]:
    """Running means at geometrically spaced sample counts."""
    N = len(values)
    counts = np.unique(np.geomspace(min(start, N), N, points).round().astype(np.int64))
    csum = np.cumsum(values)
    return tuple((int(c), float(csum[c - 1] / c)) for c in counts)


def trace_slope(trace: Sequence[tuple[int, float]]) -> float:
    """Slope of log running mean on log count over the last half of the trace."""
    tail = trace[len(trace) // 2:]
    pts = [(c, v) for c, v in tail if v > 0]
    if len(pts) < 2:
        return 0.0
    x = np.log([c for c, _ in pts])
    y = np.log([v for _, v in pts])
    return float(np.polyfit(x, y, 1)[0])


def _abs_t(summaries) -> tuple[np.ndarray, int | None]:
    if isinstance(summaries, TStatBatch):
        return np.abs(summaries.t), summaries.n
    return np.abs(np.asarray(summaries, dtype=float)), None


def estimate_moment(summaries, r: float, *, min_count: int = 10_000) -> MomentEstimate:
    """Mean of |T|^r with a batch-means error and a prefix-trace divergence check.

    ``summaries`` is a TStatBatch or a plain array of t values.
    """
    if r <= 0:
        raise ValueError("r must be > 0")
    t, n = _abs_t(summaries)
    if len(t) < min_count:
        raise ValueError(f"need at least {min_count} values, got {len(t)}")
    vals = np.where(t > 0, t ** r, 0.0)
    trace = prefix_trace(vals)
    slope = trace_slope(trace)
    return MomentEstimate(float(r), n, float(vals.mean()), batch_means_stderr(vals),
                          trace, slope > DIVERGENCE_SLOPE, slope)


# ---------------------------------------------------------------------------
# Tail index
# ---------------------------------------------------------------------------

class TailMethod(str, Enum):
    HILL = "hill"
    LOGLOG = "loglogRegression"


@dataclass(frozen=True)
class TailIndexEstimate:
    index: float
    ci_low: float
    ci_high: float
    k: int
    method: TailMethod


def default_k(N: int) -> int:
    return int(min(max(round(math.sqrt(N)), 50), N // 10))


def estimate_tail_index(t_values, k: int | None = None,
                        method: TailMethod | str = TailMethod.HILL) -> TailIndexEstimate:
    """Tail index of |t| from the top ``k`` order statistics.

    The interval is the asymptotic normal one, index · (1 ± 1.96/√k).
    """
    x = np.abs(np.asarray(t_values, dtype=float))
    N = len(x)
    method = TailMethod(method)
    if k is None:
        k = default_k(N)
    if k < 50 or k > N // 10:
        raise ValueError(f"k must satisfy 50 <= k <= N/10 (N={N}), got {k}")
    pos = x[x > 0]
    if len(pos) <= k:
        raise ValueError(f"not enough tail data: {len(pos)} positive values for k={k}")
    top = -np.sort(-pos)[: k + 1]
    logs = np.log(top)
    if method is TailMethod.HILL:
        gamma = float(np.mean(logs[:k]) - logs[k])
        index = 1.0 / gamma if gamma > 0 else math.inf
    else:
        surv = np.log(np.arange(1, k + 1) / N)
        index = float(-np.polyfit(logs[:k], surv, 1)[0])
    half = Z95 / math.sqrt(k)
    return TailIndexEstimate(index, index * (1 - half), index * (1 + half), int(k), method)


# ---------------------------------------------------------------------------
# Survival of U*
# ---------------------------------------------------------------------------

def h_min(n: int) -> float:
    return float(n) ** -4


def survival_grid(n: int, points: int = 2048) -> np.ndarray:
    """z grid on [0, n - h_min²], clustered towards the endpoint z = n."""
    half = points // 2
    lower = np.linspace(0.0, n / 2.0, half, endpoint=False)
    h = np.geomspace(math.sqrt(n / 2.0), h_min(n), points - half)
    return np.concatenate([lower, n - h * h])


@dataclass(frozen=True)
class SurvivalCurve:
    """Empirical z ↦ P(U* > z) on a grid, linear in between."""

    n: int
    z_grid: np.ndarray
    survival: np.ndarray
    half_width95: np.ndarray
    sample_count: int

    def __call__(self, z):
        return np.interp(z, self.z_grid, self.survival)

    @property
    def breakpoints(self) -> np.ndarray:
        return self.z_grid


def survival_curve(ustar, n: int, z_grid: np.ndarray | None = None) -> SurvivalCurve:
    u = np.sort(np.asarray(ustar.ustar if isinstance(ustar, TStatBatch) else ustar,
                           dtype=float))
    if z_grid is None:
        z_grid = survival_grid(n)
    z_grid = np.asarray(z_grid, dtype=float)
    if np.any(np.diff(z_grid) <= 0) or z_grid[0] < 0 or z_grid[-1] >= n:
        raise ValueError("z grid must be strictly increasing inside [0, n)")
    N = len(u)
    s = (N - np.searchsorted(u, z_grid, side="right")) / N
    hw = Z95 * np.sqrt(s * (1 - s) / N)
    return SurvivalCurve(n, z_grid, s, hw, N)


# ---------------------------------------------------------------------------
# Near-degeneracy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NearDegeneracyPoint:
    h: float
    estimate: float
    ci_low: float
    ci_high: float
    std_error: float
    hits: int


def wilson_interval(hits: int, N: int, z: float = Z95) -> tuple[float, float]:
    if N == 0:
        return (0.0, 1.0)
    p = hits / N
    denom = 1 + z * z / N
    center = (p + z * z / (2 * N)) / denom
    half = z * math.sqrt(p * (1 - p) / N + z * z / (4 * N * N)) / denom
    lo = 0.0 if hits == 0 else max(0.0, center - half)
    hi = 1.0 if hits == N else min(1.0, center + half)
    return (lo, hi)


def window_constant(h: float) -> float:
    """Least K with  n - u_n < h²  ⟹  |x_i - x_1| < K h |x_1|  for every i.

    Solves ε²/(2 + 2ε + ε²) = h² for ε = K h, the minimum of n - u_n over
    |x_2 - x_1| >= ε |x_1|. K(h) exceeds √(2 + 2h + h²) for every h > 0.
    """
    return (h + math.sqrt(2 - h * h)) / (1 - h * h)


def near_degeneracy_probe(dist: Distribution, n: int, h_grid: Sequence[float], count: int,
                          seed, *, stratified: bool = False,
                          threads: int | None = None) -> list[NearDegeneracyPoint]:
    """Estimate P(n - U* < h²) for each h.

    Direct mode counts hits in simulated samples (Wilson interval).

    Stratified mode draws X_1 = x from F, then X_2..X_n from F restricted to
    the open window |X - x| < K h |x| with K = window_constant(h), and
    averages π(x)^{n-1} · 1{n - U* < h²} where π(x) is the window mass.
    Near-degenerate samples with X_1 ≠ 0 never leave that window, and
    X_1 = 0 forces U* <= n - 1, so this average is unbiased.
    """
    h_arr = np.asarray(h_grid, dtype=float)
    if np.any((h_arr <= 0) | (h_arr >= 1)) or np.any(np.diff(h_arr) <= 0):
        raise ValueError("h grid must be sorted and inside (0, 1)")
    if count < 1:
        raise ValueError("count must be >= 1")
    if not stratified:
        gap = simulate_tstat(dist, n, count, seed, threads=threads).ustar_gap
        out = []
        for h in h_arr:
            hits = int(np.count_nonzero(gap < h * h))
            lo, hi = wilson_interval(hits, count)
            p = hits / count
            out.append(NearDegeneracyPoint(float(h), p, lo, hi,
                                           math.sqrt(p * (1 - p) / count), hits))
        return out

    streams = _seed_sequence(seed).spawn(len(h_arr))
    out = []
    for h, stream in zip(h_arr, streams):
        kh = window_constant(h) * h

        def work(rng, size, h=h, kh=kh):
            x1 = dist.draw(rng, size)
            half = kh * np.abs(x1)
            lo, hi = x1 - half, x1 + half
            pi = np.asarray(dist.prob(lo, hi, closed=False), dtype=float)
            rest = dist.draw_window(rng, lo, hi, n - 1)
            gap = tstats(np.column_stack([x1, rest])).ustar_gap
            w = np.where((x1 != 0) & (pi > 0) & (gap < h * h), pi ** (n - 1), 0.0)
            return w

        w = np.concatenate(_run_blocks(work, _block_sizes(count), stream, threads))
        est = float(w.mean())
        se = float(w.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        out.append(NearDegeneracyPoint(float(h), est, max(0.0, est - Z95 * se),
                                       min(1.0, est + Z95 * se), se,
                                       int(np.count_nonzero(w))))
    return out


# ---------------------------------------------------------------------------
# Sub-Gaussian probe
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SubGaussianResult:
    n_list: tuple[int, ...]
    t_grid: tuple[float, ...]
    mgf: np.ndarray          # shape (len(n_list), len(t_grid))
    std_error: np.ndarray
    fitted_C: tuple[float, ...]      # least-squares log M ≈ C t², per n
    envelope_C: tuple[float, ...]    # least C with M <= 2 exp(C t²), per n
    envelope_C_all: float            # the same, over every (n, t)

    def envelope_holds(self, C: float | Sequence[float]) -> np.ndarray:
        """Boolean matrix of M(n, t) <= 2 exp(C t²); C scalar or one per n."""
        C = np.broadcast_to(np.asarray(C, dtype=float), (len(self.n_list),))
        t2 = np.asarray(self.t_grid) ** 2
        return self.mgf <= 2.0 * np.exp(C[:, None] * t2[None, :])

    def stability(self) -> float:
        """Largest relative deviation of the per-n constants from their median."""
        c = np.asarray(self.fitted_C)
        med = float(np.median(c))
        return float(np.max(np.abs(c - med)) / med) if med > 0 else math.inf


def subgaussian_probe(dist: Distribution, n_list: Sequence[int], t_grid: Sequence[float],
                      count: int, seed, *, threads: int | None = None) -> SubGaussianResult:
    """Empirical E exp(t S_n/V_n) on an (n, t) grid."""
    t_arr = np.asarray(t_grid, dtype=float)
    if np.any(np.abs(t_arr) > 3):
        raise ValueError("|t| must not exceed 3")
    n_list = tuple(int(n) for n in n_list)
    streams = _seed_sequence(seed).spawn(len(n_list))
    mgf = np.empty((len(n_list), len(t_arr)))
    se = np.empty_like(mgf)
    for i, (n, stream) in enumerate(zip(n_list, streams)):
        sv = simulate_tstat(dist, n, count, stream, threads=threads).self_normalized
        e = np.exp(np.outer(sv, t_arr))
        mgf[i] = e.mean(axis=0)
        se[i] = e.std(axis=0, ddof=1) / math.sqrt(count)
    mgf[:, t_arr == 0] = 1.0
    se[:, t_arr == 0] = 0.0
    nz = t_arr != 0
    t2 = t_arr[nz] ** 2
    logm = np.log(mgf[:, nz])
    fitted = tuple(float(row @ t2 / (t2 @ t2)) for row in logm) if nz.any() else \
        tuple(0.0 for _ in n_list)
    env = np.maximum((logm - math.log(2.0)) / t2, 0.0) if nz.any() else np.zeros((len(n_list), 1))
    env_n = tuple(float(row.max()) for row in env)
    return SubGaussianResult(n_list, tuple(float(t) for t in t_arr), mgf, se,
                             fitted, env_n, max(env_n))


# ---------------------------------------------------------------------------
# Condition (ii) by simulation
# ---------------------------------------------------------------------------

def estimate_condition_ii(dist: Distribution, n: int, r: float, count: int, seed, *,
                          threads: int | None = None) -> tuple[float, float]:
    """Mean and standard error of |X_1|^r / max_{i>=2} |X_i - X_1|^r on {some X_i != X_1}."""
    def work(rng, size):
        x = dist.draw(rng, (size, n))
        d = np.abs(x[:, 1:] - x[:, :1]).max(axis=1)
        live = d > 0
        out = np.zeros(size)
        out[live] = np.abs(x[live, 0]) ** r / d[live] ** r
        return out

    vals = np.concatenate(_run_blocks(work, _block_sizes(count), seed, threads))
    return float(vals.mean()), batch_means_stderr(vals)
