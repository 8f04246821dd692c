"""Finiteness classification of E|T_n|^r, the survival-integral evaluator,
t_ν limit moments and the convergence experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln, roots_legendre

from .common import INFINITE, DivergentTarget
from .dist import DEFAULT_H_GRID, Discrete, Distribution, concentration_q, fit_lambda
from .mc import Z95, estimate_moment, h_min, simulate_tstat

# Citation labels attached to evidence entries; machine-readable output keys on them.
CITATIONS = {
    "finite_support": "Theorem prop3 (ii)",
    "continuous_component": "Theorem thm0",
    "certified_q_bound": "Theorem thm3(i)",
    "fitted_q_exponent": "Theorem thm3(ii)",
    "sandwich": "Theorem thm3",
    "monotone_in_n": "Theorem thm-next",
    "monotone_in_r": "Lyapunov inequality",
}

FIT_Z = Z95  # width multiplier for the fitted-exponent interval


class Verdict(str, Enum):
    FINITE = "Finite"
    INFINITE = "Infinite"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class Evidence:
    rule: str
    citation: str
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rule": self.rule, "citation": self.citation, "inputs": dict(self.inputs)}


@dataclass(frozen=True)
class ClassificationVerdict:
    n: int
    r: float
    verdict: Verdict
    evidence: tuple[Evidence, ...]
    r_star_low: float | None = None
    r_star_high: float | None = None

    def __post_init__(self):
        if not self.evidence:
            raise ValueError("a verdict needs at least one evidence entry")
        if self.verdict is Verdict.INDETERMINATE:
            if self.r_star_low is None or self.r_star_high is None:
                raise ValueError("Indeterminate verdicts carry an r* band")
            if self.r_star_low > self.r_star_high:
                raise ValueError("r* band is inverted")

    @property
    def citations(self) -> tuple[str, ...]:
        return tuple(e.citation for e in self.evidence)

    def to_dict(self) -> dict:
        out = {"n": self.n, "r": self.r, "verdict": self.verdict.value,
               "evidence": [e.to_dict() for e in self.evidence]}
        if self.verdict is Verdict.INDETERMINATE:
            out["r_star_low"] = self.r_star_low
            out["r_star_high"] = self.r_star_high
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ClassificationVerdict:
        return cls(int(data["n"]), float(data["r"]), Verdict(data["verdict"]),
                   tuple(Evidence(e["rule"], e["citation"], dict(e["inputs"]))
                         for e in data["evidence"]),
                   data.get("r_star_low"), data.get("r_star_high"))


def _evidence(rule: str, **inputs) -> Evidence:
    return Evidence(rule, CITATIONS[rule], inputs)


@dataclass(frozen=True)
class QFit:
    slope: float
    stderr: float


_fit_cache: dict[tuple, QFit] = {}


def fitted_q_exponent(dist: Distribution, h_grid: Sequence[float] = DEFAULT_H_GRID) -> QFit | None:
    key = (dist, tuple(h_grid))
    if key not in _fit_cache:
        vals = [concentration_q(dist, h) for h in h_grid]
        try:
            fit = fit_lambda(h_grid, vals)
        except ValueError:
            return None
        _fit_cache[key] = QFit(fit.slope, fit.stderr)
    return _fit_cache[key]


def classify(dist: Distribution, n: int, r: float, *,
             h_grid: Sequence[float] = DEFAULT_H_GRID) -> ClassificationVerdict:
    """First applicable rule wins; the last rule reports the r* band."""
    if n < 2 or not r > 0:
        raise ValueError("need n >= 2 and r > 0")
    n, r = int(n), float(r)

    # (1) finite support: condition (ii) is at most max|a|^r · gap^{-r}
    if isinstance(dist, Discrete):
        pts = dist.points
        gap = float(np.min(np.diff(pts))) if len(pts) > 1 else math.inf
        return ClassificationVerdict(n, r, Verdict.FINITE, (_evidence(
            "finite_support", atoms=len(pts), max_abs_atom=float(np.max(np.abs(pts))),
            min_gap=gap),))

    # (2) any continuous component forces divergence at r >= n - 1
    if dist.has_continuous_part and r >= n - 1:
        return ClassificationVerdict(n, r, Verdict.INFINITE, (_evidence(
            "continuous_component", bound=n - 1),))

    lam = dist.q_exponent() if dist.is_continuous else None
    # (3) a certified q(h) <= C h^λ with λ > r/(n-1)
    if lam is not None and lam > r / (n - 1):
        return ClassificationVerdict(n, r, Verdict.FINITE, (_evidence(
            "certified_q_bound", lam=lam, threshold=r / (n - 1)),))

    fit = fitted_q_exponent(dist, h_grid) if dist.is_continuous else None
    # (4) fitted λ clearly below r/n
    if fit is not None and fit.slope + FIT_Z * fit.stderr < r / n:
        return ClassificationVerdict(n, r, Verdict.INFINITE, (_evidence(
            "fitted_q_exponent", lam_fit=fit.slope, lam_stderr=fit.stderr,
            threshold=r / n),))

    # (5) the sandwich λ(n-1) <= r* <= min(n-1, λn)
    low = lam * (n - 1) if lam is not None else 0.0
    high = float(n - 1)
    if lam is not None:
        high = min(high, lam * n)
    elif fit is not None:
        high = min(high, (fit.slope + FIT_Z * fit.stderr) * n)
    high = max(high, low)
    inputs = {"lam": lam}
    if fit is not None:
        inputs.update(lam_fit=fit.slope, lam_stderr=fit.stderr)
    return ClassificationVerdict(n, r, Verdict.INDETERMINATE,
                                 (_evidence("sandwich", **inputs),), low, high)


def classify_grid(dist: Distribution, n_grid: Sequence[int], r_grid: Sequence[float], *,
                  h_grid: Sequence[float] = DEFAULT_H_GRID
                  ) -> dict[tuple[int, float], ClassificationVerdict]:
    """Classify every (n, r) cell, then settle Indeterminate cells by monotonicity.

    Finite at (n, r) gives Finite at every (n' >= n, r' <= r); Infinite at
    (n, r) gives Infinite at every (n' <= n, r' >= r).
    """
    cells = {(int(n), float(r)): classify(dist, n, r, h_grid=h_grid)
             for n in sorted(set(n_grid)) for r in sorted(set(r_grid))}
    finite = [k for k, v in cells.items() if v.verdict is Verdict.FINITE]
    infinite = [k for k, v in cells.items() if v.verdict is Verdict.INFINITE]
    out = {}
    for (n, r), v in cells.items():
        if v.verdict is Verdict.INDETERMINATE:
            src_f = [k for k in finite if k[0] <= n and k[1] >= r]
            src_i = [k for k in infinite if k[0] >= n and k[1] <= r]
            if src_f and src_i:
                raise RuntimeError(f"contradictory propagation into cell {(n, r)}")
            if src_f:
                sn, sr = min(src_f)
                rule = "monotone_in_n" if sn < n else "monotone_in_r"
                v = ClassificationVerdict(n, r, Verdict.FINITE, v.evidence + (
                    _evidence(rule, source_n=sn, source_r=sr),))
            elif src_i:
                sn, sr = max(src_i)
                rule = "monotone_in_n" if sn > n else "monotone_in_r"
                v = ClassificationVerdict(n, r, Verdict.INFINITE, v.evidence + (
                    _evidence(rule, source_n=sn, source_r=sr),))
        out[(n, r)] = v
    return out


# ---------------------------------------------------------------------------
# Survival integral
# ---------------------------------------------------------------------------

_GL8 = roots_legendre(8)
_GL16 = roots_legendre(16)
QUAD_RTOL = 1e-8


def _gl(f, a: np.ndarray, b: np.ndarray, rule) -> np.ndarray:
    x, w = rule
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    return half * (f(nodes) @ w)


def panel_quad(f: Callable[[np.ndarray], np.ndarray], breaks: np.ndarray, *,
               rtol: float = QUAD_RTOL, max_rounds: int = 40) -> tuple[float, float]:
    """Adaptive Gauss-Legendre over panels between ``breaks``.

    Each panel compares the 8- and 16-point rules and is bisected until the
    difference falls below its width-proportional share of ``rtol`` times
    the current total. Returns the integral and the summed error estimate.
    """
    a, b = np.asarray(breaks[:-1], float), np.asarray(breaks[1:], float)
    keep = b > a
    a, b = a[keep], b[keep]
    span = float(b.sum() - a.sum()) if a.size else 0.0
    done_val: list[np.ndarray] = []
    done_err: list[np.ndarray] = []
    for _ in range(max_rounds):
        if a.size == 0:
            break
        coarse, fine = _gl(f, a, b, _GL8), _gl(f, a, b, _GL16)
        err = np.abs(fine - coarse)
        scale = abs(math.fsum(fine) + sum(math.fsum(v) for v in done_val))
        ok = err <= rtol * max(scale, 1e-300) * (b - a) / span
        done_val.append(fine[ok])
        done_err.append(err[ok])
        a, b = a[~ok], b[~ok]
        m = 0.5 * (a + b)
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
    if a.size:
        done_val.append(_gl(f, a, b, _GL16))
        done_err.append(np.abs(_gl(f, a, b, _GL16) - _gl(f, a, b, _GL8)))
    total = math.fsum(np.concatenate(done_val)) if done_val else 0.0
    error = math.fsum(np.concatenate(done_err)) if done_err else 0.0
    return total, error


@dataclass(frozen=True)
class SurvivalIntegral:
    value: float
    quad_error: float
    truncated_probability: float  # P(U* > n - h_min²), the mass beyond the cut
    h_min: float


def _check_curve(surv, n: int, breaks: np.ndarray) -> None:
    probe = np.unique(np.concatenate([breaks, np.linspace(0.0, n - h_min(n) ** 2, 257)]))
    s = np.asarray(surv(probe), dtype=float)
    if np.any(s < -1e-15) or np.any(s > 1 + 1e-15) or np.any(np.diff(s) > 1e-15):
        raise ValueError("invalid survival curve: must be nonincreasing with values in [0, 1]")


def moment_via_survival(survival, n: int, r: float) -> SurvivalIntegral:
    """E|T_n|^r as the integral of the survival function of U*.

    ``survival`` is a vectorised callable z ↦ P(U* > z); if it has a
    ``breakpoints`` attribute, panels are aligned with it.

    On [0, n/2] the substitution z = w^{2/r} removes the z^{r/2-1} factor; on
    [n/2, n) the substitution n - z = h² leaves h^{-(r+1)} S(n - h²), and the
    h-integral stops at h_min = n^{-4}.
    """
    if not r > 0 or n < 2:
        raise ValueError("need n >= 2 and r > 0")
    hm = h_min(n)
    z_bp = np.asarray(getattr(survival, "breakpoints", np.empty(0)), dtype=float)
    z_bp = z_bp[(z_bp > 0) & (z_bp < n - hm * hm)]
    _check_curve(survival, n, z_bp)

    half = n / 2.0
    lo_bp = z_bp[z_bp < half]
    w_breaks = np.unique(np.concatenate([[0.0, half ** (r / 2)], lo_bp ** (r / 2),
                                         np.linspace(0.0, half ** (r / 2), 9)]))

    def f_lower(w):
        z = w ** (2.0 / r)
        return (2.0 / r) * survival(z) * (n - z) ** (-(r / 2 + 1))

    hi_bp = z_bp[z_bp >= half]
    h_breaks = np.unique(np.concatenate([[hm, math.sqrt(half)], np.sqrt(n - hi_bp),
                                         np.geomspace(hm, math.sqrt(half), 17)]))
    h_breaks = h_breaks[(h_breaks >= hm) & (h_breaks <= math.sqrt(half))]

    def f_upper(h):
        z = n - h * h
        return 2.0 * z ** (r / 2 - 1) * survival(z) * h ** (-(r + 1))

    v1, e1 = panel_quad(f_lower, w_breaks)
    v2, e2 = panel_quad(f_upper, h_breaks)
    pref = (r / 2) * n * (n - 1) ** (r / 2)
    tail = float(np.asarray(survival(n - hm * hm)))
    return SurvivalIntegral(pref * (v1 + v2), pref * (e1 + e2), tail, hm)


# ---------------------------------------------------------------------------
# Limit moments and convergence
# ---------------------------------------------------------------------------

def limit_moment(nu: float, r: float):
    """E|T|^r for T ~ t_ν, or INFINITE when r >= ν."""
    if not nu > 0 or not r > 0:
        raise ValueError("need nu > 0 and r > 0")
    if r >= nu:
        return INFINITE
    logv = ((r / 2) * math.log(nu) + gammaln((r + 1) / 2) + gammaln((nu - r) / 2)
            - 0.5 * math.log(math.pi) - gammaln(nu / 2))
    return math.exp(logv)


def normal_abs_moment(r: float) -> float:
    """E|Z|^r for standard normal Z."""
    if r == int(r) and r < 300:
        # (r-1)!! for even r, √(2/π) (r-1)!! for odd r
        df = math.prod(range(int(r) - 1, 0, -2))
        return float(df) if int(r) % 2 == 0 else df * math.sqrt(2 / math.pi)
    if r < 300:
        return 2.0 ** (r / 2) * math.gamma((r + 1) / 2) / math.sqrt(math.pi)
    return math.exp((r / 2) * math.log(2.0) + gammaln((r + 1) / 2) - 0.5 * math.log(math.pi))


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    estimate: float
    std_error: float


@dataclass(frozen=True)
class ConvergenceTable:
    r: float
    rows: tuple[ConvergenceRow, ...]
    limit: float
    max_top_quartile_deviation: float


def convergence_experiment(dist: Distribution, r: float, n_grid: Sequence[int], count: int,
                           seed, *, threads: int | None = None) -> ConvergenceTable:
    """MC estimates of E|T_n|^r along ``n_grid`` against the standard-normal limit.

    Each n draws from its own child stream of ``seed``.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if not n_grid:
        raise ValueError("n grid must be nonempty")
    if not dist.has_finite_variance:
        raise DivergentTarget("observation law has infinite variance; the limit is not normal")
    v = classify(dist, n_grid[0], r)
    if v.verdict is Verdict.INFINITE:
        raise DivergentTarget(f"E|T_{n_grid[0]}|^{r} is infinite ({', '.join(v.citations)})")
    streams = np.random.SeedSequence(seed).spawn(len(n_grid))
    rows = []
    for n, stream in zip(n_grid, streams):
        est = estimate_moment(simulate_tstat(dist, n, count, stream, threads=threads), r,
                              min_count=min(count, 10_000))
        rows.append(ConvergenceRow(n, est.value, est.std_error))
    limit = normal_abs_moment(r)
    top = rows[-max(1, math.ceil(len(rows) / 4)):]
    dev = max(abs(row.estimate - limit) for row in top)
    return ConvergenceTable(float(r), tuple(rows), limit, dev)

