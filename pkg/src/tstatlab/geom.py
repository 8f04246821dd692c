"""Numerical checks of the two geometric bounds on n - u_n.

u_n(x) = (Σ x_i)² / Σ x_i².  The lower bound (mode ``lemma1``) holds when
some coordinate is far from x_1; the upper bound (mode ``lemma2``) holds when
every coordinate is close to x_1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize

STARTS = 32
GRAD_STEP = 1e-7
FEAS_TOL = 1e-10
GAP_TOL = 1e-9


class GeometryMode(str, Enum):
    LEMMA1_MIN = "lemma1Min"
    LEMMA2_CORNER_MAX = "lemma2CornerMax"


@dataclass(frozen=True)
class GeometryReport:
    n: int
    h: float
    mode: GeometryMode
    numeric_extremum: float
    analytic_extremum: float
    argextremum: tuple[float, ...]
    constant_checked: float
    gap: float
    passed: bool
    diagnostics: dict = field(default_factory=dict)


def u_n(x) -> float:
    x = np.asarray(x, dtype=float)
    ss = float(x @ x)
    if ss == 0.0:
        raise ValueError("u_n is undefined for the zero vector")
    return float(x.sum()) ** 2 / ss


def deficit(x) -> float:
    """n - u_n(x) as Σ_{i<j} (x_i - x_j)² / Σ x_i², free of cancellation."""
    x = np.asarray(x, dtype=float)
    ss = float(x @ x)
    if ss == 0.0:
        raise ValueError("u_n is undefined for the zero vector")
    n = len(x)
    dev = n * x - x.sum()
    return float(dev @ dev) / (n * ss)


def lemma1_constant(h: float) -> float:
    return math.sqrt(2 + 2 * h + h * h)


def lemma1_min(h: float) -> float:
    return h * h / (2 + 2 * h + h * h)


def lemma1_candidate(n: int, h: float, x1: float = 1.0) -> np.ndarray:
    """x_2 = x_1 + ε and x_j = (x_1² + x_2²)/(x_1 + x_2) for j >= 3, ε = sign(x_1) h |x_1|."""
    eps = math.copysign(h * abs(x1), x1)
    x2 = x1 + eps
    rest = (x1 * x1 + x2 * x2) / (x1 + x2)
    return np.array([x1, x2] + [rest] * (n - 2))


def lemma1_verify(n: int, h: float, *, x1: float = 1.0, seed: int = 0,
                  starts: int = STARTS) -> GeometryReport:
    """Minimise n - u_n over x with x_1 fixed and |x_2 - x_1| >= h |x_1|.

    The feasible set is the complement of a slab, so each start runs a
    bounded quasi-Newton descent inside one of its two half-spaces, with
    x_2 held on the correct side. One start is the analytic candidate.
    """
    if not 2 <= n <= 8 or not 0 < h < 1 or x1 == 0:
        raise ValueError("need 2 <= n <= 8, 0 < h < 1 and x1 != 0")
    rng = np.random.default_rng(seed)
    s = abs(x1)
    edge_hi, edge_lo = x1 + h * s, x1 - h * s
    box = 10.0 * s

    def obj(y):
        return deficit(np.concatenate([[x1], y]))

    seeds = [lemma1_candidate(n, h, x1)[1:]]
    for k in range(starts - 1):
        y = x1 + rng.uniform(-3, 3, n - 1) * s
        y[0] = (edge_hi if k % 2 == 0 else edge_lo) + math.copysign(rng.uniform(0, 2) * s,
                                                                    1.0 if k % 2 == 0 else -1.0)
        seeds.append(y)

    best_val, best_y, runs = math.inf, None, []
    for y0 in seeds:
        upper_side = y0[0] >= x1
        b2 = (edge_hi, x1 + box) if upper_side else (x1 - box, edge_lo)
        bounds = [b2] + [(x1 - box, x1 + box)] * (n - 2)
        y0 = np.clip(y0, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(obj, y0, method="L-BFGS-B", bounds=bounds,
                       options={"eps": GRAD_STEP, "ftol": 1e-15, "gtol": 1e-12,
                                "maxiter": 2000})
        runs.append(float(res.fun))
        if res.fun < best_val:
            best_val, best_y = float(res.fun), res.x

    x = np.concatenate([[x1], best_y])
    analytic = lemma1_min(h)
    residual = float(max(0.0, h * s - abs(x[1] - x[0])))
    recomputed = deficit(x)
    gap = abs(best_val - analytic)
    passed = (gap <= GAP_TOL and residual <= FEAS_TOL
              and abs(recomputed - best_val) <= 1e-12)
    return GeometryReport(
        n, float(h), GeometryMode.LEMMA1_MIN, best_val, analytic, tuple(float(v) for v in x),
        lemma1_constant(h), gap, passed,
        {"constraint_residual": residual, "active_gap": float(abs(abs(x[1] - x[0]) - h * s)),
         "best_random_start": min(runs[1:]) if len(runs) > 1 else math.nan,
         "recomputed": recomputed})


def corners(n: int, h: float, c2: float, x1: float = 1.0) -> np.ndarray:
    """All 2^{n-1} points x_1, x_i = x_1 ± c2 h |x_1| / √(n-1)."""
    eps = c2 * h * abs(x1) / math.sqrt(n - 1)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n - 1)))
    return np.column_stack([np.full(len(signs), x1), x1 + signs * eps])


def lemma2_formula(n: int, h: float, c2: float, k) -> np.ndarray:
    """n - u_n at a corner with k = #(+ε) - #(-ε), x_1 = 1."""
    k = np.asarray(k, dtype=float)
    s = math.sqrt(n - 1)
    return (h * h * c2 * c2 * (n - k * k / (n - 1))
            / (n + c2 * c2 * h * h + 2 * k * c2 * h / s))


def necessity_constant(n: int, h: float) -> float:
    return math.sqrt(n / (n - h * h))


def lemma2_verify(n: int, h: float, c2: float = 1.0, *, x1: float = 1.0) -> GeometryReport:
    """Corner maximum of n - u_n on the box |x_i - x_1| <= c2 h |x_1| / √(n-1)."""
    if not 2 <= n <= 8 or not 0 < h < 1 or not c2 > 0 or x1 == 0:
        raise ValueError("need 2 <= n <= 8, 0 < h < 1, c2 > 0 and x1 != 0")
    if not c2 * h < math.sqrt(n - 1):
        raise ValueError("need c2 * h < sqrt(n - 1)")
    pts = corners(n, h, c2, x1)
    direct = np.array([deficit(p) for p in pts])
    ks = np.sign(x1) * (pts[:, 1:] > x1).sum(axis=1) - np.sign(x1) * (pts[:, 1:] < x1).sum(axis=1)
    formula = lemma2_formula(n, h, c2, ks)
    corner_err = float(np.max(np.abs(direct - formula)))
    k_scan = np.arange(-(n - 1), n, 2)
    analytic = float(np.max(lemma2_formula(n, h, c2, k_scan)))
    i = int(np.argmax(direct))
    numeric = float(direct[i])
    gap = abs(numeric - analytic)
    below = numeric < h * h
    diag = {"corner_formula_max_error": corner_err, "below_h2": bool(below),
            "argmax_k": int(ks[i])}
    if n % 2 == 1:
        c_nec = necessity_constant(n, h) + 1e-3
        k0 = float(lemma2_formula(n, h, c_nec, 0))
        pts0 = corners(n, h, c_nec, x1)
        balanced = pts0[(pts0[:, 1:] > x1).sum(axis=1) == (n - 1) // 2]
        direct0 = float(deficit(balanced[0]))
        diag.update(necessity_c2=c_nec, necessity_value=direct0, necessity_formula=k0,
                    necessity_violates=bool(direct0 >= h * h))
    passed = corner_err <= 1e-12 and gap <= 1e-12 and (below or c2 != 1.0)
    if "necessity_violates" in diag:
        passed = passed and diag["necessity_violates"]
    return GeometryReport(n, float(h), GeometryMode.LEMMA2_CORNER_MAX, numeric, analytic,
                          tuple(float(v) for v in pts[i]), float(c2), gap, bool(passed), diag)


def interior_stationarity_check(n: int, h: float, c2: float = 1.0, *, samples: int = 1000,
                                seed: int = 0) -> bool:
    """True when no random interior point of the box beats the corner maximum."""
    eps = c2 * h / math.sqrt(n - 1)
    corner_max = max(deficit(p) for p in corners(n, h, c2))
    rng = np.random.default_rng(seed)
    pts = 1.0 + rng.uniform(-eps, eps, (samples, n))
    pts[:, 0] = 1.0
    dev = n * pts - pts.sum(axis=1, keepdims=True)
    vals = np.einsum("ij,ij->i", dev, dev) / (n * np.einsum("ij,ij->i", pts, pts))
    return bool(np.all(vals <= corner_max * (1 + 1e-12)))
