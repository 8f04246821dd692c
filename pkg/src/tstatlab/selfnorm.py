"""Student's t-statistic and the squared self-normalized sum U*.

For a sample x_1..x_n:

    S = Σ x_i,  V = (Σ x_i²)^½,  σ̂² = Σ (x_i - S/n)² / (n - 1)
    T = S / (√n σ̂)      (T = 0 when σ̂ = 0)
    U* = (S/V)²          (U* = 0 when V = 0 or all x_i are equal)

and T² > x  iff  U* > n x / (n + x - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class TStatSummary:
    n: int
    sum: float
    vnorm: float
    sigma_hat: float
    t: float
    t_sq: float  # T², not rounded through the square root
    ustar: float
    ustar_gap: float  # n - U*, computed without cancellation
    degenerate_all_equal: bool
    degenerate_all_zero: bool


@dataclass(frozen=True)
class TStatBatch:
    """Struct-of-arrays form of many TStatSummary values with a common n."""

    n: int
    sum: np.ndarray
    vnorm: np.ndarray
    sigma_hat: np.ndarray
    t: np.ndarray
    t_sq: np.ndarray
    ustar: np.ndarray
    ustar_gap: np.ndarray
    degenerate_all_equal: np.ndarray
    degenerate_all_zero: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> TStatSummary:
        return TStatSummary(
            self.n, float(self.sum[i]), float(self.vnorm[i]), float(self.sigma_hat[i]),
            float(self.t[i]), float(self.t_sq[i]), float(self.ustar[i]), float(self.ustar_gap[i]),
            bool(self.degenerate_all_equal[i]), bool(self.degenerate_all_zero[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def self_normalized(self) -> np.ndarray:
        """S/V with the convention 0 for V = 0."""
        out = np.zeros_like(self.sum)
        nz = self.vnorm > 0
        out[nz] = self.sum[nz] / self.vnorm[nz]
        return out

    @classmethod
    def concat(cls, parts: list[TStatBatch]) -> TStatBatch:
        if not parts:
            raise ValueError("nothing to concatenate")
        n = parts[0].n
        if any(p.n != n for p in parts):
            raise ValueError("batches must share n")
        names = ("sum", "vnorm", "sigma_hat", "t", "t_sq", "ustar", "ustar_gap",
                 "degenerate_all_equal", "degenerate_all_zero")
        return cls(n, *(np.concatenate([getattr(p, k) for p in parts]) for k in names))


# Double-double helpers: a value is an unevaluated sum hi + lo of two floats.
# Error-free transformations keep about 106 bits, so each statistic below is
# one final rounding of a nearly exact quantity and exact ties stay ties.

_SPLIT = 134217729.0  # 2^27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _fast_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _two_prod(a, b):
    p = a * b
    ca, cb = _SPLIT * a, _SPLIT * b
    ah, bh = ca - (ca - a), cb - (cb - b)
    al, bl = a - ah, b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _fast_two_sum(p, e + (ah * bl + al * bh))


def _dd_sub(ah, al, bh, bl):
    s, e = _two_sum(ah, -bh)
    return _fast_two_sum(s, e + (al - bl))


def _dd_div(ah, al, bh, bl):
    """(a / b) rounded to a float."""
    q = ah / bh
    ph, pl = _dd_mul(q, np.zeros_like(q), bh, bl)
    rh, rl = _dd_sub(ah, al, ph, pl)
    return q + (rh + rl) / bh


def _dd_accumulate(terms):
    hi = lo = 0.0
    for t_hi, t_lo in terms:
        hi, e = _two_sum(hi, t_hi)
        lo = lo + (e + t_lo)
    return _fast_two_sum(hi, lo)


def tstats(samples) -> TStatBatch:
    """Statistics for every row of a (count, n) array."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError("samples must be a 2-d array of shape (count, n)")
    count, n = x.shape
    if n < 2:
        raise ValueError("statistic undefined for n < 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    all_equal = np.all(x == x[:, :1], axis=1)
    all_zero = all_equal & (x[:, 0] == 0.0)
    # rescale each row by a power of two so squares neither underflow nor overflow
    _, e = np.frexp(np.max(np.abs(x), axis=1))
    x = np.ldexp(x, -e[:, None])
    cols = [np.ascontiguousarray(x[:, j]) for j in range(n)]
    zero = np.zeros(count)
    sh, sl = _dd_accumulate((c, zero) for c in cols)               # S
    qh, ql = _dd_accumulate(_two_prod(c, c) for c in cols)         # Σ x²
    s2h, s2l = _dd_mul(sh, sl, sh, sl)                             # S²
    nqh, nql = _dd_mul(qh, ql, np.full(count, float(n)), zero)
    dh, dl = _dd_sub(nqh, nql, s2h, s2l)                           # n Σx² - S² = n Σ(x - m)²

    live = ~all_equal & (dh > 0)
    dh_s, dl_s = np.where(live, dh, 1.0), np.where(live, dl, 0.0)
    qh_s, ql_s = np.where(qh > 0, qh, 1.0), np.where(qh > 0, ql, 0.0)
    ustar = np.where(live, np.minimum(_dd_div(s2h, s2l, qh_s, ql_s), n), 0.0)
    gap = np.where(live, _dd_div(dh_s, dl_s, qh_s, ql_s), float(n))
    nm1h, nm1l = _dd_mul(s2h, s2l, np.full(count, n - 1.0), zero)
    t_sq = np.where(live, _dd_div(nm1h, nm1l, dh_s, dl_s), 0.0)
    t = np.sign(sh) * np.sqrt(t_sq)
    sigma = np.where(live, np.sqrt(np.maximum(dh, 0.0) / (n * (n - 1.0))), 0.0)
    v = np.sqrt(qh)
    return TStatBatch(n, np.ldexp(sh, e), np.ldexp(v, e), np.ldexp(sigma, e), t, t_sq, ustar,
                      gap, all_equal, all_zero)


def compute_stats(sample) -> TStatSummary:
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1:
        raise ValueError("sample must be one-dimensional")
    if x.size < 2:
        raise ValueError("statistic undefined for n < 2")
    return tstats(x[None, :])[0]


def ustar_threshold(n: int, x: float) -> float:
    """n x / (n + x - 1): T² > x  iff  U* > ustar_threshold(n, x)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if x < 0:
        raise ValueError("x must be >= 0")
    if np.isinf(x):
        return float(n)
    fx = Fraction(x)
    return float(n * fx / (n + fx - 1))


def ustar_inverse_threshold(n: int, z: float) -> float:
    """z (n - 1) / (n - z), the inverse of ustar_threshold on [0, n)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0 <= z < n:
        raise ValueError(f"z must lie in [0, {n}), got {z}")
    fz = Fraction(z)
    return float(fz * (n - 1) / (n - fz))
