"""Observation laws F and their concentration functions.

Every law is an immutable (frozen, hashable) dataclass.  Interval
probabilities are evaluated on whichever side of the median keeps the
subtraction well conditioned, so tiny windows far in a tail still come
out with full relative precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import ClassVar, NamedTuple, Sequence

import numpy as np
from scipy import special

from .common import SpecError

ATOM_SEPARATION = 1e-12
PROB_TOL = 1e-12

# Search grid for the scaled concentration function of continuous laws.
Q_GRID = np.geomspace(1e-6, 1e6, 512)
GOLDEN_TOL = 1e-10
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _finite(name: str, value) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise SpecError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise SpecError(f"{name} must be finite, got {value}")
    return value


def _positive(name: str, value) -> float:
    value = _finite(name, value)
    if value <= 0:
        raise SpecError(f"{name} must be > 0, got {value}")
    return value


class Distribution:
    """Interface shared by all observation laws."""

    kind: ClassVar[str]

    # --- structure -------------------------------------------------------
    @property
    def is_finite_discrete(self) -> bool:
        return False

    @property
    def has_continuous_part(self) -> bool:
        return True

    @property
    def is_continuous(self) -> bool:
        return True

    @property
    def has_finite_variance(self) -> bool:
        return True

    def atoms(self) -> list[tuple[float, float]]:
        """Point masses as (point, probability) pairs."""
        return []

    def landmarks(self) -> list[float]:
        """Points where concentration maxima tend to sit."""
        return []

    # --- probabilities ---------------------------------------------------
    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        """P(X > x)."""
        raise NotImplementedError

    def median(self) -> float:
        raise NotImplementedError

    def prob(self, lo, hi, closed: bool = True):
        """P(lo <= X <= hi) (``closed``) or P(lo < X < hi); vectorised."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        upper = lo >= self.median()
        with np.errstate(invalid="ignore"):
            left = self.cdf(hi) - self.cdf(lo)
            right = self.sf(lo) - self.sf(hi)
        out = np.where(upper, right, left)
        out = np.where(hi >= lo, np.clip(out, 0.0, 1.0), 0.0)
        return out if out.ndim else float(out)

    # --- sampling --------------------------------------------------------
    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def isf(self, v):
        raise NotImplementedError

    def draw_window(self, rng: np.random.Generator, lo, hi, cols: int) -> np.ndarray:
        """Draw ``cols`` values per row from F conditioned on (lo[i], hi[i]).

        Rows whose window carries no mass are filled with the window
        midpoint; callers weight those rows by zero.
        """
        lo = np.asarray(lo, dtype=float)[:, None]
        hi = np.asarray(hi, dtype=float)[:, None]
        u = rng.random((lo.shape[0], cols))
        upper = lo >= self.median()
        c_lo, c_hi = self.cdf(lo), self.cdf(hi)
        s_lo, s_hi = self.sf(lo), self.sf(hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            left = self.ppf(c_lo + u * (c_hi - c_lo))
            right = self.isf(s_hi + u * (s_lo - s_hi))
        x = np.where(upper, right, left)
        empty = (hi <= lo) | ~np.isfinite(x)
        x = np.where(empty, 0.5 * (lo + hi), x)
        return np.clip(x, lo, hi)

    # --- regularity ------------------------------------------------------
    def q_exponent(self) -> float | None:
        """Exponent λ with q(h) ≍ h^λ, known in closed form, or None."""
        return None

    def bounded_monotone_density(self) -> bool:
        raise SpecError(f"{self.kind}: density condition inapplicable")

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Discrete(Distribution):
    atoms_: tuple[tuple[float, float], ...]

    kind: ClassVar[str] = "discrete"

    def __init__(self, atoms: Sequence[Sequence[float]]):
        atoms = tuple((_finite("atom point", a[0]), _finite("atom probability", a[1]))
                      for a in atoms)
        if not atoms:
            raise SpecError("discrete law needs at least one atom")
        for a, p in atoms:
            if p <= 0:
                raise SpecError(f"atom probability must be > 0, got {p} at {a}")
        total = math.fsum(p for _, p in atoms)
        if abs(total - 1.0) > PROB_TOL:
            raise SpecError(f"probabilities sum to {total:.15g}")
        for (a, _), (b, _) in zip(atoms, atoms[1:]):
            if not b > a:
                raise SpecError(f"atom points must be strictly increasing ({a} then {b})")
            if b - a < ATOM_SEPARATION:
                raise SpecError(f"atoms {a} and {b} closer than {ATOM_SEPARATION}")
        object.__setattr__(self, "atoms_", atoms)

    @property
    def points(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms_])

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms_])

    @property
    def is_finite_discrete(self) -> bool:
        return True

    @property
    def has_continuous_part(self) -> bool:
        return False

    @property
    def is_continuous(self) -> bool:
        return False

    def atoms(self):
        return list(self.atoms_)

    def landmarks(self):
        return [a for a, _ in self.atoms_]

    def _cum(self):
        return np.concatenate([[0.0], np.cumsum(self.probs)])

    def cdf(self, x):
        idx = np.searchsorted(self.points, x, side="right")
        return self._cum()[idx]

    def sf(self, x):
        tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
        idx = np.searchsorted(self.points, x, side="right")
        return tail[idx]

    def median(self) -> float:
        return float(self.points[np.searchsorted(self._cum()[1:], 0.5)])

    def prob(self, lo, hi, closed: bool = True):
        pts, cum = self.points, self._cum()
        if closed:
            i = np.searchsorted(pts, lo, side="left")
            j = np.searchsorted(pts, hi, side="right")
        else:
            i = np.searchsorted(pts, lo, side="right")
            j = np.searchsorted(pts, hi, side="left")
        out = np.where(j > i, cum[np.maximum(j, i)] - cum[i], 0.0)
        return out if np.ndim(out) else float(out)

    def draw(self, rng, size):
        return rng.choice(self.points, size=size, p=self.probs)

    def draw_window(self, rng, lo, hi, cols):
        pts, cum = self.points, self._cum()
        lo = np.asarray(lo, dtype=float)[:, None]
        hi = np.asarray(hi, dtype=float)[:, None]
        first = np.searchsorted(pts, lo, side="right")   # first atom > lo
        last = np.searchsorted(pts, hi, side="left") - 1  # last atom < hi
        c_lo, c_hi = cum[first], cum[np.maximum(last + 1, first)]
        u = c_lo + rng.random((lo.shape[0], cols)) * (c_hi - c_lo)
        idx = np.searchsorted(cum[1:], u, side="right")
        idx = np.clip(idx, first, np.maximum(last, first))
        idx = np.minimum(idx, len(pts) - 1)
        x = pts[idx]
        return np.where(last >= first, x, 0.5 * (lo + hi))

    def bounded_monotone_density(self) -> bool:
        raise SpecError("discrete law: density condition inapplicable")

    def to_dict(self):
        return {"kind": self.kind, "atoms": [[a, p] for a, p in self.atoms_]}


@dataclass(frozen=True)
class Normal(Distribution):
    mean: float = 0.0
    stddev: float = 1.0

    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        object.__setattr__(self, "mean", _finite("mean", self.mean))
        object.__setattr__(self, "stddev", _positive("stddev", self.stddev))

    def landmarks(self):
        return [self.mean, self.mean - self.stddev, self.mean + self.stddev]

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.stddev)

    def sf(self, x):
        return special.ndtr((self.mean - np.asarray(x, dtype=float)) / self.stddev)

    def median(self):
        return self.mean

    def ppf(self, u):
        return self.mean + self.stddev * special.ndtri(u)

    def isf(self, v):
        return self.mean - self.stddev * special.ndtri(v)

    def draw(self, rng, size):
        return rng.normal(self.mean, self.stddev, size)

    def q_exponent(self):
        return 1.0

    def bounded_monotone_density(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class Cauchy(Distribution):
    location: float = 0.0
    scale: float = 1.0

    kind: ClassVar[str] = "cauchy"

    def __post_init__(self):
        object.__setattr__(self, "location", _finite("location", self.location))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    @property
    def has_finite_variance(self):
        return False

    def landmarks(self):
        return [self.location, self.location - self.scale, self.location + self.scale]

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return 0.5 + np.arctan(z) / np.pi

    def sf(self, x):
        z = (np.asarray(x, dtype=float) - self.location) / self.scale
        return 0.5 - np.arctan(z) / np.pi

    def median(self):
        return self.location

    def ppf(self, u):
        return self.location + self.scale * np.tan(np.pi * (np.asarray(u) - 0.5))

    def isf(self, v):
        return self.location + self.scale * np.tan(np.pi * (0.5 - np.asarray(v)))

    def draw(self, rng, size):
        return self.location + self.scale * rng.standard_cauchy(size)

    def q_exponent(self):
        return 1.0

    def bounded_monotone_density(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "location": self.location, "scale": self.scale}


@dataclass(frozen=True)
class Uniform(Distribution):
    a: float = 0.0
    b: float = 1.0

    kind: ClassVar[str] = "uniform"

    def __post_init__(self):
        a, b = _finite("a", self.a), _finite("b", self.b)
        if not b > a:
            raise SpecError(f"uniform law needs b > a, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def landmarks(self):
        return [self.a, self.b, 0.5 * (self.a + self.b)]

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.b - np.asarray(x, dtype=float)) / (self.b - self.a), 0.0, 1.0)

    def median(self):
        return 0.5 * (self.a + self.b)

    def ppf(self, u):
        return self.a + np.asarray(u) * (self.b - self.a)

    def isf(self, v):
        return self.b - np.asarray(v) * (self.b - self.a)

    def draw(self, rng, size):
        return rng.uniform(self.a, self.b, size)

    def q_exponent(self):
        return 1.0

    def bounded_monotone_density(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Pareto(Distribution):
    """Density shape·scale^shape / x^(shape+1) on [scale, ∞)."""

    shape: float = 2.0
    scale: float = 1.0

    kind: ClassVar[str] = "pareto"

    def __post_init__(self):
        object.__setattr__(self, "shape", _positive("shape", self.shape))
        object.__setattr__(self, "scale", _positive("scale", self.scale))

    @property
    def has_finite_variance(self):
        return self.shape > 2

    def landmarks(self):
        return [self.scale, 2.0 * self.scale]

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (self.scale / np.maximum(x, self.scale)) ** self.shape
        return np.where(x < self.scale, 1.0, s)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = -np.expm1(self.shape * np.log(self.scale / np.maximum(x, self.scale)))
        return np.where(x < self.scale, 0.0, c)

    def median(self):
        return self.scale * 2.0 ** (1.0 / self.shape)

    def ppf(self, u):
        return self.scale * (1.0 - np.asarray(u)) ** (-1.0 / self.shape)

    def isf(self, v):
        return self.scale * np.asarray(v) ** (-1.0 / self.shape)

    def draw(self, rng, size):
        return self.isf(1.0 - rng.random(size))

    def q_exponent(self):
        return 1.0

    def bounded_monotone_density(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "shape": self.shape, "scale": self.scale}


@dataclass(frozen=True)
class PowerSingularity(Distribution):
    """Density ∝ |x - center|^(exponent-1) on (center ± halfwidth).

    CDF: 0.5 + 0.5·sign(x-c)·|x-c|^β / w^β.  exponent = 1 is the uniform law.
    """

    center: float = 0.0
    exponent: float = 0.5
    halfwidth: float = 1.0

    kind: ClassVar[str] = "power_singularity"

    def __post_init__(self):
        object.__setattr__(self, "center", _finite("center", self.center))
        beta = _finite("exponent", self.exponent)
        if not 0.0 < beta <= 1.0:
            raise SpecError(f"exponent must lie in (0, 1], got {beta}")
        object.__setattr__(self, "exponent", beta)
        object.__setattr__(self, "halfwidth", _positive("halfwidth", self.halfwidth))

    def landmarks(self):
        c, w = self.center, self.halfwidth
        return [c, c - w, c + w]

    def _half(self, d):
        # P(center < X <= center + d) for d >= 0
        d = np.minimum(np.asarray(d, dtype=float), self.halfwidth)
        return 0.5 * (np.maximum(d, 0.0) / self.halfwidth) ** self.exponent

    def cdf(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.where(d >= 0, 0.5 + self._half(d), 0.5 - self._half(-d))

    def sf(self, x):
        d = np.asarray(x, dtype=float) - self.center
        return np.where(d >= 0, 0.5 - self._half(d), 0.5 + self._half(-d))

    def prob(self, lo, hi, closed=True):
        lo = np.asarray(lo, dtype=float) - self.center
        hi = np.asarray(hi, dtype=float) - self.center
        # same-side windows: difference of two half-masses, no cancellation near 0.5
        both_pos = self._half(hi) - self._half(lo)
        both_neg = self._half(-lo) - self._half(-hi)
        straddle = self._half(hi) + self._half(-lo)
        out = np.where(lo >= 0, both_pos, np.where(hi <= 0, both_neg, straddle))
        out = np.where(hi >= lo, np.clip(out, 0.0, 1.0), 0.0)
        return out if out.ndim else float(out)

    def median(self):
        return self.center

    def ppf(self, u):
        s = 2.0 * np.asarray(u, dtype=float) - 1.0
        return self.center + np.sign(s) * self.halfwidth * np.abs(s) ** (1.0 / self.exponent)

    def isf(self, v):
        return 2.0 * self.center - self.ppf(v)

    def draw(self, rng, size):
        return self.ppf(rng.random(size))

    def draw_window(self, rng, lo, hi, cols):
        # invert half-masses directly; the generic CDF route loses the singularity
        c, w, beta = self.center, self.halfwidth, self.exponent
        lo = np.asarray(lo, dtype=float)[:, None] - c
        hi = np.asarray(hi, dtype=float)[:, None] - c
        m_lo = np.sign(lo) * self._half(np.abs(lo))
        m_hi = np.sign(hi) * self._half(np.abs(hi))
        m = m_lo + rng.random((lo.shape[0], cols)) * (m_hi - m_lo)
        x = c + np.sign(m) * w * np.abs(2.0 * m) ** (1.0 / beta)
        x = np.where(m_hi > m_lo, x, c + 0.5 * (lo + hi))
        return np.clip(x, c + lo, c + hi)

    def q_exponent(self):
        # a singularity at the origin is invisible to relative windows
        return 1.0 if self.center == 0.0 else self.exponent

    def bounded_monotone_density(self):
        # |x - c|^(β-1) blows up at the center unless β = 1
        return self.exponent == 1.0

    def to_dict(self):
        return {"kind": self.kind, "center": self.center,
                "exponent": self.exponent, "halfwidth": self.halfwidth}


@dataclass(frozen=True)
class Mixture(Distribution):
    weights: tuple[float, ...]
    components: tuple[Distribution, ...]

    kind: ClassVar[str] = "mixture"

    def __post_init__(self):
        weights = tuple(_finite("weight", w) for w in self.weights)
        components = tuple(self.components)
        if not components or len(weights) != len(components):
            raise SpecError("mixture needs one positive weight per component")
        if any(w <= 0 for w in weights):
            raise SpecError("mixture weights must be > 0")
        total = math.fsum(weights)
        if abs(total - 1.0) > PROB_TOL:
            raise SpecError(f"mixture weights sum to {total:.15g}")
        for comp in components:
            if isinstance(comp, Mixture):
                raise SpecError("mixture components may not themselves be mixtures")
            if not isinstance(comp, Distribution):
                raise SpecError(f"mixture component {comp!r} is not a distribution")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def is_finite_discrete(self):
        return all(c.is_finite_discrete for c in self.components)

    @property
    def has_continuous_part(self):
        return any(c.has_continuous_part for c in self.components)

    @property
    def is_continuous(self):
        return all(c.is_continuous for c in self.components)

    @property
    def has_finite_variance(self):
        return all(c.has_finite_variance for c in self.components)

    def atoms(self):
        mass: dict[float, float] = {}
        for w, comp in zip(self.weights, self.components):
            for a, p in comp.atoms():
                mass[a] = mass.get(a, 0.0) + w * p
        return sorted(mass.items())

    def landmarks(self):
        return sorted({x for comp in self.components for x in comp.landmarks()})

    def cdf(self, x):
        return sum(w * c.cdf(x) for w, c in zip(self.weights, self.components))

    def sf(self, x):
        return sum(w * c.sf(x) for w, c in zip(self.weights, self.components))

    def prob(self, lo, hi, closed=True):
        return sum(w * np.asarray(c.prob(lo, hi, closed))
                   for w, c in zip(self.weights, self.components))

    def median(self):
        lo, hi = min(self.landmarks()) - 1.0, max(self.landmarks()) + 1.0
        while self.cdf(lo) > 0.5:
            lo -= 2.0 * (hi - lo)
        while self.cdf(hi) < 0.5:
            hi += 2.0 * (hi - lo)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.cdf(mid) < 0.5:
                lo = mid
            else:
                hi = mid
        return hi

    def draw(self, rng, size):
        shape = (size,) if np.isscalar(size) else tuple(size)
        total = int(np.prod(shape))
        which = rng.choice(len(self.components), size=total, p=np.array(self.weights))
        out = np.empty(total)
        for k, comp in enumerate(self.components):
            sel = which == k
            out[sel] = comp.draw(rng, int(sel.sum()))
        return out.reshape(shape)

    def draw_window(self, rng, lo, hi, cols):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        mass = np.stack([w * np.asarray(c.prob(lo, hi, closed=False))
                         for w, c in zip(self.weights, self.components)], axis=1)
        total = mass.sum(axis=1, keepdims=True)
        cum = np.cumsum(np.where(total > 0, mass / np.where(total > 0, total, 1.0), 0.0), axis=1)
        u = rng.random((lo.shape[0], cols))
        which = (u[:, :, None] >= cum[:, None, :]).sum(axis=2)
        which = np.minimum(which, len(self.components) - 1)
        out = np.empty((lo.shape[0], cols))
        for k, comp in enumerate(self.components):
            draws = comp.draw_window(rng, lo, hi, cols)
            out = np.where(which == k, draws, out)
        return np.where(total > 0, out, 0.5 * (lo + hi)[:, None])

    def q_exponent(self):
        if not self.is_continuous:
            return None
        exps = [c.q_exponent() for c in self.components]
        return None if any(e is None for e in exps) else min(exps)

    def bounded_monotone_density(self):
        if not self.is_continuous:
            raise SpecError("mixture with atoms: density condition inapplicable")
        return all(c.bounded_monotone_density() for c in self.components)

    def to_dict(self):
        return {"kind": self.kind, "weights": list(self.weights),
                "components": [c.to_dict() for c in self.components]}


_KINDS: dict[str, tuple[type, tuple[str, ...]]] = {
    "discrete": (Discrete, ("atoms",)),
    "normal": (Normal, ("mean", "stddev")),
    "cauchy": (Cauchy, ("location", "scale")),
    "uniform": (Uniform, ("a", "b")),
    "pareto": (Pareto, ("shape", "scale")),
    "power_singularity": (PowerSingularity, ("center", "exponent", "halfwidth")),
    "mixture": (Mixture, ("weights", "components")),
}


def from_dict(data: dict, *, _nested: bool = False) -> Distribution:
    """Build a law from its JSON shape ``{"kind": ..., params...}``."""
    if not isinstance(data, dict) or "kind" not in data:
        raise SpecError("distribution spec must be an object with a 'kind' field")
    kind = data["kind"]
    if kind not in _KINDS:
        raise SpecError(f"unknown distribution kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls, names = _KINDS[kind]
    extra = set(data) - set(names) - {"kind"}
    if extra:
        raise SpecError(f"{kind}: unexpected field(s) {sorted(extra)}")
    missing = [k for k in names if k not in data]
    if missing:
        raise SpecError(f"{kind}: missing field(s) {missing}")
    if kind == "mixture":
        if _nested:
            raise SpecError("mixture components may not themselves be mixtures")
        comps = data["components"]
        if not isinstance(comps, list):
            raise SpecError("mixture: 'components' must be a list")
        return Mixture(tuple(data["weights"]),
                       tuple(from_dict(c, _nested=True) for c in comps))
    if kind == "discrete":
        atoms = data["atoms"]
        if not isinstance(atoms, list) or any(not isinstance(a, (list, tuple)) or len(a) != 2
                                              for a in atoms):
            raise SpecError("discrete: 'atoms' must be a list of [point, probability] pairs")
        return Discrete(atoms)
    return cls(**{k: data[k] for k in names})


def sample(dist: Distribution, count: int, seed: int) -> np.ndarray:
    """``count`` i.i.d. draws; identical arguments give bit-identical output."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return dist.draw(np.random.default_rng(seed), count)


# ---------------------------------------------------------------------------
# Concentration functions
# ---------------------------------------------------------------------------

def _golden_max(f, a: float, b: float, tol: float, max_iter: int = 200):
    """Golden-section search for a maximum of ``f`` on [a, b]."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(max_iter):
        if abs(b - a) <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def _refine_peaks(g, xs: np.ndarray, vals: np.ndarray, tol: float, starts: int = 8,
                  log: bool = False) -> float:
    best = float(vals.max()) if len(vals) else 0.0
    order = np.argsort(vals, kind="stable")[::-1][:starts]
    for i in order:
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, len(xs) - 1)]
        if hi <= lo:
            continue
        if log:
            mid = xs[i]
            _, val = _golden_max(lambda u: float(g(np.exp(u))), math.log(lo), math.log(hi),
                                 tol / max(mid, 1e-300))
        else:
            _, val = _golden_max(lambda x: float(g(x)), lo, hi, tol)
        best = max(best, val)
    return best


def _discrete_Q(points: np.ndarray, probs: np.ndarray, h: float) -> float:
    best = 0.0
    for i in range(len(points)):
        j = np.searchsorted(points[i:] - points[i], 2.0 * h, side="right")
        best = max(best, math.fsum(probs[i:i + j]))
    return best


def concentration_Q(dist: Distribution, h: float) -> float:
    """Lévy concentration Q(h) = sup_x P(|X - x| <= h)."""
    h = float(h)
    if not h >= 0:
        raise ValueError(f"h must be >= 0, got {h}")
    if isinstance(dist, Discrete):
        return _discrete_Q(dist.points, dist.probs, h)
    if isinstance(dist, Normal):
        return float(special.erf(h / (dist.stddev * math.sqrt(2.0))))
    if isinstance(dist, Cauchy):
        return 2.0 / math.pi * math.atan(h / dist.scale)
    if isinstance(dist, Uniform):
        return min(1.0, 2.0 * h / (dist.b - dist.a))
    if isinstance(dist, Pareto):
        return float(dist.cdf(dist.scale + 2.0 * h))
    if isinstance(dist, PowerSingularity):
        return min(1.0, (h / dist.halfwidth) ** dist.exponent)
    if isinstance(dist, Mixture):
        return _mixture_Q(dist, h)
    raise TypeError(f"unsupported distribution {dist!r}")


def _mixture_Q(dist: Mixture, h: float) -> float:
    def g(x):
        x = np.asarray(x, dtype=float)
        return dist.prob(x - h, x + h, closed=True)

    atom_pts = [a for a, _ in dist.atoms()]
    cands = [a + s for a in atom_pts for s in (-h, 0.0, h)]
    cands += [x + s for x in dist.landmarks() for s in (-h, 0.0, h)]
    best = float(np.max(g(np.array(cands)))) if cands else 0.0
    if not dist.has_continuous_part:
        return best
    qs = []
    for comp in dist.components:
        if comp.has_continuous_part:
            qs += [float(comp.ppf(1e-9)), float(comp.ppf(1.0 - 1e-9))]
    lo, hi = min(qs + cands) - h, max(qs + cands) + h
    xs = np.union1d(np.linspace(lo, hi, 4097), cands)
    vals = np.asarray(g(xs))
    return max(best, _refine_peaks(g, xs, vals, GOLDEN_TOL))


def _relative_window(x, h):
    x = np.asarray(x, dtype=float)
    a, b = x * (1.0 - h), x * (1.0 + h)
    return np.minimum(a, b), np.maximum(a, b)


def _discrete_q(points: np.ndarray, probs: np.ndarray, h: float) -> float:
    # Atom a (a > 0) is covered at x > 0 iff a/(1+h) <= x <= a/(1-h); the best
    # stabbing point of these intervals is a left endpoint x = a_j/(1+h).
    best = 0.0
    for sign in (1.0, -1.0):
        sel = sign * points > 0
        a, p = sign * points[sel], probs[sel]
        for j in range(len(a)):
            cover = (a <= a[j]) & (a[j] * (1.0 - h) <= a * (1.0 + h))
            best = max(best, math.fsum(p[cover]))
    return best


def concentration_q(dist: Distribution, h: float) -> float:
    """Scaled concentration q(h) = sup_{x≠0} P(|X - x| <= |x| h), 0 <= h < 1.

    Exact for finite discrete laws.  Otherwise a certified lower bound from
    a log-spaced multi-start search refined by golden section to 1e-10 in x.
    """
    h = float(h)
    if not 0.0 <= h < 1.0:
        raise ValueError(f"h must lie in [0, 1), got {h}")
    if isinstance(dist, Discrete):
        return _discrete_q(dist.points, dist.probs, h)
    atoms = [(a, p) for a, p in dist.atoms() if a != 0.0]
    if h == 0.0:
        return max((p for _, p in atoms), default=0.0)

    def g(x):
        lo, hi = _relative_window(x, h)
        return dist.prob(lo, hi, closed=True)

    best = 0.0
    for sign in (1.0, -1.0):
        extra = [abs(x) for x in dist.landmarks() if sign * x > 0]
        extra += [abs(a) / (1.0 + h) for a, _ in atoms if sign * a > 0]
        extra += [abs(a) / (1.0 - h) for a, _ in atoms if sign * a > 0]
        xs = np.union1d(Q_GRID, extra)
        vals = np.asarray(g(sign * xs))
        if vals.max() <= 0.0:
            continue
        best = max(best, _refine_peaks(lambda x: g(sign * x), xs, vals, GOLDEN_TOL, log=True))
    return best


class PowerFit(NamedTuple):
    slope: float
    intercept: float
    residual_norm: float
    stderr: float


def fit_lambda(h: Sequence[float], v: Sequence[float]) -> PowerFit:
    """Least-squares slope of log v against log h."""
    h = np.asarray(h, dtype=float)
    v = np.asarray(v, dtype=float)
    if h.shape != v.shape or h.size < 4:
        raise ValueError("need at least 4 matching (h, v) points")
    if np.any((h <= 0) | (h >= 1)):
        raise ValueError("all h must lie in (0, 1)")
    if np.any(v <= 0):
        raise ValueError("exponent undefined: nonpositive concentration value")
    x, y = np.log(h), np.log(v)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    rnorm = float(np.linalg.norm(resid))
    dof = x.size - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return PowerFit(float(slope), float(intercept), rnorm, stderr)


DEFAULT_H_GRID = tuple(2.0 ** -k for k in range(3, 11))


@dataclass(frozen=True)
class ConcentrationProfile:
    h_grid: tuple[float, ...]
    q_values: tuple[float, ...]
    Q_values: tuple[float, ...]
    fitted_lambda_Q: float | None
    fitted_lambda_q: float | None
    fit_diagnostics: dict
    exact: bool


def concentration_profile(dist: Distribution,
                          h_grid: Sequence[float] = DEFAULT_H_GRID) -> ConcentrationProfile:
    h_grid = tuple(float(h) for h in h_grid)
    qv = tuple(concentration_q(dist, h) for h in h_grid)
    Qv = tuple(concentration_Q(dist, h) for h in h_grid)
    diag: dict = {}
    lam = {}
    for name, vals in (("q", qv), ("Q", Qv)):
        try:
            fit = fit_lambda(h_grid, vals)
        except ValueError as exc:
            lam[name] = None
            diag[name] = {"error": str(exc)}
        else:
            lam[name] = fit.slope
            diag[name] = {"residual_norm": fit.residual_norm, "stderr": fit.stderr}
    return ConcentrationProfile(h_grid, qv, Qv, lam["Q"], lam["q"], diag,
                                exact=isinstance(dist, Discrete))


def check_prop4(dist: Distribution) -> bool:
    """Bounded density, monotone in both tails beyond some N (gives q(h) = O(h))."""
    if not dist.is_continuous:
        raise SpecError(f"{dist.kind}: condition inapplicable to laws with atoms")
    return dist.bounded_monotone_density()
