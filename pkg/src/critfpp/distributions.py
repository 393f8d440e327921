"""Degree laws, size-biasing and edge-weight families.

An edge weight is zero with probability ``atom`` and otherwise drawn from a
strictly positive law ``F_zeta``::

    F(0) = atom,    F(t) = atom + (1 - atom) * F_zeta(t)   for t > 0.

The two near-zero families (``PowerNearZero``, ``ExpStretch``) are
written in terms of the residual mass ``1 - atom``; every law method therefore
accepts a ``mass`` keyword that the other families ignore.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EXACT_TOL = 1e-12

# numba-side law codes, see ``PositiveLaw.kernel_spec``
LAW_POWER, LAW_STRETCH, LAW_DOUBLE_EXP, LAW_EXPONENTIAL, LAW_POINT, LAW_EMPIRICAL = range(6)


class InvalidModelError(ValueError):
    """A degree or weight model violates its declared invariants."""


class DomainError(ValueError):
    """A probability argument lies outside (0, 1)."""


# ---------------------------------------------------------------------------
# degree models
# ---------------------------------------------------------------------------

def derive_size_biased(pmf) -> np.ndarray:
    """Size-biased forward-degree law ``q_k = (k+1) p_{k+1} / mu``.

    ``pmf`` is an array indexed by degree (or a ``DegreeModel``).
    """
    p = pmf.pmf if isinstance(pmf, DegreeModel) else np.asarray(pmf, dtype=float)
    k = np.arange(p.size)
    mu = float(np.dot(k, p))
    if mu <= 0:
        raise InvalidModelError("size-biasing needs a positive mean degree")
    q = (k[1:] * p[1:]) / mu
    if q.size == 0:
        q = np.zeros(1)
    return q


@dataclass(frozen=True, eq=False)
class DegreeModel:
    """Finitely supported degree pmf with its size-biased law.

    ``eta`` and ``tau`` are metadata only: the degree moment exponent and,
    for truncated power laws, the declared tail exponent.
    """

    pmf: np.ndarray
    eta: float | None = None
    tau: float | None = None
    mu: float = field(init=False)
    nu: float = field(init=False)
    p_c: float = field(init=False)
    q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = np.array(self.pmf, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "pmf", p)
        if p.ndim != 1 or p.size == 0:
            raise InvalidModelError("pmf must be a 1-d array indexed by degree")
        if np.any(p < 0):
            raise InvalidModelError("negative probability in degree pmf")
        if abs(p.sum() - 1.0) > EXACT_TOL:
            raise InvalidModelError(f"degree pmf sums to {p.sum()!r}, not 1")
        if p[:2].sum() > 0:
            raise InvalidModelError("P(D >= 2) = 1 is required (p_0 = p_1 = 0)")
        if p.size > 2 and p[2] >= 1.0:
            raise InvalidModelError("P(D = 2) < 1 is required")
        k = np.arange(p.size)
        mu = float(np.dot(k, p))
        nu = float(np.dot(k * (k - 1), p) / mu)
        if not nu > 1.0:
            raise InvalidModelError(f"nu = {nu} must exceed 1")
        q = derive_size_biased(p)
        q.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "p_c", 1.0 / nu)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]], **meta) -> "DegreeModel":
        """Build from ``(k, p_k)`` pairs, as written in run configs."""
        pairs = [(int(k), float(pk)) for k, pk in pairs]
        if not pairs:
            raise InvalidModelError("empty degree pmf")
        kmax = max(k for k, _ in pairs)
        p = np.zeros(kmax + 1)
        for k, pk in pairs:
            if k < 0:
                raise InvalidModelError("negative degree")
            p[k] += pk
        return cls(p, **meta)

    @classmethod
    def regular(cls, r: int) -> "DegreeModel":
        p = np.zeros(r + 1)
        p[r] = 1.0
        return cls(p)

    @classmethod
    def truncated_power_law(cls, tau: float, kmin: int = 2, kmax: int = 1000) -> "DegreeModel":
        """``p_k`` proportional to ``k^{-tau}`` on ``[kmin, kmax]``."""
        k = np.arange(kmax + 1, dtype=float)
        p = np.zeros(kmax + 1)
        p[kmin:] = k[kmin:] ** (-tau)
        p /= p.sum()
        return cls(p, tau=tau)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(k), float(pk)) for k, pk in enumerate(self.pmf) if pk > 0]

    def require_tail_exponent(self, minimum: float) -> None:
        """Experiments needing ``tau > minimum`` call this; bounded pmfs pass."""
        if self.tau is not None and self.tau < minimum:
            raise InvalidModelError(f"declared tau = {self.tau} below required {minimum}")


# ---------------------------------------------------------------------------
# positive weight laws
# ---------------------------------------------------------------------------

def _as_prob(y):
    y = np.asarray(y, dtype=float)
    if np.any(~((y > 0) & (y < 1))):
        raise DomainError("quantile argument must lie in (0, 1)")
    return y


class PositiveLaw:
    """Law of a strictly positive weight. Subclasses are frozen dataclasses."""

    atomic = False  # True when the law has atoms (ties have positive probability)

    def cdf(self, t, mass: float = 1.0):
        raise NotImplementedError

    def quantile(self, y, mass: float = 1.0):
        """Generalized (left-continuous) inverse of ``cdf`` on (0, 1)."""
        raise NotImplementedError

    def quantile_neglog(self, u, mass: float = 1.0):
        """``quantile(exp(-u))``, stable for ``u`` far beyond float underflow."""
        u = np.asarray(u, dtype=float)
        y = np.exp(-u)
        if np.any(y <= 0):
            raise FloatingPointError("exp(-u) underflows; no log-domain quantile for this law")
        return self.quantile(y, mass)

    def upper_atom(self, mass: float = 1.0) -> tuple[float, float]:
        """``(level, value)``: quantile levels at or above ``level`` all map to ``value``.

        Continuous laws return level 1, i.e. no upper atom.
        """
        return 1.0, math.nan

    def kernel_spec(self, mass: float = 1.0) -> tuple[int, np.ndarray]:
        """``(code, params)`` consumed by the compiled samplers."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class PowerNearZero(PositiveLaw):
    """Positive part of ``F_a``: ``x^a / mass`` on ``[0, mass^{1/a}]``."""

    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise InvalidModelError("PowerNearZero needs a > 0")

    def cap(self, mass=1.0):
        return mass ** (1.0 / self.a)

    def cdf(self, t, mass=1.0):
        t = np.asarray(t, dtype=float)
        with np.errstate(invalid="ignore"):
            v = np.clip(np.where(t > 0, t, 0.0) ** self.a / mass, 0.0, 1.0)
        return v

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return (mass * y) ** (1.0 / self.a)

    def quantile_neglog(self, u, mass=1.0):
        u = np.asarray(u, dtype=float)
        return mass ** (1.0 / self.a) * np.exp(-u / self.a)

    def kernel_spec(self, mass=1.0):
        return LAW_POWER, np.array([self.a, mass])

    def to_config(self):
        return {"family": "power_near_zero", "a": self.a}


@dataclass(frozen=True)
class ExpStretch(PositiveLaw):
    """Positive part of ``G_b``: ``exp(-1/x^b) / mass`` up to where it reaches 1."""

    b: float

    def __post_init__(self):
        if not self.b > 0:
            raise InvalidModelError("ExpStretch needs b > 0")

    def cap(self, mass=1.0):
        if mass >= 1.0:
            return math.inf
        return (-math.log(mass)) ** (-1.0 / self.b)

    def cdf(self, t, mass=1.0):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            v = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0) ** self.b) / mass, 0.0)
        return np.clip(v, 0.0, 1.0)

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return (-np.log(mass * y)) ** (-1.0 / self.b)

    def quantile_neglog(self, u, mass=1.0):
        u = np.asarray(u, dtype=float)
        return (u - math.log(mass)) ** (-1.0 / self.b)

    def kernel_spec(self, mass=1.0):
        return LAW_STRETCH, np.array([self.b, mass])

    def to_config(self):
        return {"family": "exp_stretch", "b": self.b}


@dataclass(frozen=True)
class DoubleExp(PositiveLaw):
    """``H(t) = e * exp(-exp(t^{-gamma}))`` on (0, 1]; the rest of the mass sits at 1."""

    gamma: float
    atomic = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidModelError("DoubleExp needs gamma > 0")

    @property
    def mass_at_one(self) -> float:
        return 1.0 - math.exp(1.0 - math.e)

    def cdf(self, t, mass=1.0):
        t = np.asarray(t, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        with np.errstate(over="ignore"):
            v = np.e * np.exp(-np.exp(safe ** (-self.gamma)))
        return np.where(t >= 1.0, 1.0, np.where(t > 0, v, 0.0))

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return self.quantile_neglog(-np.log(y))

    def quantile_neglog(self, u, mass=1.0):
        u = np.asarray(u, dtype=float)
        # H(1) = exp(1 - e): everything above maps onto the atom at 1
        with np.errstate(divide="ignore"):
            t = np.log1p(u) ** (-1.0 / self.gamma)
        return np.minimum(t, 1.0)

    def upper_atom(self, mass=1.0):
        return math.exp(1.0 - math.e), 1.0

    def kernel_spec(self, mass=1.0):
        return LAW_DOUBLE_EXP, np.array([self.gamma])

    def to_config(self):
        return {"family": "double_exp", "gamma": self.gamma}


@dataclass(frozen=True)
class Exponential(PositiveLaw):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidModelError("Exponential needs rate > 0")

    def cdf(self, t, mass=1.0):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.rate * np.where(t > 0, t, 0.0)), 0.0)

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return -np.log1p(-y) / self.rate

    def quantile_neglog(self, u, mass=1.0):
        u = np.asarray(u, dtype=float)
        return -np.log1p(-np.exp(-u)) / self.rate

    def kernel_spec(self, mass=1.0):
        return LAW_EXPONENTIAL, np.array([self.rate])

    def to_config(self):
        return {"family": "exponential", "rate": self.rate}


@dataclass(frozen=True)
class PointMass(PositiveLaw):
    c: float = 1.0
    atomic = True

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidModelError("PointMass needs c > 0")

    def cdf(self, t, mass=1.0):
        return np.where(np.asarray(t, dtype=float) >= self.c, 1.0, 0.0)

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return np.full_like(y, self.c)

    def quantile_neglog(self, u, mass=1.0):
        return np.full_like(np.asarray(u, dtype=float), self.c)

    def upper_atom(self, mass=1.0):
        return 0.0, self.c

    def kernel_spec(self, mass=1.0):
        return LAW_POINT, np.array([self.c])

    def to_config(self):
        return {"family": "point_mass", "c": self.c}


@dataclass(frozen=True, eq=False)
class Empirical(PositiveLaw):
    """Sorted positive samples; quantile is the linearly interpolated order statistic."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float))
        if s.size < 2 or s[0] <= 0:
            raise InvalidModelError("Empirical needs >= 2 strictly positive samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def _levels(self):
        return np.linspace(0.0, 1.0, self.samples.size)

    def cdf(self, t, mass=1.0):
        return np.interp(np.asarray(t, dtype=float), self.samples, self._levels, left=0.0, right=1.0)

    def quantile(self, y, mass=1.0):
        y = _as_prob(y)
        return np.interp(y, self._levels, self.samples)

    def quantile_neglog(self, u, mass=1.0):
        u = np.asarray(u, dtype=float)
        return np.interp(np.exp(-u), self._levels, self.samples)

    def kernel_spec(self, mass=1.0):
        return LAW_EMPIRICAL, np.asarray(self.samples, dtype=float)

    def to_config(self):
        return {"family": "empirical", "samples": [float(x) for x in self.samples]}


def quantile_by_bisection(cdf, y: float, lo: float = 0.0, hi: float = 1.0, iters: int = 200) -> float:
    """Generalized inverse of a nondecreasing ``cdf`` by bisection.

    ``hi`` is doubled until ``cdf(hi) >= y``. Returns the smallest float ``t``
    (to bisection resolution) with ``cdf(t) >= y``.
    """
    if not 0 < y < 1:
        raise DomainError("quantile argument must lie in (0, 1)")
    while float(cdf(hi)) < y:
        hi *= 2.0
        if hi > 1e300:
            raise FloatingPointError("cdf never reaches the requested level")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(cdf(mid)) >= y:
            hi = mid
        else:
            lo = mid
    return hi


_FAMILIES = {
    "power_near_zero": (PowerNearZero, ("a",)),
    "exp_stretch": (ExpStretch, ("b",)),
    "double_exp": (DoubleExp, ("gamma",)),
    "exponential": (Exponential, ("rate",)),
    "point_mass": (PointMass, ("c",)),
    "empirical": (Empirical, ("samples",)),
}


def positive_law_from_config(family: str, params: dict) -> PositiveLaw:
    try:
        cls, keys = _FAMILIES[family]
    except KeyError:
        raise InvalidModelError(f"unknown weight family {family!r}") from None
    unknown = set(params) - set(keys)
    if unknown:
        raise InvalidModelError(f"unknown parameters for {family}: {sorted(unknown)}")
    return cls(**params)


# ---------------------------------------------------------------------------
# weight model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightModel:
    """Zero atom plus a positive part."""

    atom_at_zero: float
    positive: PositiveLaw

    def __post_init__(self):
        if not 0.0 <= self.atom_at_zero <= 1.0:
            raise InvalidModelError("atom_at_zero must be a probability")

    @classmethod
    def critical(cls, degree: DegreeModel, positive: PositiveLaw) -> "WeightModel":
        return cls(degree.p_c, positive)

    @property
    def mass(self) -> float:
        return 1.0 - self.atom_at_zero

    def check_critical(self, degree: DegreeModel, tol: float = EXACT_TOL) -> None:
        if abs(self.atom_at_zero - degree.p_c) > tol:
            raise InvalidModelError(
                f"atom {self.atom_at_zero} differs from p_c = {degree.p_c}")

    def positive_cdf(self, t):
        return self.positive.cdf(t, mass=self.mass)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t < 0, 0.0, self.atom_at_zero + self.mass * self.positive_cdf(t))

    def quantile_positive(self, y):
        """``F_zeta^{-1}(y)``, nudged up so that ``cdf(q) >= y`` holds in floats.

        Nudges grow geometrically from one ulp, since a flat cdf (small ``a``)
        may need many ulps of ``t`` to move by one ulp.
        """
        y = _as_prob(y)
        t = np.asarray(self.positive.quantile(y, mass=self.mass), dtype=float)
        for k in range(64):
            low = self.positive_cdf(t) < y
            if not np.any(low):
                break
            t = np.where(low, t + np.spacing(t) * 2.0 ** k, t)
        return t if t.ndim else float(t)

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-cdf draws from ``F``: one uniform per weight."""
        v = rng.random(size) + 2.0 ** -54  # strictly inside (0, 1)
        v = np.asarray(v)
        out = np.zeros(v.shape)
        pos = v >= self.atom_at_zero
        if self.mass > 0 and np.any(pos):
            y = (v[pos] - self.atom_at_zero) / self.mass
            y = np.clip(y, 2.0 ** -60, 1.0 - 2.0 ** -53)
            out[pos] = self.positive.quantile(y, mass=self.mass)
        return out if size is not None else float(out)

    def kernel_spec(self):
        code, params = self.positive.kernel_spec(mass=self.mass)
        return code, np.ascontiguousarray(params, dtype=np.float64)


def sample_weight(w: WeightModel, rng: np.random.Generator) -> float:
    return w.sample(rng)


def quantile_positive(w: WeightModel, y):
    return w.quantile_positive(y)
