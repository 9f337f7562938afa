"""Univariate and joint predictive distributions.

Marginals expose the density / CDF / quantile / sampling surface used by the
loss and solver layers.  Everything here is immutable after construction;
sampling always takes an explicit seed.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, special, stats
from scipy.linalg.lapack import dpstrf

from .exceptions import (
    DecompositionError,
    DomainError,
    NonIntegrableError,
    UndefinedMomentError,
)

__all__ = [
    "Marginal",
    "Normal",
    "Lognormal",
    "Exponential",
    "LogT",
    "ZeroInflated",
    "Empirical",
    "Truncated",
    "SizeWeighted",
    "size_weighted",
    "quantile",
    "logt_pdf",
    "covariance_sqrt",
    "standard_normal_blocks",
    "MultivariateNormal",
    "MultivariateLognormal",
    "EmpiricalJoint",
    "sample",
    "marginal_from_spec",
    "joint_from_spec",
    "read_samples_csv",
    "write_samples_csv",
]

# Block length for seeded sampling.  Fixed so that results never depend on
# how many workers draw the blocks.
BLOCK_SIZE = 1 << 16

_QUAD_RTOL = 1e-8


def _as_float_array(x):
    return np.asarray(x, dtype=float)


class Marginal:
    """A univariate predictive law.

    Subclasses provide ``cdf``, ``pdf``, ``ppf`` and ``support``; the generic
    moment and partial-expectation routines fall back to quadrature.
    """

    #: finite first and second moments exist
    has_moments = True
    #: no usable density (atoms only)
    is_discrete = False
    support = (-math.inf, math.inf)

    def cdf(self, y):
        raise NotImplementedError

    def pdf(self, y):
        raise NotImplementedError

    def ppf(self, u):
        """Quantile function without argument checking."""
        raise NotImplementedError

    def quantile(self, u):
        """Left-continuous generalized inverse of the CDF, ``u`` in (0, 1)."""
        u_arr = _as_float_array(u)
        if np.any(~((u_arr > 0) & (u_arr < 1))):
            raise DomainError(f"quantile level must lie in (0, 1), got {u!r}")
        return self.ppf(u)

    def isf(self, t):
        """Quantile at level 1 - t, accurate for small ``t`` where available."""
        return self.ppf(1 - _as_float_array(t))

    def ppf_closed(self, u):
        """Quantile on the closed interval [0, 1]; ends map to the support limits."""
        u_arr = np.atleast_1d(_as_float_array(u))
        out = np.empty_like(u_arr)
        lo = u_arr <= 0
        hi = u_arr >= 1
        mid = ~(lo | hi)
        out[lo] = self.support[0]
        out[hi] = self.support[1]
        if np.any(mid):
            out[mid] = self.ppf(u_arr[mid])
        return out if np.ndim(u) else float(out[0])

    def median(self):
        return float(self.ppf(0.5))

    def _require_moments(self):
        if not self.has_moments:
            raise UndefinedMomentError(f"{type(self).__name__} has no finite moments")

    def mean(self):
        self._require_moments()
        return float(self.partial_expectation(self.support[1]))

    def var(self):
        self._require_moments()
        mu = self.mean()
        lo, hi = self.support
        val, _ = integrate.quad(lambda y: (y - mu) ** 2 * self.pdf(y), lo, hi, epsrel=_QUAD_RTOL)
        return float(val)

    def partial_expectation(self, f):
        """E[y; y <= f]."""
        self._require_moments()
        lo = self.support[0]
        if f <= lo:
            return 0.0
        val, _ = integrate.quad(lambda y: y * self.pdf(y), lo, f, epsrel=_QUAD_RTOL, limit=200)
        return float(val)

    def sample(self, size, seed=None):
        rng = np.random.default_rng(seed)
        return self.ppf(rng.uniform(size=size))

    def to_spec(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(Marginal):
    m: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError("variance must be positive")

    @property
    def _dist(self):
        return stats.norm(loc=self.m, scale=math.sqrt(self.v))

    def cdf(self, y):
        return self._dist.cdf(y)

    def pdf(self, y):
        return self._dist.pdf(y)

    def ppf(self, u):
        return self._dist.ppf(u)

    def isf(self, t):
        return self._dist.isf(t)

    def mean(self):
        return float(self.m)

    def var(self):
        return float(self.v)

    def partial_expectation(self, f):
        if f == -math.inf:
            return 0.0
        if f == math.inf:
            return float(self.m)
        s = math.sqrt(self.v)
        z = (f - self.m) / s
        return float(self.m * stats.norm.cdf(z) - s * stats.norm.pdf(z))

    def sample(self, size, seed=None):
        return np.random.default_rng(seed).normal(self.m, math.sqrt(self.v), size=size)

    def to_spec(self):
        return {"kind": "normal", "m": self.m, "v": self.v}


@dataclass(frozen=True)
class Lognormal(Marginal):
    """exp(x) for x ~ N(m, v)."""

    m: float
    v: float
    support = (0.0, math.inf)

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError("log-scale variance must be positive")

    @property
    def _dist(self):
        return stats.lognorm(s=math.sqrt(self.v), scale=math.exp(self.m))

    def cdf(self, y):
        return self._dist.cdf(y)

    def pdf(self, y):
        return self._dist.pdf(y)

    def ppf(self, u):
        return np.exp(self.m + math.sqrt(self.v) * special.ndtri(u))

    def isf(self, t):
        return np.exp(self.m - math.sqrt(self.v) * special.ndtri(t))

    def mode(self):
        return math.exp(self.m - self.v)

    def median(self):
        return math.exp(self.m)

    def mean(self):
        return math.exp(self.m + self.v / 2)

    def var(self):
        return (math.exp(self.v) - 1) * math.exp(2 * self.m + self.v)

    def partial_expectation(self, f):
        if f <= 0:
            return 0.0
        if f == math.inf:
            return self.mean()
        s = math.sqrt(self.v)
        return float(self.mean() * special.ndtr((math.log(f) - self.m - self.v) / s))

    def sample(self, size, seed=None):
        return np.random.default_rng(seed).lognormal(self.m, math.sqrt(self.v), size=size)

    def to_spec(self):
        return {"kind": "lognormal", "m": self.m, "v": self.v}


@dataclass(frozen=True)
class Exponential(Marginal):
    rate: float
    support = (0.0, math.inf)

    def __post_init__(self):
        if not self.rate > 0:
            raise DomainError("rate must be positive")

    @classmethod
    def from_mean(cls, mean):
        return cls(1.0 / mean)

    def cdf(self, y):
        y = _as_float_array(y)
        return np.where(y > 0, -np.expm1(-self.rate * np.maximum(y, 0)), 0.0)

    def pdf(self, y):
        y = _as_float_array(y)
        return np.where(y >= 0, self.rate * np.exp(-self.rate * np.maximum(y, 0)), 0.0)

    def ppf(self, u):
        return -np.log1p(-_as_float_array(u)) / self.rate

    def isf(self, t):
        return -np.log(_as_float_array(t)) / self.rate

    def mean(self):
        return 1.0 / self.rate

    def var(self):
        return 1.0 / self.rate**2

    def partial_expectation(self, f):
        if f <= 0:
            return 0.0
        if f == math.inf:
            return self.mean()
        x = self.rate * f
        return float(-(math.expm1(-x) + x * math.exp(-x)) / self.rate)

    def to_spec(self):
        return {"kind": "exponential", "rate": self.rate}


def logt_pdf(k, m, v, y):
    """Density of exp(x) for x ~ T_k(m, v) evaluated at ``y > 0``."""
    y_arr = _as_float_array(y)
    if np.any(y_arr <= 0):
        raise DomainError("log-T density is defined for y > 0 only")
    s = math.sqrt(v)
    return stats.t.pdf((np.log(y_arr) - m) / s, k) / (s * y_arr)


@dataclass(frozen=True)
class LogT(Marginal):
    """exp(x) for x ~ T_k(m, v).  Quantiles exist; no moment of any order does."""

    k: float
    m: float
    v: float
    has_moments = False
    support = (0.0, math.inf)

    def __post_init__(self):
        if not (self.k > 0 and self.v > 0):
            raise DomainError("degrees of freedom and scale must be positive")

    def cdf(self, y):
        y = _as_float_array(y)
        with np.errstate(divide="ignore"):
            z = (np.log(np.maximum(y, 0)) - self.m) / math.sqrt(self.v)
        return np.where(y > 0, stats.t.cdf(z, self.k), 0.0)

    def pdf(self, y):
        y = _as_float_array(y)
        safe = np.where(y > 0, y, 1.0)
        return np.where(y > 0, logt_pdf(self.k, self.m, self.v, safe), 0.0)

    def ppf(self, u):
        return np.exp(self.m + math.sqrt(self.v) * stats.t.ppf(u, self.k))

    def isf(self, t):
        with np.errstate(over="ignore"):
            return np.exp(self.m + math.sqrt(self.v) * stats.t.isf(t, self.k))

    def median(self):
        return math.exp(self.m)

    def sample(self, size, seed=None):
        rng = np.random.default_rng(seed)
        return np.exp(self.m + math.sqrt(self.v) * rng.standard_t(self.k, size=size))

    def to_spec(self):
        return {"kind": "logt", "k": self.k, "m": self.m, "v": self.v}


@dataclass(frozen=True)
class Truncated(Marginal):
    """A continuous marginal restricted and renormalized to ``[lower, upper]``."""

    base: Marginal
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise DomainError("truncation interval is empty")
        if not self._mass > 0:
            raise DomainError("truncation interval carries no probability")

    @property
    def _cdf_lo(self):
        return float(self.base.cdf(self.lower))

    @property
    def _mass(self):
        return float(self.base.cdf(self.upper)) - self._cdf_lo

    @property
    def support(self):
        return (max(self.lower, self.base.support[0]), min(self.upper, self.base.support[1]))

    @property
    def has_moments(self):
        return self.base.has_moments or all(map(math.isfinite, self.support))

    def cdf(self, y):
        y = _as_float_array(y)
        c = (self.base.cdf(np.clip(y, self.lower, self.upper)) - self._cdf_lo) / self._mass
        return np.clip(c, 0.0, 1.0)

    def pdf(self, y):
        y = _as_float_array(y)
        inside = (y >= self.lower) & (y <= self.upper)
        return np.where(inside, self.base.pdf(np.clip(y, *self.support)) / self._mass, 0.0)

    def ppf(self, u):
        return self.base.ppf(self._cdf_lo + _as_float_array(u) * self._mass)

    def to_spec(self):
        return {"kind": "truncated", "base": self.base.to_spec(), "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True, eq=False)
class Empirical(Marginal):
    """Weighted atoms.  Values are kept sorted with ties in original order."""

    values: np.ndarray
    weights: np.ndarray = None
    is_discrete = True

    def __post_init__(self):
        vals = np.ravel(_as_float_array(self.values))
        if vals.size == 0:
            raise DomainError("empirical distribution needs at least one value")
        w = np.ones_like(vals) if self.weights is None else np.ravel(_as_float_array(self.weights))
        if w.shape != vals.shape:
            raise DomainError("weights and values differ in length")
        if np.any(w < 0) or not w.sum() > 0:
            raise DomainError("weights must be non-negative with positive sum")
        order = np.argsort(vals, kind="stable")
        vals, w = vals[order], w[order] / w.sum()
        cum = np.cumsum(w)
        cum[-1] = 1.0
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_cum", cum)

    @property
    def support(self):
        return (float(self.values[0]), float(self.values[-1]))

    def cdf(self, y):
        idx = np.searchsorted(self.values, _as_float_array(y), side="right")
        cum = np.concatenate(([0.0], self._cum))
        return cum[idx]

    def pdf(self, y):
        raise NotImplementedError("empirical distributions have no density")

    def ppf(self, u):
        # smallest atom whose cumulative weight reaches u
        idx = np.searchsorted(self._cum, _as_float_array(u) - 1e-12, side="left")
        return self.values[np.minimum(idx, self.values.size - 1)]

    def mean(self):
        return float(self.weights @ self.values)

    def var(self):
        return float(self.weights @ (self.values - self.mean()) ** 2)

    def partial_expectation(self, f):
        below = self.values <= f
        return float(self.weights[below] @ self.values[below])

    def sample(self, size, seed=None):
        rng = np.random.default_rng(seed)
        return rng.choice(self.values, size=size, p=self.weights)

    def to_spec(self):
        return {"kind": "empirical", "values": self.values.tolist(), "weights": self.weights.tolist()}


@dataclass(frozen=True)
class ZeroInflated(Marginal):
    """Point mass ``pi0`` at zero mixed with a law on y > 0."""

    pi0: float
    positive: Marginal

    def __post_init__(self):
        if not 0 <= self.pi0 < 1:
            raise DomainError("pi0 must lie in [0, 1)")
        if self.positive.support[0] < 0:
            raise DomainError("positive part must be supported on y > 0")

    @property
    def support(self):
        return (0.0, self.positive.support[1])

    @property
    def has_moments(self):
        return self.positive.has_moments

    @property
    def is_discrete(self):
        return self.positive.is_discrete

    def cdf(self, y):
        y = _as_float_array(y)
        return np.where(y >= 0, self.pi0 + (1 - self.pi0) * self.positive.cdf(np.maximum(y, 0)), 0.0)

    def pdf(self, y):
        """Density of the continuous part, (1 - pi0) * p+(y)."""
        return (1 - self.pi0) * self.positive.pdf(y)

    def ppf(self, u):
        u = _as_float_array(u)
        pos_u = np.clip((u - self.pi0) / (1 - self.pi0), 0.0, 1.0)
        pos = self.positive.ppf_closed(np.atleast_1d(pos_u))
        out = np.where(np.atleast_1d(u) <= self.pi0, 0.0, pos)
        return out if np.ndim(u) else float(out[0])

    def isf(self, t):
        t = _as_float_array(t)
        if np.all(t < 1 - self.pi0):
            return self.positive.isf(t / (1 - self.pi0))
        return self.ppf(1 - t)

    def mean(self):
        return (1 - self.pi0) * self.positive.mean()

    def var(self):
        m_pos = self.positive.mean()
        second = (1 - self.pi0) * (self.positive.var() + m_pos**2)
        return second - self.mean() ** 2

    def partial_expectation(self, f):
        if f < 0:
            return 0.0
        return (1 - self.pi0) * self.positive.partial_expectation(f)

    def sample(self, size, seed=None):
        rng = np.random.default_rng(seed)
        zero = rng.uniform(size=size) < self.pi0
        pos = self.positive.sample(size, rng)
        return np.where(zero, 0.0, pos)

    def to_spec(self):
        return {"kind": "zero_inflated", "pi0": self.pi0, "positive": self.positive.to_spec()}


@dataclass(frozen=True, eq=False)
class SizeWeighted(Marginal):
    """Distribution G with density k * p(y) / y over y > 0.

    ``dist`` holds a closed form of G when one is known (lognormal base,
    weighted atoms); otherwise CDF and quantiles come from quadrature.
    """

    base: Marginal
    normalizer: float
    dist: Marginal = None

    @property
    def support(self):
        return self.dist.support if self.dist is not None else self.base.support

    @property
    def is_discrete(self):
        return self.base.is_discrete

    @property
    def has_moments(self):
        return self.base.has_moments

    def pdf(self, y):
        if self.dist is not None:
            return self.dist.pdf(y)
        y = _as_float_array(y)
        safe = np.where(y > 0, y, 1.0)
        return np.where(y > 0, self.normalizer * self.base.pdf(safe) / safe, 0.0)

    def _cdf_scalar(self, y):
        lo, hi = self.support
        if y <= lo:
            return 0.0
        if y >= hi:
            return 1.0
        val, _ = integrate.quad(lambda t: self.normalizer * self.base.pdf(t) / t, lo, y,
                                epsrel=_QUAD_RTOL, limit=200)
        return min(max(val, 0.0), 1.0)

    def cdf(self, y):
        if self.dist is not None:
            return self.dist.cdf(y)
        y = _as_float_array(y)
        return np.vectorize(self._cdf_scalar, otypes=[float])(y) if y.ndim else self._cdf_scalar(float(y))

    def _ppf_scalar(self, u):
        lo, hi = self.support
        # bracket in the base's quantile scale, the two laws share support
        a = lo if math.isfinite(lo) else float(self.base.ppf(1e-14))
        b = hi if math.isfinite(hi) else float(self.base.ppf(1 - 1e-14))
        a = max(a, 1e-300)
        return optimize.brentq(lambda y: self._cdf_scalar(y) - u, a, b, xtol=1e-14, rtol=1e-12)

    def ppf(self, u):
        if self.dist is not None:
            return self.dist.ppf(u)
        u = _as_float_array(u)
        if u.ndim:
            return np.array([self._ppf_scalar(x) for x in u])
        return self._ppf_scalar(float(u))

    def isf(self, t):
        if self.dist is not None:
            return self.dist.isf(t)
        return super().isf(t)

    def partial_expectation(self, f):
        if self.dist is not None:
            return self.dist.partial_expectation(f)
        return super().partial_expectation(f)

    def mean(self):
        if self.dist is not None:
            return self.dist.mean()
        return super().mean()

    def sample(self, size, seed=None):
        if self.dist is not None:
            return self.dist.sample(size, seed)
        return super().sample(size, seed)


def size_weighted(d: Marginal) -> SizeWeighted:
    """Return the size-weighted law G (density proportional to p(y)/y).

    Raises NonIntegrableError when E[1/y] is infinite: log-T and exponential
    margins, atoms at zero, and anything with mass on y <= 0.
    """
    if isinstance(d, Lognormal):
        return SizeWeighted(d, math.exp(d.m - d.v / 2), Lognormal(d.m - d.v, d.v))
    if isinstance(d, Empirical):
        if np.any(d.values <= 0):
            raise NonIntegrableError("empirical values must be strictly positive for 1/y weighting")
        raw = d.weights / d.values
        total = raw.sum()
        return SizeWeighted(d, float(1.0 / total), Empirical(d.values, raw / total))
    if isinstance(d, (LogT, Exponential)):
        raise NonIntegrableError(f"p(y)/y is not integrable near zero for {type(d).__name__}")
    if isinstance(d, ZeroInflated):
        raise NonIntegrableError("point mass at zero; size-weight the positive part instead")
    lo, hi = d.support
    if lo < 0:
        raise NonIntegrableError("size weighting requires support on y > 0")
    inv_mean, _ = integrate.quad(lambda y: d.pdf(y) / y, lo, hi, epsrel=_QUAD_RTOL, limit=200)
    if not (math.isfinite(inv_mean) and inv_mean > 0):
        raise NonIntegrableError("p(y)/y does not integrate to a finite value")
    return SizeWeighted(d, 1.0 / inv_mean)


def quantile(d: Marginal, u):
    return d.quantile(u)


# ---------------------------------------------------------------------------
# joint laws


def covariance_sqrt(V):
    """Matrix S with S @ S.T == V.

    Lower Cholesky when V is positive definite; pivoted Cholesky for PSD but
    singular V (conditioning on a total produces those).
    """
    V = _as_float_array(V)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise DecompositionError("covariance must be a square matrix")
    if not np.allclose(V, V.T, rtol=1e-10, atol=1e-12):
        raise DecompositionError("covariance must be symmetric")
    try:
        return np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        pass
    scale = max(1.0, float(np.max(np.abs(V))))
    if np.linalg.eigvalsh(V)[0] < -1e-10 * scale:
        raise DecompositionError("covariance is not positive semi-definite")
    c, piv, rank, info = dpstrf(V, lower=1, tol=-1.0)
    if info < 0:
        raise DecompositionError(f"pivoted Cholesky failed (info={info})")
    L = np.tril(c)
    L[:, rank:] = 0.0
    S = np.zeros_like(L)
    S[piv - 1] = L
    return S


def _seed_int(seed):
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**63))
    return seed


def standard_normal_blocks(count, dim, seed=None, n_jobs=None):
    """Draw a ``count x dim`` standard normal matrix in fixed-size blocks.

    Block ``b`` uses its own stream derived from ``(seed, b)``, so the result is
    the same whether blocks are drawn sequentially or by ``n_jobs`` threads.
    """
    seed = _seed_int(seed)
    root = np.random.SeedSequence(seed)
    n_blocks = -(-count // BLOCK_SIZE)
    out = np.empty((count, dim))

    def fill(b):
        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(b,)))
        start = b * BLOCK_SIZE
        stop = min(count, start + BLOCK_SIZE)
        out[start:stop] = rng.standard_normal((stop - start, dim))

    if n_jobs and n_jobs > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(fill, range(n_blocks)))
    else:
        for b in range(n_blocks):
            fill(b)
    return out


@dataclass(frozen=True, eq=False)
class MultivariateNormal:
    mean: np.ndarray
    cov: np.ndarray
    names: tuple = None

    def __post_init__(self):
        m = np.ravel(_as_float_array(self.mean))
        V = _as_float_array(self.cov)
        if V.shape != (m.size, m.size):
            raise DomainError(f"covariance shape {V.shape} does not match mean length {m.size}")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", V)
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self):
        return self.mean.size

    def _margin(self, m, v):
        return Normal(m, v)

    def margins(self):
        return [self._margin(float(m), float(v)) for m, v in zip(self.mean, np.diag(self.cov))]

    def with_independence(self):
        """Same location and scales, all dependencies removed."""
        return type(self)(self.mean, np.diag(np.diag(self.cov)), self.names)

    def _transform(self, x):
        return x

    def sample(self, count, seed=None, n_jobs=None):
        S = covariance_sqrt(self.cov)
        z = standard_normal_blocks(count, self.dim, seed, n_jobs)
        return self._transform(self.mean + z @ S.T)

    def logpdf(self, x):
        return stats.multivariate_normal(self.mean, self.cov, allow_singular=True).logpdf(x)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def to_spec(self):
        spec = {"kind": "mv_normal", "m": self.mean.tolist(), "V": self.cov.tolist()}
        if self.names:
            spec["names"] = list(self.names)
        return spec


class MultivariateLognormal(MultivariateNormal):
    """exp(x) for x ~ N(mean, cov); ``mean``/``cov`` are on the log scale."""

    def _margin(self, m, v):
        return Lognormal(m, v)

    def _transform(self, x):
        return np.exp(x)

    def logpdf(self, y):
        y = _as_float_array(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            logy = np.log(y)
            out = super().logpdf(logy) - logy.sum(axis=-1)
        return np.where(np.all(y > 0, axis=-1), out, -np.inf)

    def to_spec(self):
        spec = super().to_spec()
        spec["kind"] = "mv_lognormal"
        return spec


@dataclass(frozen=True, eq=False)
class EmpiricalJoint:
    """A Monte Carlo sample matrix (rows are draws of the outcome vector)."""

    samples: np.ndarray
    weights: np.ndarray = None
    names: tuple = None

    def __post_init__(self):
        Y = _as_float_array(self.samples)
        if Y.ndim != 2 or Y.shape[0] == 0:
            raise DomainError("samples must be a non-empty N x n matrix")
        w = np.ones(Y.shape[0]) if self.weights is None else np.ravel(_as_float_array(self.weights))
        if w.shape[0] != Y.shape[0] or np.any(w < 0) or not w.sum() > 0:
            raise DomainError("weights must be non-negative, one per sample, with positive sum")
        object.__setattr__(self, "samples", Y)
        object.__setattr__(self, "weights", w / w.sum())
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self):
        return self.samples.shape[1]

    def margins(self):
        return [Empirical(self.samples[:, i], self.weights) for i in range(self.dim)]

    def sample(self, count, seed=None, n_jobs=None):
        rng = np.random.default_rng(_seed_int(seed))
        idx = rng.choice(self.samples.shape[0], size=count, p=self.weights)
        return self.samples[idx]

    def to_spec(self):
        spec = {"kind": "empirical_joint", "samples": self.samples.tolist(), "weights": self.weights.tolist()}
        if self.names:
            spec["names"] = list(self.names)
        return spec


def sample(joint, count, seed=None, n_jobs=None):
    if count < 1:
        raise DomainError("sample count must be positive")
    return joint.sample(count, seed, n_jobs)


# ---------------------------------------------------------------------------
# serialization


def read_samples_csv(path):
    """Read a sample CSV: header of series names, optional final ``weight`` column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty sample file")
    header = [h.strip() for h in rows[0]]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise DomainError(f"{path}: no sample rows")
    if header[-1].lower() == "weight":
        return header[:-1], data[:, :-1], data[:, -1]
    return header, data, None


def write_samples_csv(path, samples, names=None, weights=None):
    samples = np.atleast_2d(samples)
    names = list(names) if names else [f"y{i + 1}" for i in range(samples.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + (["weight"] if weights is not None else []))
        for j, row in enumerate(samples):
            vals = [repr(float(x)) for x in row]
            if weights is not None:
                vals.append(repr(float(weights[j])))
            w.writerow(vals)


def _resolve(path, base_dir):
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


def marginal_from_spec(spec, base_dir=None) -> Marginal:
    kind = str(spec.get("kind", "")).lower()
    if kind == "normal":
        return Normal(float(spec["m"]), float(spec["v"]))
    if kind == "lognormal":
        return Lognormal(float(spec["m"]), float(spec["v"]))
    if kind == "exponential":
        if "mean" in spec:
            return Exponential.from_mean(float(spec["mean"]))
        return Exponential(float(spec["rate"]))
    if kind == "logt":
        return LogT(float(spec["k"]), float(spec["m"]), float(spec["v"]))
    if kind == "truncated":
        return Truncated(marginal_from_spec(spec["base"], base_dir), float(spec["lower"]), float(spec["upper"]))
    if kind == "zero_inflated":
        return ZeroInflated(float(spec["pi0"]), marginal_from_spec(spec["positive"], base_dir))
    if kind == "empirical":
        if "path" in spec:
            names, data, w = read_samples_csv(_resolve(spec["path"], base_dir))
            col = names.index(spec["column"]) if "column" in spec else 0
            return Empirical(data[:, col], w)
        return Empirical(spec["values"], spec.get("weights"))
    raise DomainError(f"unknown marginal kind {spec.get('kind')!r}")


def joint_from_spec(spec, base_dir=None):
    kind = str(spec.get("kind", "")).lower()
    names = spec.get("names")
    if kind in ("mv_lognormal", "lognormal"):
        return MultivariateLognormal(spec["m"], spec["V"], names)
    if kind in ("mv_normal", "normal"):
        return MultivariateNormal(spec["m"], spec["V"], names)
    if kind in ("empirical", "empirical_joint"):
        if "path" in spec:
            header, data, w = read_samples_csv(_resolve(spec["path"], base_dir))
            return EmpiricalJoint(data, w, header)
        return EmpiricalJoint(spec["samples"], spec.get("weights"), names)
    raise DomainError(f"unknown joint kind {spec.get('kind')!r}")
