"""Loss families and their multiplier-indexed componentwise minimizers.

For every additive loss here the minimizer of ``R(f) - lam * 1'f`` separates
over components.  The absolute-error family (AD, APE, ZAPE, WAPE) shares one
shape: component ``i`` is a quantile of some law ``H_i`` at level

    u_i(lam) = (1 + a_i * (lam * c_i - pi_i) / (1 - pi_i)) / 2

where ``H_i`` is the margin itself (AD), its size-weighted version (APE,
ZAPE) or a total-reweighted sample margin (WAPE); ``a_i`` is 1 or the
size-weighting normalizer and ``pi_i`` the zero mass (ZAPE only).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    Empirical,
    EmpiricalJoint,
    Marginal,
    ZeroInflated,
    size_weighted,
)
from .exceptions import (
    DomainError,
    InfeasibleMultiplierError,
    NonIntegrableError,
    PointwiseLossError,
    UndefinedRiskError,
)

__all__ = [
    "LambdaBounds",
    "Loss",
    "SquaredError",
    "AbsoluteDeviation",
    "AbsolutePercentError",
    "ZeroAdjustedAPE",
    "WAPE",
    "loss_from_spec",
    "componentwise_minimizer",
    "lambda_bounds",
    "per_component_risk",
    "risk",
    "wape_minimizer",
]


@dataclass(frozen=True)
class LambdaBounds:
    lower: float
    upper: float
    lower_closed: bool = True
    upper_closed: bool = False

    def contains(self, lam):
        lo_ok = lam >= self.lower if self.lower_closed else lam > self.lower
        hi_ok = lam <= self.upper if self.upper_closed else lam < self.upper
        return bool(lo_ok and hi_ok)

    def __str__(self):
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:.6g}, {self.upper:.6g}{right}"


class _LinearPath:
    """SE minimizer path: f_i = m_i + lam_i * c_i / 2."""

    is_discrete = False

    def __init__(self, means, c):
        self.means = np.asarray(means, dtype=float)
        self.c = c
        self.n = self.means.size
        self.comp_lower = np.full(self.n, -math.inf)
        self.comp_upper = np.full(self.n, math.inf)
        self.bounds = LambdaBounds(-math.inf, math.inf, False, False)
        self.lambda0 = 0.0

    def forecast(self, lam):
        return self.means + np.broadcast_to(lam, self.means.shape) * self.c / 2

    def forecast_closed(self, lam):
        return self.forecast(lam)

    def slope(self, lam, f=None, levels=None):
        return self.c / 2


class _QuantilePath:
    """Quantile-type minimizer path shared by AD, APE, ZAPE and WAPE."""

    def __init__(self, laws, scale, c, pi0=None, zero_floor=False):
        self.laws = list(laws)
        self.n = len(self.laws)
        self.scale = np.asarray(scale, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.pi0 = np.zeros(self.n) if pi0 is None else np.asarray(pi0, dtype=float)
        self.zero_floor = zero_floor
        self.is_discrete = any(h.is_discrete for h in self.laws)
        one_minus = 1 - self.pi0
        # multiplier values where u_i hits 0 and 1
        self.comp_s = (self.pi0 - one_minus / self.scale) / self.c
        self.comp_r = (self.pi0 + one_minus / self.scale) / self.c
        self.comp_upper = self.comp_r
        if zero_floor:
            # below s_i the component is exactly zero, so any lower value is admissible
            self.comp_lower = np.full(self.n, -math.inf)
            self.bounds = LambdaBounds(float(self.comp_s.min()), float(self.comp_r.min()))
        else:
            self.comp_lower = self.comp_s
            self.bounds = LambdaBounds(float(self.comp_s.max()), float(self.comp_r.min()))
        lo, hi = self.bounds.lower, self.bounds.upper
        if not lo < hi:
            raise InfeasibleMultiplierError(f"admissible multiplier interval {self.bounds} is empty")
        self.lambda0 = 0.0 if self.bounds.contains(0.0) else 0.5 * (lo + hi)

    def levels(self, lam):
        lam = np.broadcast_to(np.asarray(lam, dtype=float), (self.n,))
        return 0.5 * (1 + self.scale * (lam * self.c - self.pi0) / (1 - self.pi0))

    def forecast_closed(self, lam):
        """Minimizer with levels clipped to [0, 1] (support limits at the ends)."""
        u = self.levels(lam)
        out = np.empty(self.n)
        for i, h in enumerate(self.laws):
            if self.zero_floor and u[i] <= 0:
                out[i] = 0.0
            else:
                out[i] = h.ppf_closed(min(max(u[i], 0.0), 1.0))
        return out

    def forecast(self, lam):
        return self.forecast_closed(lam)

    def tail_levels(self, gap_lo, gap_hi):
        """Levels u_i and complements 1 - u_i from the distances to the bounds.

        ``gap_lo = lam - lower`` and ``gap_hi = upper - lam``.  Working from
        the gaps avoids the cancellation in ``1 +- a (lam c - pi) / (1 - pi)``
        when the multiplier sits very close to a bound.
        """
        half = 0.5 * self.scale * self.c / (1 - self.pi0)
        u = half * ((self.bounds.lower - self.comp_s) + gap_lo)
        t = half * ((self.comp_r - self.bounds.upper) + gap_hi)
        return u, t

    def forecast_gap(self, gap_lo, gap_hi):
        """Minimizer at the multiplier ``lower + gap_lo == upper - gap_hi``."""
        u, t = self.tail_levels(gap_lo, gap_hi)
        out = np.empty(self.n)
        for i, h in enumerate(self.laws):
            if u[i] <= 0:
                out[i] = 0.0 if self.zero_floor else h.support[0]
            elif t[i] <= 0:
                out[i] = h.support[1]
            elif u[i] <= 0.5:
                out[i] = float(h.ppf(u[i]))
            else:
                out[i] = float(h.isf(t[i]))
        return out

    def slope(self, lam, f=None, levels=None):
        """d f_i / d lam_i, or None when some law has no density.

        ``f`` and ``levels`` (as returned by :meth:`tail_levels`) may be
        passed when already known.
        """
        if self.is_discrete:
            return None
        if levels is None:
            u = self.levels(lam)
            active = (u > 0) & (u < 1)
        else:
            active = (levels[0] > 0) & (levels[1] > 0)
        if f is None:
            f = self.forecast_closed(lam)
        out = np.zeros(self.n)
        for i in np.flatnonzero(active):
            dens = float(self.laws[i].pdf(f[i]))
            du = self.scale[i] * self.c[i] / (2 * (1 - self.pi0[i]))
            out[i] = du / dens if dens > 0 else math.inf
        return out


class Loss:
    """Additive loss with per-component weights ``c_i > 0``."""

    name = None

    def __init__(self, weights=None):
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if np.any(~(weights > 0)):
                raise DomainError("loss weights must be positive")
        self.weights = weights

    def __repr__(self):
        w = None if self.weights is None else self.weights.tolist()
        return f"{type(self).__name__}(weights={w})"

    def c(self, n):
        if self.weights is None:
            return np.ones(n)
        if self.weights.size != n:
            raise DomainError(f"{self.weights.size} loss weights for {n} components")
        return self.weights

    def path(self, margins):
        """Prepare the multiplier-indexed minimizer for these margins."""
        raise NotImplementedError

    def minimizer(self, margins, lam):
        path = self.path(margins)
        if not path.bounds.contains(lam):
            raise InfeasibleMultiplierError(f"multiplier {lam} outside admissible interval {path.bounds}")
        return path.forecast(lam)

    def bounds(self, margins):
        return self.path(margins).bounds

    def component_risk(self, margin, f, c=1.0):
        raise NotImplementedError

    def pointwise(self, Y, f, per_component=False):
        """Realized loss for each row of the sample matrix ``Y``."""
        raise NotImplementedError

    def to_spec(self):
        spec = {"loss": self.name}
        if self.weights is not None:
            spec["weights"] = self.weights.tolist()
        return spec


def _finish(parts, per_component):
    return parts if per_component else parts.sum(axis=1)


def _check_shapes(Y, f):
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    f = np.asarray(f, dtype=float)
    if Y.shape[1] != f.size:
        raise DomainError(f"forecast has {f.size} components, samples have {Y.shape[1]}")
    return Y, f


def _abs_risk(law, f):
    """E_H |y - f| via the partial-expectation identity."""
    return f * (2 * float(law.cdf(f)) - 1) + law.mean() - 2 * law.partial_expectation(f)


def _margin_list(margins):
    if isinstance(margins, EmpiricalJoint):
        return margins.margins()
    return list(margins)


class SquaredError(Loss):
    """(y - f)^2 / c."""

    name = "SE"

    def path(self, margins):
        margins = _margin_list(margins)
        for d in margins:
            if not d.has_moments:
                raise UndefinedRiskError(f"squared-error risk undefined: {type(d).__name__} has no moments")
        return _LinearPath([d.mean() for d in margins], self.c(len(margins)))

    def component_risk(self, margin, f, c=1.0):
        if not margin.has_moments:
            raise UndefinedRiskError(f"squared-error risk undefined for {type(margin).__name__}")
        return ((margin.mean() - f) ** 2 + margin.var()) / c

    def pointwise(self, Y, f, per_component=False):
        Y, f = _check_shapes(Y, f)
        return _finish((Y - f) ** 2 / self.c(f.size), per_component)


class AbsoluteDeviation(Loss):
    """|y - f| / c; optimum is a quantile of the margin."""

    name = "AD"

    def path(self, margins):
        margins = _margin_list(margins)
        n = len(margins)
        return _QuantilePath(margins, np.ones(n), self.c(n))

    def component_risk(self, margin, f, c=1.0):
        if not margin.has_moments:
            raise UndefinedRiskError(f"absolute-deviation risk undefined for {type(margin).__name__}")
        return _abs_risk(margin, f) / c

    def pointwise(self, Y, f, per_component=False):
        Y, f = _check_shapes(Y, f)
        return _finish(np.abs(Y - f) / self.c(f.size), per_component)


def _check_positive(Y, allow_zero):
    bad = (Y < 0) if allow_zero else (Y <= 0)
    if np.any(bad):
        dim = int(np.flatnonzero(bad.any(axis=0))[0])
        kind = "negative" if allow_zero else "non-positive"
        raise PointwiseLossError(f"{kind} outcome in dimension {dim}", dimension=dim)


class AbsolutePercentError(Loss):
    """|y - f| / (y c) for y > 0; optimum is a quantile of the size-weighted law."""

    name = "APE"

    def path(self, margins):
        margins = _margin_list(margins)
        n = len(margins)
        G = [size_weighted(d) for d in margins]
        return _QuantilePath(G, [g.normalizer for g in G], self.c(n))

    def component_risk(self, margin, f, c=1.0):
        g = size_weighted(margin)
        return _abs_risk(g, f) / (c * g.normalizer)

    def pointwise(self, Y, f, per_component=False):
        Y, f = _check_shapes(Y, f)
        _check_positive(Y, allow_zero=False)
        return _finish(np.abs(Y - f) / (Y * self.c(f.size)), per_component)


def _split_zero(margin):
    if isinstance(margin, ZeroInflated):
        return margin.pi0, margin.positive
    if isinstance(margin, Empirical) and np.any(margin.values == 0):
        zero = margin.values == 0
        pi0 = float(margin.weights[zero].sum())
        if pi0 >= 1:
            raise DomainError("empirical margin is entirely at zero")
        return pi0, Empirical(margin.values[~zero], margin.weights[~zero])
    return 0.0, margin


class ZeroAdjustedAPE(AbsolutePercentError):
    """APE extended with penalty f / c when the outcome is exactly zero."""

    name = "ZAPE"

    def path(self, margins):
        margins = _margin_list(margins)
        n = len(margins)
        parts = [_split_zero(d) for d in margins]
        G = [size_weighted(pos) for _, pos in parts]
        return _QuantilePath(G, [g.normalizer for g in G], self.c(n),
                             pi0=[p for p, _ in parts], zero_floor=True)

    def component_risk(self, margin, f, c=1.0):
        pi0, pos = _split_zero(margin)
        g = size_weighted(pos)
        return pi0 * f / c + (1 - pi0) * _abs_risk(g, f) / (c * g.normalizer)

    def pointwise(self, Y, f, per_component=False):
        Y, f = _check_shapes(Y, f)
        _check_positive(Y, allow_zero=True)
        c = self.c(f.size)
        zero = Y == 0
        safe = np.where(zero, 1.0, Y)
        parts = np.where(zero, f / c, np.abs(Y - f) / (safe * c))
        return _finish(parts, per_component)


class WAPE(Loss):
    """sum_i |y_i - f_i| / (c_i * 1'y), evaluated on a joint sample.

    Risk separates over components, with each margin reweighted by the
    reciprocal sample total.
    """

    name = "WAPE"

    def path(self, margins):
        if isinstance(margins, EmpiricalJoint):
            Y, w = margins.samples, margins.weights
        else:
            try:
                Y = np.asarray(margins, dtype=float)
            except (TypeError, ValueError):
                Y = None
            if Y is None or Y.ndim != 2:
                raise DomainError("WAPE needs the joint sample matrix, not separate margins")
            w = np.full(Y.shape[0], 1.0 / Y.shape[0])
        totals = Y.sum(axis=1)
        if np.any(totals <= 0):
            raise NonIntegrableError("WAPE requires every sampled total to be positive")
        raw = w / totals
        k = 1.0 / raw.sum()
        laws = [Empirical(Y[:, i], raw) for i in range(Y.shape[1])]
        return _QuantilePath(laws, np.full(Y.shape[1], k), self.c(Y.shape[1]))

    def pointwise(self, Y, f, per_component=False):
        Y, f = _check_shapes(Y, f)
        totals = Y.sum(axis=1)
        if np.any(totals <= 0):
            raise PointwiseLossError("WAPE requires a positive total in every sample")
        parts = np.abs(Y - f) / (self.c(f.size) * totals[:, None])
        return _finish(parts, per_component)


_LOSSES = {cls.name: cls for cls in (SquaredError, AbsoluteDeviation, AbsolutePercentError, ZeroAdjustedAPE, WAPE)}


def loss_from_spec(spec) -> Loss:
    """Build a loss from ``{"loss": "AD", "weights": [...]}`` (weights optional)."""
    if isinstance(spec, str):
        spec = {"loss": spec}
    name = str(spec.get("loss", "")).upper()
    if name not in _LOSSES:
        raise DomainError(f"unknown loss {spec.get('loss')!r}; expected one of {sorted(_LOSSES)}")
    return _LOSSES[name](spec.get("weights"))


def componentwise_minimizer(loss: Loss, margins, lam):
    return loss.minimizer(margins, lam)


def lambda_bounds(loss: Loss, margins) -> LambdaBounds:
    return loss.bounds(margins)


def per_component_risk(loss: Loss, margin: Marginal, f, c=1.0, mc_samples=None):
    """Expected loss of one component at forecast ``f``.

    Analytic where the law allows it; with ``mc_samples`` the Monte Carlo
    average of the pointwise loss is returned instead.
    """
    if mc_samples is not None:
        ys = np.asarray(mc_samples, dtype=float).reshape(-1, 1)
        single = type(loss)(None if c == 1.0 else [c])
        return float(single.pointwise(ys, [f]).mean())
    return float(loss.component_risk(margin, f, c))


def risk(loss: Loss, margins, f):
    margins = _margin_list(margins)
    c = loss.c(len(margins))
    return float(sum(loss.component_risk(d, fi, ci) for d, fi, ci in zip(margins, f, c)))


def wape_minimizer(samples, lam, c=None, weights=None):
    joint = samples if isinstance(samples, EmpiricalJoint) else EmpiricalJoint(samples, weights)
    return WAPE(c).minimizer(joint, lam)
