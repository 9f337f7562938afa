"""Inferential baseline: conditioning the predictive law on its total.

Exact updates for normal and T joints, and rejection ABC for anything that
can be sampled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateTotalError, DomainError

__all__ = [
    "ConditionedNormal",
    "AbcResult",
    "condition_normal",
    "condition_t",
    "abc_condition",
]


@dataclass(frozen=True, eq=False)
class ConditionedNormal:
    """Location/dispersion of y given 1'y = F.

    ``var_F`` is singular: the total is deterministic under the conditional.
    For the T case ``scale_factor`` is the data-dependent inflation v_F and
    ``dof`` the degrees of freedom.
    """

    mean_F: np.ndarray
    var_F: np.ndarray
    scale_factor: float = 1.0
    dof: float | None = None

    def to_dict(self):
        return {
            "mean_F": self.mean_F.tolist(),
            "var_F": self.var_F.tolist(),
            "scale_factor": self.scale_factor,
            "dof": self.dof,
        }


def _total_moments(m, V):
    m = np.asarray(m, dtype=float).ravel()
    V = np.asarray(V, dtype=float)
    if V.shape != (m.size, m.size):
        raise DomainError(f"V has shape {V.shape}, expected {(m.size, m.size)}")
    c = V.sum(axis=1)
    q = float(c.sum())
    if not q > 0:
        raise DegenerateTotalError(f"variance of the total must be positive, got {q}")
    return m, V, c, q, float(m.sum())


def condition_normal(m, V, F) -> ConditionedNormal:
    """y ~ N(m, V) conditioned on 1'y = F."""
    m, V, c, q, M = _total_moments(m, V)
    mean_F = m + c * (F - M) / q
    var_F = V - np.outer(c, c) / q
    return ConditionedNormal(mean_F, var_F)


def condition_t(k, m, V, F, dispersion="conditional") -> ConditionedNormal:
    """y ~ T_k(m, V) conditioned on 1'y = F.

    Location moves exactly as in the normal case and the dispersion is
    scaled by ``v_F = (k + (F - M)^2 / q) / (k + n)``.

    ``dispersion="conditional"`` uses ``(V - cc'/q) v_F``, the form that
    removes total-direction variance and recovers :func:`condition_normal`
    as k grows.  ``dispersion="printed"`` uses ``(V + cc'/q) v_F``.
    """
    if not k > 0:
        raise DomainError("degrees of freedom must be positive")
    m, V, c, q, M = _total_moments(m, V)
    n = m.size
    v_F = (k + (F - M) ** 2 / q) / (k + n)
    cc = np.outer(c, c) / q
    if dispersion == "conditional":
        base = V - cc
    elif dispersion == "printed":
        base = V + cc
    else:
        raise DomainError(f"unknown dispersion convention {dispersion!r}")
    return ConditionedNormal(m + c * (F - M) / q, base * v_F, v_F, float(k))


@dataclass(frozen=True, eq=False)
class AbcResult:
    accepted: np.ndarray
    acceptance_rate: float
    tau_pct: float
    F: float
    n_draws: int

    @property
    def tolerance_pct(self):
        return self.tau_pct

    def histograms(self, bins=64):
        """Per-dimension binned counts spanning the accepted range.

        Returns a list of ``(counts, edges)`` pairs, empty when nothing was
        accepted.
        """
        if self.accepted.shape[0] == 0:
            return []
        return [np.histogram(col, bins=bins) for col in self.accepted.T]

    def to_dict(self):
        return {
            "acceptance_rate": self.acceptance_rate,
            "tau_pct": self.tau_pct,
            "F": self.F,
            "n_draws": self.n_draws,
            "n_accepted": int(self.accepted.shape[0]),
        }


def abc_condition(joint, F, tau_pct, N, seed=None, n_jobs=None) -> AbcResult:
    """Rejection sampling: keep draws with 100 |1'y - F| / F < tau_pct."""
    if not F > 0:
        raise DomainError("percent tolerance needs a positive conditioning total")
    if N < 1:
        raise DomainError("need at least one draw")
    if not tau_pct > 0:
        raise DomainError("tolerance must be positive")
    Y = joint.sample(int(N), seed, n_jobs)
    keep = 100.0 * np.abs(Y.sum(axis=1) - F) / F < tau_pct
    return AbcResult(Y[keep], float(keep.mean()), float(tau_pct), float(F), int(N))
