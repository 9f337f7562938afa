"""Decision analysis around a chosen forecast vector.

Monte Carlo loss distributions, dependence contrasts with common random
numbers, and sensitivity of constrained optima to the conditioning total.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .distributions import EmpiricalJoint, MultivariateLognormal, MultivariateNormal
from .exceptions import DomainError
from .losses import Loss
from .solver import SolverOptions, Status, solve_total

__all__ = [
    "LossDistributionSummary",
    "SensitivityResult",
    "loss_distribution",
    "summarize_losses",
    "dependence_contrast",
    "sensitivity",
    "density_lattice",
    "synthetic_joint",
    "load_synthetic",
]


@dataclass(frozen=True, eq=False)
class LossDistributionSummary:
    per_dimension_scale: bool
    mean: float
    median: float
    q05: float
    q95: float
    min: float
    max: float
    se: float
    n_samples: int
    samples: np.ndarray | None = None  # columns: total, loss

    def iqr_width(self):
        return self.q95 - self.q05

    def to_dict(self):
        return {
            "per_dimension_scale": self.per_dimension_scale,
            "mean": self.mean,
            "median": self.median,
            "q05": self.q05,
            "q95": self.q95,
            "min": self.min,
            "max": self.max,
            "se": self.se,
            "n_samples": self.n_samples,
        }


def _q(x, p):
    # left-continuous empirical quantile, as for Empirical margins
    return float(np.quantile(x, p, method="inverted_cdf"))


def summarize_losses(L, per_dimension=False, totals=None):
    L = np.asarray(L, dtype=float)
    samples = None if totals is None else np.column_stack([totals, L])
    se = float(L.std(ddof=1) / np.sqrt(L.size)) if L.size > 1 else float("nan")
    return LossDistributionSummary(
        per_dimension_scale=bool(per_dimension),
        mean=float(L.mean()),
        median=_q(L, 0.5),
        q05=_q(L, 0.05),
        q95=_q(L, 0.95),
        min=float(L.min()),
        max=float(L.max()),
        se=se,
        n_samples=int(L.size),
        samples=samples,
    )


def loss_distribution(
    joint, loss: Loss, f, N, seed=None, per_dimension=False, keep_samples=False, n_jobs=None
) -> LossDistributionSummary:
    """Distribution of the realized loss L(y, f) for y drawn from ``joint``.

    With ``per_dimension`` the loss is divided by n.  ``keep_samples`` retains
    the (total, loss) pairs for scatter plots.
    """
    f = np.asarray(f, dtype=float)
    if f.size != joint.dim:
        raise DomainError(f"forecast has {f.size} components, joint has {joint.dim}")
    Y = joint.sample(int(N), seed, n_jobs)
    L = loss.pointwise(Y, f)
    if per_dimension:
        L = L / joint.dim
    totals = Y.sum(axis=1) if keep_samples else None
    return summarize_losses(L, per_dimension, totals)


def dependence_contrast(joint, loss: Loss, f, N, seed=None, per_dimension=False, keep_samples=False, n_jobs=None):
    """Loss summaries under ``joint`` and under its independent counterpart.

    Both use the same seed, hence the same underlying normal draws.
    """
    if isinstance(joint, EmpiricalJoint) or not isinstance(joint, MultivariateNormal):
        raise DomainError("dependence contrast needs a parametric joint with an explicit covariance")
    kw = dict(per_dimension=per_dimension, keep_samples=keep_samples, n_jobs=n_jobs)
    with_dep = loss_distribution(joint, loss, f, N, seed, **kw)
    without = loss_distribution(joint.with_independence(), loss, f, N, seed, **kw)
    return with_dep, without


@dataclass(frozen=True, eq=False)
class SensitivityResult:
    nominal_F: float
    nominal_lambda: float
    q_dot: float
    epsilon_grid: np.ndarray
    F: np.ndarray
    exact_f: np.ndarray
    approx_f: np.ndarray
    lambda_exact: np.ndarray
    lambda_approx: np.ndarray
    statuses: list = field(default_factory=list)

    def envelopes(self):
        """Per-component (min, max) of the exact optima over solved points."""
        ok = np.array([s == Status.CONVERGED for s in self.statuses])
        if not ok.any():
            return np.full((self.exact_f.shape[1], 2), np.nan)
        X = self.exact_f[ok]
        return np.column_stack([X.min(axis=0), X.max(axis=0)])

    def rows(self):
        """Long-format table: epsilon, F, component, f_exact, f_approx."""
        out = []
        for e, F, fe, fa in zip(self.epsilon_grid, self.F, self.exact_f, self.approx_f):
            for i in range(fe.size):
                out.append((float(e), float(F), i, float(fe[i]), float(fa[i])))
        return out

    def to_dict(self):
        return {
            "nominal_F": self.nominal_F,
            "nominal_lambda": self.nominal_lambda,
            "q_dot": self.q_dot,
            "epsilon": self.epsilon_grid.tolist(),
            "F": self.F.tolist(),
            "lambda_exact": self.lambda_exact.tolist(),
            "lambda_approx": self.lambda_approx.tolist(),
            "status": [s.value for s in self.statuses],
            "envelopes": self.envelopes().tolist(),
        }


def sensitivity(loss: Loss, margins, nominal_F, epsilon_grid, opts: SolverOptions | None = None) -> SensitivityResult:
    """Re-solve at F(1 + eps) and compare with the first-order multiplier update.

    The approximation moves the multiplier to ``lam* + eps F / q_dot(lam*)``
    and reads the forecast off the minimizer path.  Perturbed totals that
    cannot be met are kept with their status and NaN forecasts.
    """
    eps = np.asarray(epsilon_grid, dtype=float).ravel()
    base = solve_total(loss, margins, nominal_F, opts)
    if not base.converged:
        raise DomainError(f"nominal total not solvable: {base.message}")
    path = loss.path(margins)
    n = base.f_star.size
    lam0, qd = base.lambda_star, base.q_dot
    F = nominal_F * (1 + eps)
    exact = np.full((eps.size, n), np.nan)
    approx = np.full((eps.size, n), np.nan)
    lam_e = np.full(eps.size, np.nan)
    lam_a = lam0 + eps * nominal_F / qd
    statuses = []
    for j, Fj in enumerate(F):
        res = solve_total(loss, margins, Fj, opts)
        statuses.append(res.status)
        if res.converged:
            exact[j] = res.f_star
            lam_e[j] = res.lambda_star
        if path.bounds.contains(lam_a[j]):
            approx[j] = path.forecast(lam_a[j])
    return SensitivityResult(float(nominal_F), lam0, qd, eps, F, exact, approx, lam_e, lam_a, statuses)


def density_lattice(joint, size=64, lower=None, upper=None, probs=(0.001, 0.999)):
    """Bivariate density on a regular grid for contour plots.

    Grid limits default to marginal quantiles at ``probs``.  Returns
    ``(x, y, Z)`` with ``Z[i, j]`` the density at ``(x[j], y[i])``.
    """
    if joint.dim != 2 or not hasattr(joint, "pdf"):
        raise DomainError("density lattice needs an analytic bivariate joint")
    ms = joint.margins()
    lower = lower if lower is not None else [m.ppf(probs[0]) for m in ms]
    upper = upper if upper is not None else [m.ppf(probs[1]) for m in ms]
    x = np.linspace(lower[0], upper[0], size)
    y = np.linspace(lower[1], upper[1], size)
    X, Yg = np.meshgrid(x, y)
    Z = joint.pdf(np.column_stack([X.ravel(), Yg.ravel()])).reshape(X.shape)
    return x, y, Z


def synthetic_joint(n=100, seed=20240101, level=np.log(44.7), n_factors=3):
    """Stand-in high-dimensional lognormal with mostly positive correlations.

    Log-means scatter around ``level``, log-variances lie in [0.02, 0.12] and
    the correlation matrix comes from a few factors with mixed-sign loadings.
    """
    rng = np.random.default_rng(seed)
    m = level + rng.normal(0.0, 0.25, n)
    v = rng.uniform(0.02, 0.12, n)
    B = rng.normal(0.35, 0.3, (n, n_factors))
    B[:, 1:] *= rng.choice([-1.0, 1.0], (n, n_factors - 1), p=[0.3, 0.7])
    B *= 0.9 / np.maximum(1.0, np.linalg.norm(B, axis=1, keepdims=True))
    R = B @ B.T
    np.fill_diagonal(R, 1.0)
    sd = np.sqrt(v)
    return MultivariateLognormal(m, R * np.outer(sd, sd))


def load_synthetic():
    """The packaged synthetic scenario as ``(joint, F)``."""
    text = resources.files("confor.data").joinpath("synthetic_n100.json").read_text()
    spec = json.loads(text)
    j = spec["joint"]
    return MultivariateLognormal(np.array(j["m"]), np.array(j["V"])), float(spec["constraint"]["F"])
