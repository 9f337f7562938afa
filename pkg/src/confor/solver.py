"""Constrained point forecasts by Newton-Raphson on the Lagrange multiplier.

``solve_total`` handles ``1'f = F`` with a scalar multiplier, ``solve_linear``
the general ``A'f = F`` with a k-vector.  Both evaluate the loss's
componentwise minimizer path and drive the constraint residual to zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .exceptions import DomainError
from .losses import Loss, SquaredError

__all__ = [
    "SolverOptions",
    "Status",
    "SolveResult",
    "Total",
    "Linear",
    "solve",
    "solve_total",
    "solve_linear",
    "attainable_range",
]


@dataclass
class SolverOptions:
    tol: float = 1e-8
    lambda_tol: float = 1e-10
    max_iter: int = 100
    lambda0: float | list | None = None
    # run Newton even when a closed form exists (SE)
    force_newton: bool = False

    @classmethod
    def from_dict(cls, d=None):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown solver options: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        return asdict(self)


class Status(str, enum.Enum):
    CONVERGED = "converged"
    HIT_LOWER_BOUND = "hit_lower_bound"
    HIT_UPPER_BOUND = "hit_upper_bound"
    MAX_ITERATIONS = "max_iterations"
    INFEASIBLE_CONSTRAINT = "infeasible_constraint"


@dataclass
class SolveResult:
    f_star: np.ndarray
    lambda_star: float | np.ndarray
    status: Status
    iterations: list = field(default_factory=list)
    message: str = ""
    attainable: tuple | None = None
    # dq/dlambda at the solution (scalar case), used by sensitivity shortcuts
    q_dot: float | None = None

    @property
    def converged(self):
        return self.status is Status.CONVERGED

    @property
    def n_iter(self):
        return max(len(self.iterations) - 1, 0)

    def to_dict(self):
        def plain(x):
            if isinstance(x, np.ndarray):
                return x.tolist()
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            return x

        return {
            "status": self.status.value,
            "f_star": plain(self.f_star),
            "lambda_star": plain(self.lambda_star),
            "q_dot": plain(self.q_dot),
            "n_iter": self.n_iter,
            "message": self.message,
            "attainable": None if self.attainable is None else [plain(a) for a in self.attainable],
            "iterations": [{k: plain(v) for k, v in it.items()} for it in self.iterations],
        }


@dataclass(frozen=True)
class Total:
    F: float


@dataclass(frozen=True, eq=False)
class Linear:
    A: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        F = np.atleast_1d(np.asarray(self.F, dtype=float))
        if A.ndim == 1:
            A = A[:, None]
        n, k = A.shape
        if F.shape != (k,):
            raise DomainError(f"A has {k} columns but F has {F.size} entries")
        if k > n or np.linalg.matrix_rank(A) < k:
            raise DomainError("constraint matrix must have full column rank k <= n")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "F", F)


def _range_of(path):
    b = path.bounds
    if math.isinf(b.lower) and math.isinf(b.upper):
        return (-math.inf, math.inf)
    low = float(path.forecast_closed(b.lower).sum()) if math.isfinite(b.lower) else -math.inf
    high = float(path.forecast_closed(b.upper).sum()) if math.isfinite(b.upper) else math.inf
    return (low, high)


def attainable_range(loss: Loss, margins):
    """Totals reachable along the minimizer path as the multiplier spans its bounds."""
    return _range_of(loss.path(margins))


def _fd_step(path):
    b = path.bounds
    width = b.upper - b.lower if math.isfinite(b.upper - b.lower) else 1.0
    return 1e-4 * width


def _q_dot(path, lam, f=None, levels=None):
    """Derivative of the total forecast in the multiplier."""
    slope = path.slope(lam, f, levels)
    if slope is not None:
        return float(np.sum(slope))
    # no density: central difference on the total, kept inside the bounds
    b = path.bounds
    h = _fd_step(path)
    lo = max(lam - h, b.lower)
    hi = min(lam + h, b.upper - 1e-15 * max(1.0, abs(b.upper)))
    if hi <= lo:
        return 0.0
    return float((path.forecast(hi).sum() - path.forecast(lo).sum()) / (hi - lo))


# |x| beyond this puts the multiplier within exp(-700) * width of a bound,
# where the gaps underflow
_EDGE_X = 700.0


def solve_total(loss: Loss, margins, F, opts: SolverOptions | None = None) -> SolveResult:
    """Minimize expected loss subject to ``sum(f) == F``."""
    opts = opts or SolverOptions()
    F = float(F)
    path = loss.path(margins)
    rng = _range_of(path)
    ftol = opts.tol * max(1.0, abs(F))

    if isinstance(loss, SquaredError) and not opts.force_newton:
        C = path.c.sum()
        M = path.means.sum()
        lam = 2 * (F - M) / C
        f = path.means + (F - M) * path.c / C
        trace = [{"iter": 0, "lambda": lam, "total": float(f.sum())}]
        return SolveResult(f, lam, Status.CONVERGED, trace, "closed form", rng, C / 2)

    bounds = path.bounds
    low, high = rng
    if F < low or F > high or (F == high and not bounds.upper_closed):
        side = "below" if F < low else "above"
        msg = f"F={F:.10g} lies {side} the attainable range [{low:.10g}, {high:.10g})"
        lam = bounds.lower if side == "below" else bounds.upper
        return SolveResult(path.forecast_closed(lam), lam, Status.INFEASIBLE_CONSTRAINT, [], msg, rng)

    lo_b, hi_b = bounds.lower, bounds.upper
    # keep iterates strictly below the open upper bound
    hi_in = hi_b - 1e-15 * max(1.0, abs(hi_b)) if math.isfinite(hi_b) else hi_b
    logit = math.isfinite(lo_b) and math.isfinite(hi_b)
    width = hi_b - lo_b

    # With a bounded multiplier, Newton runs in x = logit((lam - lo) / width),
    # which keeps every iterate inside the bounds and makes bisection
    # geometric near them.  The forecast is read from the distances
    # width * expit(+-x) to the two bounds, so totals deep in a tail stay
    # resolvable.  Otherwise x is the multiplier itself.
    def to_lam(x):
        if not logit:
            return min(x, hi_in)
        if x <= 0:
            return lo_b + width * special.expit(x)
        return hi_b - width * special.expit(-x)

    def to_x(lam):
        if not logit:
            return lam
        s = (lam - lo_b) / width
        return math.log(s) - math.log1p(-s) if 0 < s < 1 else (-math.inf if s <= 0 else math.inf)

    def dlam_dx(x):
        if not logit:
            return 1.0
        return width * special.expit(x) * special.expit(-x)

    def evaluate(x):
        lam = to_lam(x)
        if logit:
            gaps = (width * special.expit(x), width * special.expit(-x))
            f = path.forecast_gap(*gaps)
            qd = _q_dot(path, lam, f, path.tail_levels(*gaps))
        else:
            f = path.forecast(lam)
            qd = _q_dot(path, lam, f)
        return lam, f, qd

    def side_of(x, lam):
        if logit:
            return "lower" if x <= -_EDGE_X else ("upper" if x >= _EDGE_X else None)
        for name, edge in (("lower", lo_b), ("upper", hi_b)):
            if math.isfinite(edge) and abs(lam - edge) <= 1e-12 * max(1.0, abs(edge)):
                return name
        return None

    lam0 = path.lambda0 if opts.lambda0 is None else float(opts.lambda0)
    if not bounds.contains(lam0) or (logit and lam0 == lo_b):
        lam0 = 0.5 * (lo_b + hi_b)
    x = to_x(lam0)

    # bracket in x with q <= 0 at xa and q >= 0 at xb
    xa, xb = (-math.inf, math.inf)
    fa = fb = None
    resid = []
    trace = []
    lam_prev = None
    near_bound = None
    for t in range(opts.max_iter + 1):
        lam, f, qd = evaluate(x)
        total = float(f.sum())
        qv = total - F
        trace.append({"iter": t, "lambda": lam, "total": total})

        dx = qd * dlam_dx(x)
        newton_ok = dx > 0 and math.isfinite(dx)
        newton_step = -qv / qd if (qd > 0 and math.isfinite(qd)) else math.nan
        settled = (lam_prev is not None and abs(lam - lam_prev) <= opts.lambda_tol) or (
            math.isfinite(newton_step) and abs(newton_step) <= opts.lambda_tol
        )
        if qv == 0 or (abs(qv) <= ftol and settled):
            # one last Newton correction, kept only if it shrinks the residual:
            # where the path is steep a multiplier change below the stopping
            # tolerance still moves the forecast noticeably
            if qv != 0 and newton_ok:
                lam_p, f_p, _ = evaluate(x - qv / dx)
                if abs(float(f_p.sum()) - F) < abs(qv):
                    lam, f = lam_p, f_p
            return SolveResult(f, lam, Status.CONVERGED, trace, "", rng, qd)
        if t == opts.max_iter:
            break

        if qv < 0:
            xa, fa = x, f
        else:
            xb, fb = x, f

        # step function: the root sits on a jump of q; mix the two sides
        if math.isfinite(xa) and math.isfinite(xb) and xb - xa <= 1e-13 * max(1.0, abs(xa), abs(xb)):
            sa, sb = fa.sum(), fb.sum()
            w = (F - sa) / (sb - sa) if sb > sa else 0.0
            f_mix = fa + w * (fb - fa)
            lam_mid = to_lam(0.5 * (xa + xb))
            trace.append({"iter": t + 1, "lambda": lam_mid, "total": float(f_mix.sum())})
            return SolveResult(f_mix, lam_mid, Status.CONVERGED, trace,
                               "constraint met on a jump of the minimizer path", rng, qd)

        if not newton_ok:
            cand = math.nan
        elif logit and qv > 0 and total > 0 and F > 0:
            # above the root the total grows fast in x; a Newton step on
            # log(total) - log(F) avoids the overshoot-and-crawl pattern
            cand = x - (math.log(total) - math.log(F)) * total / dx
        else:
            cand = x - qv / dx
        if not logit and math.isfinite(cand):
            if cand < lo_b:
                cand = x + 0.5 * (lo_b - x)
            elif cand >= hi_b:
                cand = x + 0.5 * (hi_in - x)
        resid.append(abs(qv))
        stalled = len(resid) >= 3 and resid[-1] > 0.5 * resid[-3]
        if not math.isfinite(cand) or not (xa < cand < xb) or stalled:
            if math.isfinite(xa) and math.isfinite(xb):
                cand = 0.5 * (xa + xb)
            elif math.isfinite(xa):
                cand = xa + max(1.0, abs(xa))
            elif math.isfinite(xb):
                cand = xb - max(1.0, abs(xb))
            else:
                cand = x + (1.0 if qv < 0 else -1.0)

        lam_prev, x = lam, cand
        side = side_of(x, to_lam(x))
        if side is not None and side == near_bound:
            lam, f, _ = evaluate(x)
            status = Status.HIT_LOWER_BOUND if side == "lower" else Status.HIT_UPPER_BOUND
            edge = lo_b if side == "lower" else hi_b
            trace.append({"iter": t + 1, "lambda": lam, "total": float(f.sum())})
            return SolveResult(f, lam, status, trace, f"multiplier pinned at its {side} bound {edge:.10g}", rng)
        near_bound = side

    return SolveResult(path.forecast(lam), lam, Status.MAX_ITERATIONS, trace,
                       f"no convergence in {opts.max_iter} iterations", rng, None)


def _component_slopes(path, eff):
    slope = path.slope(eff)
    if slope is not None:
        return slope
    h = _fd_step(path)
    lo = np.maximum(eff - h, path.comp_lower)
    hi = np.minimum(eff + h, path.comp_upper - 1e-15 * np.maximum(1.0, np.abs(path.comp_upper)))
    span = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        d = (path.forecast(hi) - path.forecast(lo)) / span
    return np.where(span > 0, d, 0.0)


def _inside(path, eff):
    return bool(np.all(eff >= path.comp_lower) and np.all(eff < path.comp_upper))


def solve_linear(loss: Loss, margins, constraint: Linear, opts: SolverOptions | None = None) -> SolveResult:
    """Minimize expected loss subject to ``A'f == F`` with a k-vector multiplier.

    Component i sees the effective multiplier ``(A @ lam)_i``; the Jacobian of
    the residual is ``A' Q A`` with Q the diagonal of componentwise slopes.
    """
    opts = opts or SolverOptions()
    A, F = constraint.A, constraint.F
    path = loss.path(margins)
    n, k = A.shape
    if n != path.n:
        raise DomainError(f"constraint matrix has {n} rows for {path.n} components")
    ftol = opts.tol * max(1.0, float(np.max(np.abs(F))))

    lam = np.zeros(k) if opts.lambda0 is None else np.broadcast_to(np.asarray(opts.lambda0, float), (k,)).copy()
    if not _inside(path, A @ lam):
        lam = np.zeros(k)
    if not _inside(path, A @ lam):
        # fall back to the scalar default mapped onto the first constraint
        lam = np.linalg.lstsq(A, np.full(n, path.lambda0), rcond=None)[0]

    trace = []
    step = None
    f = path.forecast(A @ lam)
    qv = A.T @ f - F
    for t in range(opts.max_iter + 1):
        res = float(np.max(np.abs(qv)))
        trace.append({"iter": t, "lambda": lam.copy(), "residual": res})
        if res <= ftol and (res == 0 or (step is not None and np.max(np.abs(step)) <= opts.lambda_tol)):
            return SolveResult(f, lam, Status.CONVERGED, trace, "", None)
        if t == opts.max_iter:
            break

        Q = _component_slopes(path, A @ lam)
        J = A.T @ (Q[:, None] * A)
        direction = None
        if np.all(np.isfinite(J)):
            try:
                if np.linalg.cond(J) < 1e12:
                    direction = np.linalg.solve(J, -qv)
            except np.linalg.LinAlgError:
                direction = None
            if direction is None:
                mu = 1e-8 * max(1.0, float(np.trace(J)))
                direction = np.linalg.solve(J + mu * np.eye(k), -qv)
        if direction is None or not np.all(np.isfinite(direction)):
            direction = -qv * 1e-3

        # backtrack until inside the bounds and the residual norm drops
        alpha = 1.0
        norm0 = float(np.linalg.norm(qv))
        for _ in range(60):
            trial = lam + alpha * direction
            eff = A @ trial
            if _inside(path, eff):
                f_try = path.forecast(eff)
                q_try = A.T @ f_try - F
                if np.linalg.norm(q_try) < norm0 or np.max(np.abs(q_try)) <= ftol:
                    break
            alpha *= 0.5
        else:
            return SolveResult(f, lam, Status.MAX_ITERATIONS, trace,
                               "line search failed; constraint may be unattainable", None)
        step = trial - lam
        lam, f, qv = trial, f_try, q_try

    return SolveResult(f, lam, Status.MAX_ITERATIONS, trace,
                       f"no convergence in {opts.max_iter} iterations", None)


def solve(loss: Loss, margins, constraint, opts: SolverOptions | None = None) -> SolveResult:
    if isinstance(constraint, Linear):
        return solve_linear(loss, margins, constraint, opts)
    if isinstance(constraint, Total):
        constraint = constraint.F
    return solve_total(loss, margins, constraint, opts)
