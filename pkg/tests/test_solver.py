import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confor.distributions import Empirical, EmpiricalJoint, Exponential, Lognormal, LogT, Normal, Truncated, ZeroInflated
from confor.exceptions import DomainError
from confor.losses import WAPE, AbsoluteDeviation, AbsolutePercentError, SquaredError, ZeroAdjustedAPE, risk
from confor.solver import Linear, SolverOptions, Status, Total, attainable_range, solve, solve_linear, solve_total

from conftest import bivariate_joint


def _grid_along_total(loss, margins, F, lo, hi, n=100_001):
    f1 = np.linspace(lo, hi, n)
    r1 = [loss.component_risk(margins[0], x) for x in f1[::100]]
    r2 = [loss.component_risk(margins[1], F - x) for x in f1[::100]]
    j = int(np.argmin(np.add(r1, r2))) * 100
    window = f1[max(0, j - 100): j + 101]
    r = [loss.component_risk(margins[0], x) + loss.component_risk(margins[1], F - x) for x in window]
    return window[int(np.argmin(r))], f1[1] - f1[0]


def test_exponential_ad_example():
    ms = [Exponential.from_mean(1.0), Exponential.from_mean(2.0)]
    res = solve_total(AbsoluteDeviation(), ms, 4.5)
    assert res.status == Status.CONVERGED
    assert res.f_star == pytest.approx([1.5, 3.0], abs=1e-8)
    assert res.lambda_star == pytest.approx(1 - 2 * math.exp(-1.5), abs=1e-8)
    assert res.n_iter <= 5


def test_se_constraint_already_met():
    ms = [Normal(1.0, 1.0), Lognormal(0.0, 0.5), Exponential(2.0)]
    M = sum(d.mean() for d in ms)
    res = solve_total(SquaredError(), ms, M)
    assert res.f_star == pytest.approx([d.mean() for d in ms], abs=1e-14)
    assert res.lambda_star == pytest.approx(0.0, abs=1e-14)


def test_ad_sum_of_medians(margins2):
    res = solve_total(AbsoluteDeviation(), margins2, 21.0)
    assert res.f_star == pytest.approx([7, 14], abs=1e-9)
    assert res.lambda_star == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("name", ["AD", "APE", "SE"])
def test_bivariate_matches_grid(margins2, name):
    from confor.losses import loss_from_spec

    loss = loss_from_spec(name)
    res = solve_total(loss, margins2, 14.7)
    best, step = _grid_along_total(loss, margins2, 14.7, 1e-3, 14.7 - 1e-3)
    assert abs(res.f_star[0] - best) <= step
    assert res.f_star.sum() == pytest.approx(14.7, abs=1e-8)


def test_bivariate_reference_values(margins2):
    ad = solve_total(AbsoluteDeviation(), margins2, 14.7)
    ape = solve_total(AbsolutePercentError(), margins2, 14.7)
    assert ad.f_star == pytest.approx([5.3488, 9.3512], abs=1e-4)
    assert ad.n_iter <= 5 and ape.n_iter <= 5
    # the total constraint reverses the unconstrained APE-below-AD order in the first component
    assert ape.f_star[0] > ad.f_star[0]


def test_trace_and_serialization(margins2):
    res = solve_total(AbsoluteDeviation(), margins2, 24.15)
    d = res.to_dict()
    assert d["status"] == "converged"
    assert d["iterations"][0]["lambda"] == 0.0
    assert abs(d["iterations"][-1]["total"] - 24.15) <= 1e-8 * 24.15
    assert len(d["iterations"]) == res.n_iter + 1


def test_infeasible_total(margins2):
    res = solve_total(AbsoluteDeviation(), margins2, -1.0)
    assert res.status == Status.INFEASIBLE_CONSTRAINT
    assert "below" in res.message
    ms = [Truncated(Normal(1, 1), 0, 2), Truncated(Normal(1, 1), 0, 3)]
    assert attainable_range(AbsoluteDeviation(), ms) == pytest.approx((0.0, 5.0))
    res = solve_total(AbsoluteDeviation(), ms, 5.5)
    assert res.status == Status.INFEASIBLE_CONSTRAINT and "above" in res.message


def test_attainable_ranges(margins2):
    assert attainable_range(SquaredError(), margins2) == (-math.inf, math.inf)
    assert attainable_range(AbsoluteDeviation(), margins2) == (0.0, math.inf)


@pytest.mark.parametrize("ratio", [25.0, 40.0, 150.0, 650.0])
def test_exponential_deep_tail_totals(ratio):
    # 1 - lambda* = 2 exp(-F/M) is far below double resolution near 1
    ms = [Exponential.from_mean(1.0), Exponential.from_mean(3.0)]
    res = solve_total(AbsoluteDeviation(), ms, 4.0 * ratio)
    assert res.converged
    assert res.f_star == pytest.approx([ratio, 3 * ratio], abs=1e-8 * ratio)
    assert res.n_iter <= 5


def test_unreachable_tail_reports_bound():
    # the multiplier would need to sit closer than exp(-700) to its bound
    ms = [Exponential.from_mean(1.0)]
    res = solve_total(AbsoluteDeviation(), ms, 2000.0)
    assert res.status == Status.HIT_UPPER_BOUND
    assert "upper" in res.message


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.1, 10.0), min_size=1, max_size=6),
    st.floats(0.002, 700.0),
)
def test_exponential_closed_form_property(means, ratio):
    ms = [Exponential.from_mean(m) for m in means]
    M = sum(means)
    F = ratio * M
    res = solve_total(AbsoluteDeviation(), ms, F)
    assert res.converged
    assert np.max(np.abs(res.f_star - np.array(means) * F / M)) < 1e-8
    assert abs(res.lambda_star - (1 - 2 * math.exp(-F / M))) < 1e-8
    assert res.n_iter <= 5


def test_se_newton_agrees_with_closed_form():
    rng = np.random.default_rng(8)
    for _ in range(100):
        n = rng.integers(1, 8)
        ms = [Normal(rng.normal(0, 5), rng.uniform(0.1, 4)) for _ in range(n)]
        c = rng.uniform(0.2, 3, n)
        F = rng.normal(0, 20)
        closed = solve_total(SquaredError(c), ms, F)
        newton = solve_total(SquaredError(c), ms, F, SolverOptions(force_newton=True))
        assert newton.converged
        assert np.max(np.abs(closed.f_star - newton.f_star)) < 1e-10
        assert closed.lambda_star == pytest.approx(newton.lambda_star, abs=1e-10)


@pytest.mark.parametrize("name", ["AD", "APE", "ZAPE", "SE"])
def test_randomized_constraint_satisfaction(name):
    from confor.losses import loss_from_spec

    rng = np.random.default_rng({"AD": 1, "APE": 2, "ZAPE": 3, "SE": 4}[name])
    loss = loss_from_spec(name)
    for _ in range(100):
        n = rng.integers(2, 6)
        ms = [Lognormal(rng.normal(1, 1), rng.uniform(0.01, 0.5)) for _ in range(n)]
        if name == "ZAPE":
            ms = [ZeroInflated(rng.uniform(0, 0.5), d) for d in ms]
        # a total reached from an interior multiplier
        path = loss.path(ms)
        lo, hi = max(path.bounds.lower, -50.0), min(path.bounds.upper, 50.0)
        F = float(path.forecast(lo + (hi - lo) * rng.uniform(0.02, 0.98)).sum())
        res = solve_total(loss, ms, F)
        assert res.converged, res.message
        assert abs(res.f_star.sum() - F) <= 1e-8 * max(1, F)


def test_optimality_along_constraint(margins2):
    rng = np.random.default_rng(0)
    for loss in (AbsoluteDeviation(), AbsolutePercentError(), SquaredError()):
        res = solve_total(loss, margins2, 14.7)
        base = risk(loss, margins2, res.f_star)
        for _ in range(50):
            d = rng.normal(size=2)
            d -= d.mean()
            for t in (-0.1, -0.01, 0.01, 0.1):
                assert base <= risk(loss, margins2, res.f_star + t * d) + 1e-12


def test_zape_exact_zero_component():
    ms = [ZeroInflated(0.9, Lognormal(math.log(7), 0.04)), Lognormal(math.log(14), 0.09)]
    for F in (3.0, 8.0, 12.0):
        res = solve_total(ZeroAdjustedAPE(), ms, F)
        assert res.converged
        assert res.f_star[0] == 0.0
        assert res.f_star[1] == pytest.approx(F, abs=1e-8)


def test_logt_quantile_forecasts():
    ms = [LogT(3.0, math.log(7), 0.04), LogT(3.0, math.log(14), 0.09)]
    res = solve_total(AbsoluteDeviation(), ms, 14.7)
    assert res.converged and res.f_star.sum() == pytest.approx(14.7, abs=1e-8)


@pytest.mark.parametrize("loss", [AbsoluteDeviation(), AbsolutePercentError(), WAPE()], ids=["AD", "APE", "WAPE"])
def test_empirical_margins(loss):
    Y = bivariate_joint(0.5).sample(2000, seed=3)
    joint = EmpiricalJoint(Y)
    res = solve_total(loss, joint, 14.7)
    assert res.converged
    assert res.f_star.sum() == pytest.approx(14.7, abs=1e-8)


def test_step_path_total_between_atoms():
    ms = [Empirical([1.0, 2.0, 3.0]), Empirical([10.0, 20.0])]
    res = solve_total(AbsoluteDeviation(), ms, 12.5)
    assert res.converged
    assert res.f_star.sum() == pytest.approx(12.5)
    assert 1.0 <= res.f_star[0] <= 3.0 and 10.0 <= res.f_star[1] <= 20.0


def test_solve_linear_single_column_matches_total(margins2):
    for loss in (AbsoluteDeviation(), AbsolutePercentError()):
        lin = solve_linear(loss, margins2, Linear(np.ones((2, 1)), [14.7]))
        tot = solve_total(loss, margins2, 14.7)
        assert lin.converged
        assert lin.lambda_star[0] == pytest.approx(tot.lambda_star, abs=1e-10)
        assert np.max(np.abs(lin.f_star - tot.f_star)) < 1e-9


def test_solve_linear_block_separable():
    ms = [Lognormal(math.log(7), 0.04), Lognormal(math.log(14), 0.09), Lognormal(math.log(5), 0.06)]
    A = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    res = solve_linear(AbsoluteDeviation(), ms, Linear(A, [14.7, 6.0]))
    assert res.converged
    assert np.max(np.abs(A.T @ res.f_star - [14.7, 6.0])) < 1e-8
    first = solve_total(AbsoluteDeviation(), ms[:2], 14.7)
    third = solve_total(AbsoluteDeviation(), ms[2:], 6.0)
    assert np.max(np.abs(res.f_star - np.r_[first.f_star, third.f_star])) < 1e-8


def test_solve_linear_overlapping_matches_grid():
    ms = [Lognormal(math.log(7), 0.04), Lognormal(math.log(14), 0.09), Lognormal(math.log(5), 0.06)]
    A = np.array([[1.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
    F = np.array([25.0, 6.5])
    res = solve(AbsoluteDeviation(), ms, Linear(A, F))
    assert res.converged
    assert res.f_star[0] == pytest.approx(6.5, abs=1e-8)
    rest = F[0] - F[1]
    loss = AbsoluteDeviation()
    grid = np.linspace(1e-3, rest - 1e-3, 100_001)
    r = [loss.component_risk(ms[1], g) + loss.component_risk(ms[2], rest - g) for g in grid[::50]]
    j = int(np.argmin(r)) * 50
    window = grid[max(0, j - 50): j + 51]
    best = window[int(np.argmin([loss.component_risk(ms[1], g) + loss.component_risk(ms[2], rest - g) for g in window]))]
    assert abs(res.f_star[1] - best) <= grid[1] - grid[0]


def test_linear_constraint_validation():
    with pytest.raises(DomainError):
        Linear(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 2.0])
    with pytest.raises(DomainError):
        Linear(np.ones((3, 2)), [1.0])


def test_solve_dispatch(margins2):
    a = solve(AbsoluteDeviation(), margins2, Total(14.7))
    b = solve(AbsoluteDeviation(), margins2, 14.7)
    assert np.array_equal(a.f_star, b.f_star)


def test_options_round_trip():
    o = SolverOptions.from_dict({"tol": 1e-9, "max_iter": 50, "lambda0": 0.1})
    assert o.to_dict()["tol"] == 1e-9
    with pytest.raises(DomainError):
        SolverOptions.from_dict({"tolerance": 1})


def test_max_iterations_status(margins2):
    res = solve_total(AbsoluteDeviation(), margins2, 30.0, SolverOptions(max_iter=1))
    assert res.status == Status.MAX_ITERATIONS
