"""Decision-analytic constrained point forecasting."""
from .distributions import (
    Empirical,
    EmpiricalJoint,
    Exponential,
    Lognormal,
    LogT,
    MultivariateLognormal,
    MultivariateNormal,
    Normal,
    Truncated,
    ZeroInflated,
    joint_from_spec,
    marginal_from_spec,
    size_weighted,
)
from .losses import (
    WAPE,
    AbsoluteDeviation,
    AbsolutePercentError,
    LambdaBounds,
    SquaredError,
    ZeroAdjustedAPE,
    loss_from_spec,
)
from .solver import Linear, SolveResult, SolverOptions, Status, Total, attainable_range, solve, solve_linear, solve_total

__version__ = "0.1.0"
