import numpy as np
import pytest

from confor.distributions import Lognormal, MultivariateLognormal

M2 = np.log([7.0, 14.0])
V2 = np.array([0.04, 0.09])


def bivariate_cov(rho):
    s = np.sqrt(V2[0] * V2[1])
    return np.array([[V2[0], rho * s], [rho * s, V2[1]]])


def bivariate_joint(rho):
    return MultivariateLognormal(M2, bivariate_cov(rho))


@pytest.fixture
def margins2():
    return [Lognormal(M2[0], V2[0]), Lognormal(M2[1], V2[1])]


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
