import numpy as np
import pytest

import admmflow as af
from admmflow.flows import IntegratorConfig

FIG1_SEED = 38  # default benchmark seed; pinned alongside the CLI default


@pytest.fixture(scope="session")
def one_d_problem():
    # f(x) = x^2/2, g = 0, A = [1]: the simplest split problem
    return af.SplitProblem(
        af.QuadraticFunction([[1.0]]), af.QuadraticFunction.zero(1), [[1.0]]
    )


@pytest.fixture(scope="session")
def pd_2d_problem():
    # strongly convex 2-D instance with nonzero linear terms and g != 0
    f = af.QuadraticFunction([[2.0, 0.5], [0.5, 1.0]], [1.0, -1.0])
    g = af.QuadraticFunction([[1.0, 0.0], [0.0, 0.5]], [0.2, 0.1])
    A = [[1.0, 0.4], [0.0, 1.5]]
    return af.SplitProblem(f, g, A)


@pytest.fixture(scope="session")
def figure1_problem():
    return af.gen_figure1_problem(60, 40, 10.0, 100.0, seed=FIG1_SEED)


@pytest.fixture(scope="session")
def figure1_x0(figure1_problem):
    return 5.0 * np.ones(figure1_problem.n)


@pytest.fixture(scope="session")
def figure1_rk4_traj(figure1_problem, figure1_x0):
    config = IntegratorConfig(h=1e-3, t0=0.0, t_end=30.0)
    return af.rk4_integrate(figure1_problem, figure1_x0, config)


@pytest.fixture(scope="session")
def figure1_symplectic_traj(figure1_problem, figure1_x0):
    config = IntegratorConfig(h=1e-2, t0=1e-2, t_end=50.0, r=10.0)
    return af.aadmm_flow_integrate(figure1_problem, figure1_x0, config)
