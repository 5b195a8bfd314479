import numpy as np
import pytest

from preshock.core import Grid, Params
from preshock import initial_data as idata
from preshock import solver


@pytest.fixture(scope="session")
def grid1024():
    return Grid(1024)


@pytest.fixture(scope="session")
def params_n1():
    return Params(gamma=2.0, n=1, epsilon=1e-3, C0=16.0)


@pytest.fixture(scope="session")
def wbar_n1(grid1024):
    return idata.build_wbar(1, 16.0, grid1024)


@pytest.fixture(scope="session")
def reduction_n1(params_n1, grid1024):
    return idata.reduction_data(Params(gamma=2.0, n=1, epsilon=0.0, C0=16.0),
                                grid1024)


@pytest.fixture(scope="session")
def reduction_stop_n1(reduction_n1):
    """Near-blowup snapshot of the isentropic reduction (n=1, N=1024)."""
    state = solver.initialize(reduction_n1)
    stop, log = solver.run_to_near_blowup(state, delta_stop=5e-3)
    return stop, log


@pytest.fixture(scope="session")
def generic_run_n1(params_n1, grid1024):
    """A generic entropic run at epsilon = 1e-3 shared across modules."""
    wt, z0, k0 = idata.random_admissible(params_n1, grid1024, seed=7)
    data = idata.assemble(wt, z0, k0, (), params_n1, grid1024)
    state = solver.initialize(data)
    stop, log = solver.run_to_near_blowup(state, delta_stop=5e-3)
    return data, stop, log


def rng_field(grid, seed, amp=1.0, modes=4):
    rng = np.random.default_rng(seed)
    x = grid.nodes
    out = np.zeros(grid.N)
    for k in range(1, modes + 1):
        a, b = rng.uniform(-1, 1, 2)
        out += (a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)) / k**2
    return amp * out
