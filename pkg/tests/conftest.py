import numpy as np
import pytest

from epmatch.integrate import IntegratorConfig
from epmatch.scenarios import scenario_heavy_top, scenario_spherical_pendulum, simulate, simulate_implicit


@pytest.fixture(scope="session")
def sp():
    return scenario_spherical_pendulum()


@pytest.fixture(scope="session")
def ht():
    return scenario_heavy_top()


@pytest.fixture(scope="session")
def runs():
    """Full-horizon matched and implicit runs at the default step, computed once."""
    out = {}
    for sc in (scenario_spherical_pendulum(), scenario_heavy_top()):
        cfg = IntegratorConfig(t_end=sc.t_end)
        out[sc.name] = (sc, simulate(sc, cfg), simulate_implicit(sc, cfg))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng, params, scale=1.0):
    from epmatch.dynamics import ReducedState

    omega = scale * rng.normal(size=3)
    if params.degenerate:
        omega[2] = 0.0
    gamma = rng.normal(size=3)
    return ReducedState(omega, scale * rng.normal(size=3), gamma / np.linalg.norm(gamma), rng.normal())
