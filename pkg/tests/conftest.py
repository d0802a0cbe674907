import numpy as np
import pytest

import stabmap as sm
from stabmap.equilibrium import solve_equilibrium


@pytest.fixture(scope="session")
def spec1():
    return sm.default_spec(1)


@pytest.fixture(scope="session")
def spec2():
    return sm.default_spec(2)


@pytest.fixture(scope="session")
def spec3():
    return sm.default_spec(3)


@pytest.fixture(scope="session")
def eq1(spec1):
    return solve_equilibrium(spec1)


@pytest.fixture(scope="session")
def eq2(spec2):
    return solve_equilibrium(spec2)


@pytest.fixture(scope="session")
def eq3(spec3):
    return solve_equilibrium(spec3)


def random_valid_state(spec, rng, scale=0.5):
    """Random state with u_dc kept positive and omega_r near nominal."""
    x = rng.normal(0.0, scale, spec.n_states)
    for j in range(spec.n_units):
        x[19 * j + 4] = 1.0 + 0.2 * rng.standard_normal()   # omega_r
        x[19 * j + 7] = 1.2 + 0.3 * rng.random()            # u_dc
    return x
