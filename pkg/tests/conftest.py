import numpy as np
import pytest

import spindrift as sd
from spindrift.coupling import (
    simulate_coupled,
    validate_coupling_inequality,
    validate_lockstep,
)


@pytest.fixture(scope="session")
def zero_model():
    """Constant unit rates: lam = mu = 1 in every state."""
    return sd.build_mean_field(np.zeros((3, 3)), np.zeros(3))


@pytest.fixture(scope="session")
def antiferro_j1():
    return sd.build_cyclic(sd.CyclicParams(k=3, signs=(-1, -1, -1), J=1.0))


@pytest.fixture(scope="session")
def x0_off_center():
    return np.array([0.6, 0.5, 0.5])


@pytest.fixture(scope="session")
def traj_j1(antiferro_j1, x0_off_center):
    """Fine-grid trajectory reused by the coupling tests."""
    return sd.integrate(antiferro_j1, x0_off_center, 5.0, h=1e-3, sample_every=1e-3)


def make_validated_coupled_run(spec, traj, x0, N, T, rng):
    """Every coupled run produced by the suite passes the exact
    separation bound and the lockstep property on creation."""
    run = simulate_coupled(spec, traj, x0, N, T, rng)
    assert validate_coupling_inequality(run)
    assert validate_lockstep(run)
    return run
