import numpy as np
import pytest

import fkwaves as fk
from fkwaves import lattice, wave


@pytest.fixture(scope="session")
def classical02():
    return fk.make_model(fk.classical_fk(0.2), m0=0.005)


@pytest.fixture(scope="session")
def classical0():
    return fk.make_model(fk.classical_fk(0.0), m0=0.005)


@pytest.fixture(scope="session")
def cubic25():
    return fk.make_model(fk.cubic_bistable(1.0, 1.0, 0.25), m0=0.05)


@pytest.fixture(scope="session")
def front_run_02(classical02):
    """Shared L=0.2 front run: (trace, trajectory, propagation speed)."""
    trace, traj = lattice.run_front(classical02, M=400, T=200.0)
    slope, r2 = lattice.measure_velocity(trace)
    return trace, traj, slope


@pytest.fixture(scope="session")
def newton_sol_02(classical02, front_run_02):
    trace, traj, slope = front_run_02
    level = classical02.phase_level()
    init = wave.extract_from_lattice(traj, -slope, level, classical02, h=0.02)
    return wave.solve_newton(classical02, init)


@pytest.fixture(scope="session")
def cubic_newton(cubic25):
    init = wave.make_grid(cubic25, c=0.3)
    return wave.solve_newton(cubic25, init)


def constant_force(g0: float):
    """Whole-line custom nonlinearity F == g0 (diagonally periodic)."""
    return fk.custom_tabulated(
        lambda X, _g=g0: np.full(X.shape[1:], _g), periodic_form=True
    )
