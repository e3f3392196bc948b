import numpy as np
import pytest
from hypothesis import settings

from beamforge.array import AngleGrid, ArrayGeometry, TargetPattern, steering_matrix
from beamforge.trainer import Problem, TrainPlan, init_state

ACCEPTANCE_LINES = []

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def random_instance(seed, n_t=4, n_rf=2, m_rf=1, m_t=2, k=5, T=8, bias_scale=1.0):
    """Small problem with a random target and a non-trivial starting state."""
    rng = np.random.default_rng(seed)
    grid = AngleGrid(np.sort(rng.choice(np.arange(-85, 86), size=k, replace=False)).astype(float))
    target = TargetPattern(grid, rng.uniform(0, 2, k), rng.uniform(0.5, 2, k))
    problem = Problem(steering_matrix(ArrayGeometry(n_t), grid), target, n_rf, m_rf, m_t)
    plan = TrainPlan(snapshots=T, seed=seed)
    state = init_state(problem, plan)
    for g in ("b1", "b2"):
        if state.params[g] is not None:
            state.params[g] = bias_scale * rng.standard_normal(state.params[g].shape)
    return problem, plan, state, rng


@pytest.fixture
def small_instance():
    return random_instance(11)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
