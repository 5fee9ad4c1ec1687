import math

import numpy as np
import pytest

from opmin.system import SwitchedSystem


def naive_cost(system, x, seq, gamma):
    """Discounted cost of ``seq`` summed independently of the library rollout."""
    state = system.as_state(x)
    total = 0.0
    for k, u in enumerate(seq):
        state, c = system.transition(u, state)
        total = total + gamma ** k * c
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def scalar_system(costs, M=2):
    """Scalar system with ``x+ = x + u`` and stage cost ``costs[u-1] * |x| + u``."""

    def transition(mode, state):
        (x,) = state
        return (x + mode,), costs[mode - 1] * abs(x) + mode

    return SwitchedSystem("scalar", 1, M, transition, lambda s: abs(s[0]))


def close(a, b, rel=1e-9):
    return math.isclose(a, b, rel_tol=rel, abs_tol=1e-12)
