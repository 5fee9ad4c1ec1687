import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opmin.errors import DomainError, NumericalOverflowError, ValidationError
from opmin.system import (CUBIC_K3, SYSTEMS, SwitchedSystem, cubic_integrator,
                          expansive_fixture, make_system, random_affine, real_cbrt,
                          register_system, rollout, sigma_cost_fixture, step,
                          validate_sequence, validate_system, zero_cost_fixture)

finite = st.floats(-50, 50, allow_nan=False)


def test_cubic_gain_constant():
    assert CUBIC_K3 == pytest.approx(-0.5 + math.sqrt(7.0 / 12.0), rel=1e-15)
    assert CUBIC_K3 == pytest.approx(0.2637626158259734, rel=1e-15)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_real_cbrt_is_odd_inverse_of_cube(v):
    r = real_cbrt(v)
    assert math.copysign(1.0, r) == math.copysign(1.0, v) or v == 0
    assert r ** 3 == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_cubic_stage_costs_at_reference_state():
    sys_ = cubic_integrator()
    x = np.array([-1.0, 1.5])
    assert sys_.stage_cost(1, x) == 3.5
    assert sys_.stage_cost(2, x) == pytest.approx(4.0, rel=1e-14)
    assert sys_.stage_cost(3, x) == pytest.approx(2.5275252316519468, rel=1e-14)
    assert sys_.measure(x) == 2.5


def test_cubic_dynamics():
    sys_ = cubic_integrator()
    np.testing.assert_array_equal(step(sys_, 1, [2.0, 5.0]), [0.0, -3.0])
    np.testing.assert_allclose(step(sys_, 2, [0.0, 8.0]), [2.0, 16.0], rtol=1e-15)
    np.testing.assert_allclose(step(sys_, 3, [0.0, 8.0]),
                               [2.0 * CUBIC_K3, 8.0 + (2.0 * CUBIC_K3) ** 3], rtol=1e-14)


@given(finite, finite)
def test_cubic_mode1_zeroes_first_coordinate(x1, x2):
    nxt = step(cubic_integrator(), 1, [x1, x2])
    assert nxt[0] == 0.0
    assert nxt[1] == pytest.approx(x2 - x1 ** 3, rel=1e-12, abs=1e-9)


@pytest.mark.xfail(strict=True, reason="modes 1,2,3 do not drive the cubic integrator to the origin")
@given(finite, finite)
@settings(max_examples=20)
def test_cubic_three_step_deadbeat(x1, x2):
    states, _ = rollout(cubic_integrator(), [x1, x2], [1, 2, 3], 1.0)
    assert np.allclose(states[-1], 0.0, atol=1e-9)


def test_zero_cost_fixture():
    sys_ = zero_cost_fixture(3, 4)
    assert sys_.mode_count == 4
    for u in sys_.modes:
        assert sys_.stage_cost(u, [1.0, -2.0, 3.0]) == 0.0
    assert sys_.measure([1.0, -2.0, 3.0]) == 6.0


def test_random_affine_reproducible():
    a, b = random_affine(seed=3, n=3, M=3), random_affine(seed=3, n=3, M=3)
    x = [0.3, -0.1, 2.0]
    for u in a.modes:
        assert a.transition(u, tuple(x)) == b.transition(u, tuple(x))
    c = random_affine(seed=4, n=3, M=3)
    assert a.transition(1, tuple(x)) != c.transition(1, tuple(x))


@given(st.integers(0, 1000), st.lists(finite, min_size=2, max_size=2))
@settings(max_examples=50)
def test_sigma_cost_fixture_contracts_under_mode_one(seed, x):
    sys_ = sigma_cost_fixture(seed=seed, n=2, M=3, contraction=0.6)
    nxt = step(sys_, 1, x)
    assert sys_.measure(nxt) == pytest.approx(0.6 * sys_.measure(x), rel=1e-12, abs=1e-12)
    assert sys_.stage_cost(2, x) == sys_.measure(x)
    assert sys_.metadata["bar_a_V"] == pytest.approx(2.5)


def test_construction_errors():
    with pytest.raises(DomainError):
        SwitchedSystem("bad", 1, 1, lambda u, s: (s, 0.0), lambda s: 0.0)
    with pytest.raises(DomainError):
        SwitchedSystem("bad", 0, 2, lambda u, s: (s, 0.0), lambda s: 0.0)
    with pytest.raises(DomainError):
        cubic_integrator().as_state([1.0, 2.0, 3.0])
    with pytest.raises(DomainError):
        cubic_integrator().stage_cost(4, [0.0, 0.0])
    with pytest.raises(DomainError):
        make_system("no_such_system")
    with pytest.raises(DomainError):
        validate_sequence([1, 4], 3)


def test_validate_system_detects_negative_cost():
    bad = SwitchedSystem.from_callables(lambda u, x: x, lambda u, x: -1.0,
                                        lambda x: 0.0, 1, 2)
    with pytest.raises(ValidationError):
        validate_system(bad)


def test_overflow_is_reported_with_step():
    sys_ = expansive_fixture()
    state = (1e308,)
    with pytest.raises(NumericalOverflowError) as info:
        sys_.advance(2, state, step=5)
    assert info.value.step == 5


def test_from_callables_and_registry():
    sys_ = SwitchedSystem.from_callables(lambda u, x: 0.5 * u * x, lambda u, x: float(x @ x),
                                         lambda x: float(abs(x).sum()), 2, 2, name="lin")
    np.testing.assert_allclose(sys_.dynamics(2, [1.0, 2.0]), [1.0, 2.0])
    register_system("lin_test", lambda: sys_)
    try:
        assert make_system("lin_test") is sys_
    finally:
        SYSTEMS.pop("lin_test")


def test_rollout_matches_manual_sum():
    sys_ = cubic_integrator()
    seq = [3, 1, 2, 3]
    states, cost = rollout(sys_, [-1.0, 1.5], seq, 0.9)
    expected, s = 0.0, (-1.0, 1.5)
    for k, u in enumerate(seq):
        s2, c = sys_.transition(u, s)
        expected += 0.9 ** k * c
        s = s2
    assert cost == pytest.approx(expected, rel=1e-15)
    assert len(states) == len(seq) + 1
    np.testing.assert_array_equal(states[-1], s)
