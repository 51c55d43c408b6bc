import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varnum.errors import DomainError
from varnum.utility import (UserSpec, alpha_fair, linear_penalty, linear_reward, log_shifted,
                            norm_convexity_margin, penalty_from_dict, power_penalty,
                            reward_from_dict, ur_eval, uv_eval, validate_assumptions)


def test_log_at_one():
    assert ur_eval(alpha_fair(1.0), 1.0) == pytest.approx((0.0, 1.0), abs=1e-15)


def test_alpha_two():
    val, d1 = ur_eval(alpha_fair(2.0), 2.0)
    assert val == pytest.approx(-0.5)
    assert d1 == pytest.approx(0.25)


def test_linear_reward():
    assert ur_eval(linear_reward(1.0), 1.7) == pytest.approx((1.7, 1.0))


def test_reward_domain_error():
    with pytest.raises(DomainError):
        ur_eval(alpha_fair(1.0), 0.0)
    with pytest.raises(DomainError):
        ur_eval(log_shifted(0.5), -0.5)


@pytest.mark.parametrize("spec, v, expected", [
    (linear_penalty(1.0), 0.25, (0.25, 1.0, 0.0)),
    (power_penalty(0.5, 0.01), 0.0, (0.1, 5.0, -250.0)),
    (power_penalty(0.5, 1.0), 3.0, (2.0, 0.25, -0.03125)),
])
def test_uv_eval(spec, v, expected):
    assert uv_eval(spec, v) == pytest.approx(expected, rel=1e-12)


def test_uv_negative_variance():
    with pytest.raises(DomainError):
        uv_eval(power_penalty(0.5, 1.0), -1e-3)


def test_norm_convexity_hand_example():
    # x1 = (1, 0), x2 = (0, 1), alpha = 1/2: sqrt(0.51) < sqrt(1.01)
    spec = power_penalty(0.5, 0.01)
    lhs = math.sqrt(0.51)
    rhs = math.sqrt(1.01)
    margin = norm_convexity_margin(spec, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0.5)
    assert margin == pytest.approx(rhs - lhs, rel=1e-12)
    assert margin > 0


def test_validate_log_power_passes():
    users = [UserSpec(0, alpha_fair(1.0), power_penalty(0.5, 0.01))]
    rep = validate_assumptions(users, 0.1, 2.0)
    assert rep.ok, rep.lines()


def test_validate_log_at_zero_fails():
    users = [UserSpec(0, alpha_fair(1.0), linear_penalty(1.0))]
    rep = validate_assumptions(users, 0.0, 2.0)
    assert not rep.ok
    assert rep.first_failure().name.startswith("reward domain")


def test_linear_penalty_is_low_class():
    assert UserSpec(0, linear_reward(), linear_penalty(2.0)).linear_penalty
    assert not UserSpec(0, linear_reward(), power_penalty(0.7, 0.1)).linear_penalty


@pytest.mark.parametrize("spec", [alpha_fair(0.5, 0.2), alpha_fair(2.5, 0.3), linear_reward(2.0),
                                  log_shifted(0.4), power_penalty(0.6, 0.1), linear_penalty(3.0)])
def test_dict_round_trip(spec):
    d = spec.to_dict()
    back = reward_from_dict(d) if "variance" not in type(spec).__name__.lower() else penalty_from_dict(d)
    assert back == spec


@given(alpha=st.floats(0.5, 0.99), delta=st.floats(0.01, 2.0), vmax=st.floats(0.1, 10.0))
def test_power_derivative_matches_difference(alpha, delta, vmax):
    spec = power_penalty(alpha, delta)
    h = 1e-5
    grid = np.linspace(h, vmax, 1000)
    fd = (spec.value(grid + h) - spec.value(grid - h)) / (2 * h)
    d1 = spec.d1(grid)
    assert np.all(d1 > 0)
    assert np.all(np.abs(d1 - fd) <= 1e-6 * np.maximum(1.0, np.abs(d1)))


@given(alpha=st.floats(0.1, 3.0), shift=st.floats(0.05, 2.0))
def test_reward_concave_increasing(alpha, shift):
    spec = alpha_fair(alpha, shift)
    grid = np.linspace(0.0, 5.0, 1000)
    d1 = spec.d1(grid)
    assert np.all(d1 > 0)
    assert np.all(np.diff(d1) <= 0)
    assert np.all(np.diff(spec.value(grid)) > 0)


@given(alpha=st.floats(0.5, 0.99), delta=st.floats(1e-3, 2.0), seed=st.integers(0, 2**31))
def test_norm_convexity_sampled(alpha, delta, seed):
    spec = power_penalty(alpha, delta)
    r = np.random.default_rng(seed)
    for _ in range(50):
        dim = int(r.integers(1, 5))
        x1, x2 = r.uniform(-2, 2, dim), r.uniform(-2, 2, dim)
        if np.allclose(x1, x2):
            continue
        assert norm_convexity_margin(spec, x1, x2, float(r.uniform(0.01, 0.99))) > 0
