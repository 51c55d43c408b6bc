import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from varnum.constraint import sample_feasible
from varnum.scenario import (deterministic_scenario, random_scenario, two_state_scenario,
                             vanishing_penalty_scenario)
from varnum.slot import Theta, solve_optavr
from varnum.stationary import (g_bar, kkt_residual_optstat, lyapunov_descent_check, phi_pi,
                               solve_fixed_point, solve_optstat_direct, var_pi)
from varnum.utility import user_bank


@pytest.mark.parametrize("values, pi, expected", [
    ([1, 1], [0.5, 0.5], 0.0),
    ([1, 2], [0.5, 0.5], 0.25),
    ([0, 3], [2 / 3, 1 / 3], 2.0),
])
def test_var_pi(values, pi, expected):
    assert var_pi(np.array(values, float), np.array(pi)) == pytest.approx(expected, abs=1e-15)


def test_direct_deterministic():
    s = solve_optstat_direct(deterministic_scenario())
    assert s.r_pi[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert s.v_pi[0] == pytest.approx(0.0, abs=1e-12)
    assert s.phi_pi == pytest.approx(math.log(2), abs=1e-9)


def test_direct_two_state():
    s = solve_optstat_direct(two_state_scenario())
    assert s.r_pi[:, 0] == pytest.approx([1.0, 2.0], abs=1e-8)
    assert s.m_pi[0] == pytest.approx(1.5, abs=1e-8)
    assert s.v_pi[0] == pytest.approx(0.25, abs=1e-8)
    assert s.phi_pi == pytest.approx(1.25, abs=1e-8)


def test_vanishing_penalty():
    s = solve_optstat_direct(vanishing_penalty_scenario(1e-6))
    assert s.r_pi[:, 0] == pytest.approx([1.0, 3.0], abs=1e-3)
    assert s.m_pi[0] == pytest.approx(2.0, abs=1e-3)


def test_fixed_point_two_state():
    sc = two_state_scenario()
    fp = solve_fixed_point(sc, step=0.5, tol=1e-8)
    assert fp.theta.m[0] == pytest.approx(1.5, abs=1e-8)
    assert fp.v_pi[0] == pytest.approx(0.25, abs=1e-8)
    assert np.max(np.abs(fp.r_pi - solve_optstat_direct(sc).r_pi)) <= 1e-6


def test_fixed_point_deterministic_any_start():
    sc = deterministic_scenario()
    for m0 in (0.1, 1.0, 2.0):
        fp = solve_fixed_point(sc, theta0=Theta([m0], [0.5]))
        assert fp.theta.m[0] == pytest.approx(2.0, abs=1e-8)
        assert fp.v_pi[0] == pytest.approx(0.0, abs=1e-12)


def test_kkt_residual_examples():
    sc = two_state_scenario()
    assert kkt_residual_optstat(np.array([[1.0], [2.0]]), sc) <= 1e-8
    assert kkt_residual_optstat(np.array([[1.0], [2.01]]), sc) >= 1e-3
    assert kkt_residual_optstat(np.array([[1.2], [2.0]]), sc) >= 0.2 - 1e-12


def _slsqp_optstat(sc):
    pi, C, N = sc.pi, sc.n_states, sc.n_users
    bank = user_bank(sc.users)

    def f(x):
        return -phi_pi(x.reshape(C, N), pi, sc.users)

    cons = [{"type": "ineq", "fun": (lambda x, k=k: -sc.constraints[k].value(x.reshape(C, N)[k]))}
            for k in range(C)]
    x0 = np.full(C * N, sc.r_min + 1e-3)
    res = minimize(f, x0, method="SLSQP", bounds=[(sc.r_min, None)] * (C * N),
                   constraints=cons, options={"ftol": 1e-15, "maxiter": 1000})
    return res.x.reshape(C, N), -res.fun


def test_matches_independent_solver(rng):
    for k in range(6):
        sc = random_scenario(rng, family=["WN", "WNE", "WNT"][k % 3])
        s = solve_optstat_direct(sc)
        ref, val = _slsqp_optstat(sc)
        assert s.phi_pi >= val - 1e-9
        assert np.max(np.abs(s.r_pi - ref)) <= 1e-4


def test_fixed_point_identity(rng):
    for k in range(5):
        sc = random_scenario(rng, markov_chain=bool(k % 2))
        s = solve_optstat_direct(sc)
        theta = Theta(s.m_pi, s.v_pi)
        for c in range(sc.n_states):
            r = solve_optavr(theta, sc.constraints[c], sc.users, sc.r_min).r_star
            assert np.max(np.abs(r - s.r_pi[c])) <= 1e-6


def test_uniqueness_from_random_starts(rng):
    sc = random_scenario(rng, n_users=3, n_states=3)
    limits = []
    for _ in range(5):
        m0 = rng.uniform(sc.r_min, sc.r_max, 3)
        v0 = rng.uniform(0, sc.v_max, 3)
        limits.append(solve_fixed_point(sc, theta0=Theta(m0, v0)))
    nl = sc.nonlinear_mask
    for fp in limits[1:]:
        assert np.max(np.abs(fp.theta.m - limits[0].theta.m)) <= 1e-6
        if nl.any():
            assert np.max(np.abs(fp.theta.v - limits[0].theta.v)[nl]) <= 1e-6


def test_solution_beats_random_feasible(rng):
    for sc in (two_state_scenario(), random_scenario(rng, family="WNT")):
        s = solve_optstat_direct(sc)
        cands = np.stack([sample_feasible(c, sc.r_min, sc.r_max, rng, 1000)
                          for c in sc.constraints.elements], axis=1)
        vals = [phi_pi(x, sc.pi, sc.users) for x in cands]
        assert s.phi_pi >= max(vals) - 1e-12


def test_lyapunov_from_corner():
    sc = two_state_scenario()
    rep = lyapunov_descent_check(sc, Theta([0.0], [0.0]))
    assert rep.passed, rep.detail
    assert rep.terminal_residual <= 1e-6


def test_lyapunov_at_fixed_point():
    sc = two_state_scenario()
    fp = solve_fixed_point(sc)
    gm, gv, _ = g_bar(fp.theta, sc)
    assert np.max(np.abs(gm)) <= 1e-8 and np.max(np.abs(gv)) <= 1e-8
    rep = lyapunov_descent_check(sc, fp.theta)
    assert rep.passed and rep.steps == 0


def test_lyapunov_boundary_start(rng):
    sc = random_scenario(rng, n_users=2, penalties="power")
    rep = lyapunov_descent_check(sc, Theta(np.full(2, sc.r_min), np.full(2, sc.v_max)))
    assert rep.left_H == 0
    assert rep.passed, rep.detail


@given(seed=st.integers(0, 5000))
def test_solution_invariants(seed):
    sc = random_scenario(np.random.default_rng(seed), family=["WN", "WNE", "WNT"][seed % 3])
    s = solve_optstat_direct(sc)
    assert np.all(sc.batch.value(s.r_pi) <= 1e-10)
    assert np.all((s.m_pi >= sc.r_min) & (s.m_pi <= sc.r_max))
    assert np.all((s.v_pi >= 0) & (s.v_pi <= sc.v_max))
    assert np.allclose(s.m_pi, sc.pi @ s.r_pi, atol=1e-10)
    assert np.allclose(s.v_pi, var_pi(s.r_pi, sc.pi), atol=1e-10)
    assert s.kkt_residual <= 1e-6


def test_expected_slot_value_equals_stationary_objective(rng):
    from varnum.stationary import expected_h
    for k in range(4):
        sc = random_scenario(rng, family=["WN", "WNE", "WNT"][k % 3])
        s = solve_optstat_direct(sc)
        assert expected_h(Theta(s.m_pi, s.v_pi), sc) == pytest.approx(s.phi_pi, abs=1e-7)
