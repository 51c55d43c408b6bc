"""Stationary problem: one allocation per constraint state, weighted by pi.

    max  sum_i [ sum_c pi(c) U_i^R(r_i(c)) - U_i^V(Var^pi(r_i)) ]
    s.t. c(r(c)) <= 0, r(c) >= r_min for every state c

Two independent solvers are provided. ``solve_optstat_direct`` runs projected
gradient ascent in the pi-weighted inner product, in which the projection
onto the product of per-state feasible sets is an ordinary per-row Euclidean
projection. ``solve_fixed_point`` iterates the averaged slot-problem map
theta <- theta + step * g_bar(theta); at its fixed point the per-state slot
solutions solve the stationary problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import project
from .errors import ConvergenceError
from .kkt import recover_residual
from .pgrad import ascend
from .slot import Theta, h_of, solve_batch
from .utility import user_bank

DIRECT_TOL = 1e-8  # stricter than the 1e-6 certificate so cross-solver checks have margin
DIRECT_MAX_ITERS = 100_000


@dataclass
class StationarySolution:
    r_pi: np.ndarray      # (C, N)
    m_pi: np.ndarray
    v_pi: np.ndarray
    phi_pi: float
    kkt_residual: float
    iterations: int = 0
    method: str = ""
    theta: Theta | None = None   # fixed-point statistics, when available

    def to_dict(self) -> dict:
        out = {
            "r_pi": self.r_pi.tolist(), "m_pi": self.m_pi.tolist(), "v_pi": self.v_pi.tolist(),
            "phi_pi": self.phi_pi, "kkt_residual": self.kkt_residual,
            "iterations": self.iterations, "method": self.method,
        }
        if self.theta is not None:
            out["theta"] = {"m": self.theta.m.tolist(), "v": self.theta.v.tolist()}
        return out


def var_pi(values, pi) -> np.ndarray:
    """pi-weighted population variance along the state axis (axis 0)."""
    values = np.asarray(values, dtype=float)
    pi = np.asarray(pi, dtype=float)
    if values.shape[0] != pi.shape[0]:
        raise ValueError("values and pi disagree on the number of states")
    w = pi.reshape((-1,) + (1,) * (values.ndim - 1))
    mean = np.sum(w * values, axis=0)
    return np.sum(w * (values - mean) ** 2, axis=0)


def phi_pi(r, pi, users) -> float:
    r = np.atleast_2d(np.asarray(r, dtype=float))
    bank = user_bank(users)
    pi = np.asarray(pi, dtype=float)
    return float(np.sum(pi @ bank.reward.value(r)) - np.sum(bank.penalty.value(var_pi(r, pi))))


def _grad(r, pi, bank):
    """Per-state gradient divided by pi(c) (the gradient in the pi inner product)."""
    m = pi @ r
    var = pi @ (r - m) ** 2
    return bank.reward.d1(r) - 2.0 * bank.penalty.d1(var) * (r - m)


def _residual(r, scenario) -> float:
    pi = scenario.pi
    bank = user_bank(scenario.users)
    G = pi[:, None] * _grad(r, pi, bank)
    batch = scenario.batch
    res, _, _ = recover_residual(G, batch.dphi(r), batch.value(r), r, scenario.r_min)
    return float(res.max())


def kkt_residual_optstat(solution, scenario) -> float:
    """Infinity-norm violation of the stationary KKT system.

    Accepts a StationarySolution or a raw (C, N) allocation matrix.
    """
    r = solution.r_pi if isinstance(solution, StationarySolution) else solution
    return _residual(np.atleast_2d(np.asarray(r, dtype=float)), scenario)


def _package(r, scenario, iters, method, theta=None) -> StationarySolution:
    pi = scenario.pi
    return StationarySolution(r.copy(), pi @ r, var_pi(r, pi), phi_pi(r, pi, scenario.users),
                              _residual(r, scenario), iters, method, theta)


def solve_optstat_direct(scenario, tol: float = DIRECT_TOL, max_iters: int = DIRECT_MAX_ITERS,
                         r0=None) -> StationarySolution:
    """Projected gradient ascent in the pi inner product, stopped on the KKT residual."""
    pi = scenario.pi
    bank = user_bank(scenario.users)
    batch = scenario.batch
    r_min = scenario.r_min
    C, N = scenario.n_states, scenario.n_users
    if r0 is None:
        r0 = np.full((C, N), 0.5 * (r_min + scenario.r_max))
    r0 = np.array(np.broadcast_to(np.asarray(r0, dtype=float), (C, N)))
    d_max = float(np.max(bank.penalty.d1(np.zeros(N))))

    def residual(r, G):
        res, _, _ = recover_residual(pi[:, None] * G, batch.dphi(r), batch.value(r), r, r_min)
        return float(res.max())

    try:
        r, it, _ = ascend(r0, lambda r: _grad(r, pi, bank), lambda y: project(y, batch, r_min),
                          residual, pi[:, None], tol, max_iters, 1.0 / (2.0 * d_max),
                          "direct stationary solve")
    except ConvergenceError as exc:
        exc.best = _package(exc.best, scenario, max_iters, "direct")
        raise
    return _package(r, scenario, it, "direct")


def g_bar(theta: Theta, scenario):
    """Mean-field drift: (E r* - m, 1{nonlinear}(E (r* - m)^2 - v)) and the per-state r*."""
    r, _, _ = solve_batch(theta.m, theta.v, scenario.batch, scenario.users, scenario.r_min)
    pi = scenario.pi
    gm = pi @ r - theta.m
    gv = pi @ (r - theta.m) ** 2 - theta.v
    gv = np.where(scenario.nonlinear_mask, gv, 0.0)
    return gm, gv, r


def expected_h(theta: Theta, scenario, r=None) -> float:
    if r is None:
        r, _, _ = solve_batch(theta.m, theta.v, scenario.batch, scenario.users, scenario.r_min)
    return float(scenario.pi @ h_of(r, theta.m, theta.v, scenario.users))


def _clip_theta(m, v, scenario):
    return Theta(np.clip(m, scenario.r_min, scenario.r_max), np.clip(v, 0.0, scenario.v_max))


def solve_fixed_point(scenario, step: float = 0.5, tol: float = 1e-8, max_iters: int = 100_000,
                      theta0: Theta | None = None) -> StationarySolution:
    """Iterate theta <- theta + step * g_bar(theta) until the drift vanishes."""
    if not 0.0 < step <= 1.0:
        raise ValueError("step must lie in (0, 1]")
    n = scenario.n_users
    if theta0 is None:
        theta0 = Theta(np.full(n, 0.5 * (scenario.r_min + scenario.r_max)), np.zeros(n))
    theta = theta0
    tail = []
    for it in range(max_iters + 1):
        gm, gv, r = g_bar(theta, scenario)
        size = max(float(np.abs(gm).max()), float(np.abs(gv).max()))
        if size <= tol:
            return _package(r, scenario, it, "fixed-point", theta)
        tail.append(size)
        tail = tail[-10:]
        theta = _clip_theta(theta.m + step * gm, theta.v + step * gv, scenario)
    raise ConvergenceError(f"fixed-point iteration did not reach {tol}; last drifts {tail}",
                           best=theta, residual=tail[-1])


def h_star_residual(theta: Theta, scenario, r=None) -> float:
    """Violation of E r* = m (all users) and Var r* = v (nonlinear-penalty users)."""
    if r is None:
        _, _, r = g_bar(theta, scenario)
    pi = scenario.pi
    mean = pi @ r
    var = var_pi(r, pi)
    out = float(np.abs(mean - theta.m).max())
    nl = scenario.nonlinear_mask
    if np.any(nl):
        out = max(out, float(np.abs(var - theta.v)[nl].max()))
    return out


@dataclass
class LyapunovReport:
    expected_h: np.ndarray
    max_decrease: float
    terminal_residual: float
    passed: bool
    theta_final: Theta
    steps: int
    left_H: int = 0
    detail: str = field(default="")


def lyapunov_descent_check(scenario, theta0: Theta, step: float = 1e-2, iters: int = 200_000,
                           tol: float = 1e-6, slack: float = 1e-8) -> LyapunovReport:
    """Follow the Euler discretisation of the mean-field ODE and watch E[h].

    Stops once the terminal conditions hold to ``tol`` or after ``iters`` steps.
    """
    theta = theta0
    values = []
    left = 0
    resid = np.inf
    k = 0
    for k in range(iters + 1):
        gm, gv, r = g_bar(theta, scenario)
        values.append(expected_h(theta, scenario, r))
        resid = h_star_residual(theta, scenario, r)
        if resid <= tol:
            break
        m_new = theta.m + step * gm
        v_new = theta.v + step * gv
        if (np.any(m_new < scenario.r_min - 1e-12) or np.any(m_new > scenario.r_max + 1e-12)
                or np.any(v_new < -1e-12) or np.any(v_new > scenario.v_max + 1e-12)):
            left += 1
        theta = _clip_theta(m_new, v_new, scenario)
    values = np.asarray(values)
    drops = -np.diff(values) if len(values) > 1 else np.zeros(1)
    max_dec = float(max(drops.max(), 0.0))
    passed = max_dec <= slack and resid <= tol and left == 0
    detail = f"max decrease {max_dec:.3g}, terminal residual {resid:.3g}, steps {k}"
    return LyapunovReport(values, max_dec, float(resid), bool(passed), theta, k, left, detail)
