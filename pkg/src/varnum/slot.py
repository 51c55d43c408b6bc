"""Per-slot surrogate problem solved by the online allocator.

Given tracked statistics theta = (m, v) and the current constraint c, solve

    max_r  sum_i U_i^R(r_i) - (U_i^V)'(v_i) (r_i - m_i)^2  + h0(v)
    s.t.   c(r) <= 0,  r_i >= r_min

The optimal value h(theta, c) includes the allocation-independent correction
h0(v) = sum_i (U_i^V)'(v_i) v_i - U_i^V(v_i), which makes the partial
derivatives of h take the simple closed forms returned by ``h_gradient``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .constraint import ConstraintBatch, ConstraintSpec
from .dual import solve_separable
from .errors import ConvergenceError, DomainError
from .utility import UserSpec, user_bank

KKT_TOL = 1e-8
FEAS_TOL = 1e-10


@dataclass(frozen=True)
class Theta:
    m: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", np.asarray(self.m, dtype=float).copy())
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).copy())
        if self.m.shape != self.v.shape or self.m.ndim != 1:
            raise ValueError("m and v must be vectors of equal length")

    def in_box(self, r_min: float, r_max: float, v_max: float, tol: float = 0.0) -> bool:
        return bool(np.all(self.m >= r_min - tol) and np.all(self.m <= r_max + tol)
                    and np.all(self.v >= -tol) and np.all(self.v <= v_max + tol))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.m, self.v])


@dataclass
class SlotSolution:
    r_star: np.ndarray
    mu_star: float
    gamma_star: np.ndarray
    h_value: float
    kkt_residual: float


@lru_cache(maxsize=4096)
def batch_for(spec: ConstraintSpec) -> ConstraintBatch:
    return ConstraintBatch([spec])


def _check_domain(bank, r_min: float) -> None:
    lower = bank.reward.lower
    if np.any(~bank.reward.lin_mask & ~(r_min > lower)):
        raise DomainError("reward utility is singular at r_min; add a shift or raise r_min")


def solve_batch(m, v, batch: ConstraintBatch, users: Sequence[UserSpec], r_min: float):
    """Solve the slot problem for every row of ``batch`` at one (m, v).

    Returns ``(r, mu, gamma)`` with shapes (B, N), (B,), (B, N).
    """
    bank = user_bank(users)
    _check_domain(bank, r_min)
    m = np.asarray(m, dtype=float)
    d = bank.penalty.d1(np.asarray(v, dtype=float))
    res = solve_separable(bank.reward, 1.0, 2.0 * d, m, batch, r_min)
    return res.x, res.mu, res.gamma


def h0_value(v, users: Sequence[UserSpec]) -> float:
    bank = user_bank(users)
    v = np.asarray(v, dtype=float)
    return float(np.sum(bank.penalty.d1(v) * v - bank.penalty.value(v)))


def h_of(r, m, v, users: Sequence[UserSpec]):
    """h evaluated at allocation(s) ``r``; broadcasts over leading axes of r."""
    bank = user_bank(users)
    r = np.asarray(r, dtype=float)
    pen = bank.penalty
    d = pen.d1(v)
    return np.sum(bank.reward.value(r) - pen.value(v) + d * (v - (r - m) ** 2), axis=-1)


def _residuals(r, mu, gamma, m, v, batch: ConstraintBatch, users, r_min):
    bank = user_bank(users)
    d = bank.penalty.d1(np.asarray(v, dtype=float))
    r = np.atleast_2d(r)
    mu = np.atleast_1d(mu)
    gamma = np.atleast_2d(gamma)
    stat = bank.reward.d1(r) - 2.0 * d * (r - m) + gamma - mu[:, None] * batch.dphi(r)
    cval = batch.value(r)
    parts = [
        np.abs(stat).max(axis=1),
        np.abs(mu * cval),
        np.abs(gamma * (r - r_min)).max(axis=1),
        np.maximum(cval, 0.0),
        np.maximum(r_min - r, 0.0).max(axis=1),
        np.maximum(-mu, 0.0),
        np.maximum(-gamma, 0.0).max(axis=1),
    ]
    return np.max(np.vstack(parts), axis=0)


def solve_optavr(theta: Theta, c: ConstraintSpec, users: Sequence[UserSpec],
                 r_min: float = 0.0) -> SlotSolution:
    """Exact solution of the slot problem with a KKT certificate."""
    batch = batch_for(c)
    r, mu, gamma = solve_batch(theta.m, theta.v, batch, users, r_min)
    h = h_of(r[0], theta.m, theta.v, users)
    if not np.isfinite(h):
        raise DomainError("slot objective is not finite at the solution")
    resid = float(_residuals(r, mu, gamma, theta.m, theta.v, batch, users, r_min)[0])
    sol = SlotSolution(r[0].copy(), float(mu[0]), gamma[0].copy(), float(h), resid)
    if resid > KKT_TOL:
        raise ConvergenceError(f"slot solve KKT residual {resid:.3g} above {KKT_TOL}",
                               best=sol, residual=resid)
    return sol


def h_value(theta: Theta, c: ConstraintSpec, users, r_min: float = 0.0) -> float:
    return solve_optavr(theta, c, users, r_min).h_value


def h_gradient(theta: Theta, c: ConstraintSpec, users, r_min: float = 0.0):
    """Closed-form partials of h in m and v at the slot optimum."""
    sol = solve_optavr(theta, c, users, r_min)
    bank = user_bank(users)
    dev = sol.r_star - theta.m
    dh_dm = 2.0 * dev * bank.penalty.d1(theta.v)
    dh_dv = bank.penalty.d2(theta.v) * (theta.v - dev ** 2)
    return dh_dm, dh_dv


def kkt_residual_optavr(solution: SlotSolution, theta: Theta, c: ConstraintSpec, users,
                        r_min: float = 0.0) -> float:
    """Infinity norm of the stationarity, slackness, feasibility and sign violations."""
    return float(_residuals(solution.r_star, solution.mu_star, solution.gamma_star,
                            theta.m, theta.v, batch_for(c), users, r_min)[0])


def batch_residuals(r, mu, gamma, m, v, batch, users, r_min) -> np.ndarray:
    return _residuals(r, mu, gamma, m, v, batch, users, r_min)
