"""Offline benchmark: best allocation trajectory with the whole path known.

    max  sum_i [ (1/T) sum_t U_i^R(r_i(t)) - U_i^V(Var^T(r_i)) ]
    s.t. c_t(r(t)) <= 0, r(t) >= r_min for t = 1..T

Solved by projected gradient ascent over the full T x N trajectory. In the
inner product scaled by 1/T the gradient of slot t is
U'(r(t)) - 2 (U^V)'(Var^T) (r(t) - m^T), and the projection splits by slot.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constraint import ConstraintBatch, ConstraintSpec
from .dual import project
from .errors import ConvergenceError, SizeError
from .kkt import recover_residual
from .metrics import phi_T, var_T
from .pgrad import ascend
from .slot import _check_domain, batch_for
from .utility import user_bank

VARIABLE_CAP = 200_000
OFFLINE_TOL = 1e-6


@dataclass
class Trajectory:
    r: np.ndarray            # (T, N)
    per_user_mean: np.ndarray
    per_user_var: np.ndarray
    phi_T: float
    kkt_residual: float = float("nan")
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"r": self.r.tolist(), "per_user_mean": self.per_user_mean.tolist(),
                "per_user_var": self.per_user_var.tolist(), "phi_T": self.phi_T,
                "kkt_residual": self.kkt_residual, "iterations": self.iterations}


def as_batch(path) -> ConstraintBatch:
    if isinstance(path, ConstraintBatch):
        return path
    return ConstraintBatch(list(path))


def project_slot(r, c: ConstraintSpec, r_min: float = 0.0) -> np.ndarray:
    """Euclidean projection of r onto {x : c(x) <= 0, x >= r_min}."""
    r = np.asarray(r, dtype=float)
    return project(r[None, :], batch_for(c), r_min)[0]


def _grad(r, bank):
    m = r.mean(axis=0)
    dev = r - m
    var = np.mean(dev * dev, axis=0)
    return bank.reward.d1(r) - 2.0 * bank.penalty.d1(var) * dev


def _residual(r, G, batch, r_min) -> float:
    res, _, _ = recover_residual(G, batch.dphi(r), batch.value(r), r, r_min)
    return float(res.max())


def kkt_residual_opt_T(trajectory, path, users, r_min: float = 0.0) -> float:
    """Infinity-norm KKT violation, stationarity taken per slot (times T).

    Accepts a Trajectory or a raw (T, N) matrix.
    """
    r = trajectory.r if isinstance(trajectory, Trajectory) else trajectory
    r = np.atleast_2d(np.asarray(r, dtype=float))
    return _residual(r, _grad(r, user_bank(users)), as_batch(path), r_min)


def make_trajectory(r, users, resid=float("nan"), iters=0) -> Trajectory:
    return Trajectory(r, r.mean(axis=0), var_T(r), phi_T(r, users), resid, iters)


def solve_opt_T(path: ConstraintBatch | Sequence[ConstraintSpec], users, r_min: float = 0.0,
                tol: float = OFFLINE_TOL, max_iters: int = 100_000, r0=None,
                cap: int = VARIABLE_CAP) -> Trajectory:
    """Solve the offline problem on a realised constraint path.

    ``r0`` (for instance the online allocations on the same path) warm-starts
    the ascent; any starting point is projected first.
    """
    batch = as_batch(path)
    T, N = batch.inv_p.shape
    if T * N > cap:
        raise SizeError(f"T*N = {T * N} exceeds the variable cap {cap}")
    bank = user_bank(users)
    _check_domain(bank, r_min)
    if r0 is None:
        r0 = project(np.broadcast_to(batch.cap.min(axis=0) * 0.5, (T, N)), batch, r_min)
    r0 = np.array(np.broadcast_to(np.asarray(r0, dtype=float), (T, N)))
    d_max = float(np.max(bank.penalty.d1(np.zeros(N))))
    try:
        r, it, res = ascend(r0, lambda r: _grad(r, bank), lambda y: project(y, batch, r_min),
                            lambda r, G: _residual(r, G, batch, r_min), 1.0 / T, tol, max_iters,
                            1.0 / (2.0 * d_max), "offline solve")
    except ConvergenceError as exc:
        exc.best = make_trajectory(exc.best, users, exc.residual, max_iters)
        raise
    return make_trajectory(r, users, res, it)
