"""Online allocation with tracked mean and variance statistics.

Each slot solves the slot problem at the current statistics theta_hat = (m, v),
then moves the statistics toward the new allocation with gain 1/(t+1). With
that gain the mean is exactly the running average of past allocations.

Users with linear penalties never need their variance: (U^V)' is constant, so
their v stays at its initial value. ``v_track`` is a diagnostic copy of the
variance recursion applied to every user; it equals v_hat on users with a
nonlinear penalty and gives a comparable variance estimate for the others.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraint import ConstraintBatch, ConstraintSpec
from .dual import solve_separable
from .errors import ValidationError
from .process import sample_path
from .slot import FEAS_TOL, Theta, _check_domain, batch_for
from .utility import user_bank

CLIP_TOL = 1e-12


@dataclass(frozen=True)
class AvrState:
    theta_hat: Theta
    t: int
    v0: np.ndarray = field(repr=False)
    v_track: np.ndarray
    r_min: float
    r_max: float
    v_max: float


@dataclass
class AvrTrace:
    allocations: np.ndarray          # (T, N)
    constraint_indices: np.ndarray   # (T,)
    kkt_residuals: np.ndarray        # (T,)
    snapshot_t: np.ndarray           # (K,)
    snapshot_m: np.ndarray           # (K, N)
    snapshot_v: np.ndarray           # (K, N)
    snapshot_v_track: np.ndarray     # (K, N)
    final: AvrState
    seed: int
    stride: int
    max_clip: float = 0.0            # largest amount v had to be clipped by
    h_violations: int = 0            # slots where theta_hat left H beyond CLIP_TOL

    @property
    def T(self) -> int:
        return len(self.allocations)

    @property
    def mean(self) -> np.ndarray:
        return self.allocations.mean(axis=0)

    @property
    def var_T(self) -> np.ndarray:
        dev = self.allocations - self.allocations.mean(axis=0)
        return np.mean(dev * dev, axis=0)

    @property
    def m_hat(self) -> np.ndarray:
        return self.final.theta_hat.m

    @property
    def v_hat(self) -> np.ndarray:
        return self.final.theta_hat.v


def default_theta0(n: int, r_min: float, r_max: float) -> Theta:
    return Theta(np.full(n, 0.5 * (r_min + r_max)), np.zeros(n))


def avr_init(theta0: Theta, r_min: float, r_max: float, v_max: float | None = None) -> AvrState:
    """Initial state; rejects statistics outside the box H."""
    if v_max is None:
        v_max = (r_max - r_min) ** 2
    if not theta0.in_box(r_min, r_max, v_max):
        raise ValidationError(
            f"initial statistics outside H = [{r_min}, {r_max}]^N x [0, {v_max}]^N")
    return AvrState(theta0, 0, theta0.v.copy(), theta0.v.copy(), float(r_min), float(r_max),
                    float(v_max))


class _SlotEngine:
    """Per-scenario precomputation shared by every slot of a run."""

    def __init__(self, users, batches, r_min: float):
        self.bank = user_bank(users)
        _check_domain(self.bank, r_min)
        self.batches = batches
        self.r_min = r_min
        self.nonlinear = self.bank.nonlinear

    def solve(self, m, v, k):
        batch = self.batches[k]
        pen = self.bank.penalty
        d2 = 2.0 * pen.d1(v)
        res = solve_separable(self.bank.reward, 1.0, d2, m, batch, self.r_min)
        r = res.x[0]
        mu = res.mu[0]
        gamma = res.gamma[0]
        stat = self.bank.reward.d1(r) - d2 * (r - m) + gamma - mu * batch.dphi(r[None, :])[0]
        cval = float(batch.value(r)[0])
        resid = max(float(np.abs(stat).max()), abs(mu * cval), max(cval, 0.0),
                    float(np.abs(gamma * (r - self.r_min)).max()),
                    float(max(self.r_min - r.min(), 0.0)))
        return r, resid, cval


def _update(state: AvrState, r, nonlinear):
    m, v = state.theta_hat.m, state.theta_hat.v
    a = 1.0 / (state.t + 1)
    dev2 = (r - m) ** 2
    m_new = m + a * (r - m)
    v_raw = v + a * (dev2 - v)
    v_new = np.where(nonlinear, v_raw, state.v0)
    track_raw = state.v_track + a * (dev2 - state.v_track)
    clip = max(float(np.max(-v_new, initial=0.0)), float(np.max(v_new - state.v_max, initial=0.0)),
               float(np.max(-track_raw, initial=0.0)),
               float(np.max(track_raw - state.v_max, initial=0.0)))
    v_new = np.clip(v_new, 0.0, state.v_max)
    track = np.clip(track_raw, 0.0, state.v_max)
    new = AvrState(Theta(m_new, v_new), state.t + 1, state.v0, track, state.r_min,
                   state.r_max, state.v_max)
    return new, clip


def avr_step(state: AvrState, c_next: ConstraintSpec, users):
    """One slot: allocate for ``c_next`` and update the statistics.

    Returns ``(allocation, new_state)``.
    """
    eng = _SlotEngine(users, [batch_for(c_next)], state.r_min)
    r, _, _ = eng.solve(state.theta_hat.m, state.theta_hat.v, 0)
    new, clip = _update(state, r, eng.nonlinear)
    assert clip <= CLIP_TOL, f"variance update left [0, v_max] by {clip:.3g}"
    assert new.theta_hat.in_box(state.r_min, state.r_max, state.v_max, CLIP_TOL)
    return r.copy(), new


def run_avr(scenario, T: int, seed: int, theta0: Theta | None = None, stride: int = 100,
            path=None) -> AvrTrace:
    """Run the online allocator for T slots on the path drawn from ``seed``.

    ``path`` may supply precomputed constraint indices (e.g. shared with the
    offline solver); it must match what ``sample_path`` would draw for reuse
    of the seed to be meaningful.
    """
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    if stride < 1:
        raise ValueError("stride must be positive")
    idx = sample_path(scenario.process, T, seed).indices if path is None else np.asarray(path)
    if len(idx) != T:
        raise ValueError("path length does not match T")
    n = scenario.n_users
    if theta0 is None:
        theta0 = default_theta0(n, scenario.r_min, scenario.r_max)
    state = avr_init(theta0, scenario.r_min, scenario.r_max, scenario.v_max)
    full: ConstraintBatch = scenario.batch
    eng = _SlotEngine(scenario.users, [full.take([k]) for k in range(scenario.n_states)],
                      scenario.r_min)

    alloc = np.empty((T, n))
    resid = np.empty(T)
    snaps_t, snaps_m, snaps_v, snaps_tr = [0], [state.theta_hat.m], [state.theta_hat.v], [state.v_track]
    max_clip = 0.0
    h_viol = 0
    lo, hi, vmax = scenario.r_min, scenario.r_max, scenario.v_max
    for t in range(T):
        r, res, cval = eng.solve(state.theta_hat.m, state.theta_hat.v, idx[t])
        if cval > FEAS_TOL or r.min() < lo - FEAS_TOL:
            raise AssertionError(f"infeasible allocation at slot {t + 1}: c = {cval:.3g}")
        alloc[t] = r
        resid[t] = res
        state, clip = _update(state, r, eng.nonlinear)
        max_clip = max(max_clip, clip)
        th = state.theta_hat
        if not th.in_box(lo, hi, vmax, CLIP_TOL):
            h_viol += 1
        if state.t % stride == 0 or t == T - 1:
            snaps_t.append(state.t)
            snaps_m.append(th.m)
            snaps_v.append(th.v)
            snaps_tr.append(state.v_track)
    assert max_clip <= CLIP_TOL, f"variance update left [0, v_max] by {max_clip:.3g}"
    return AvrTrace(alloc, idx.astype(np.int64), resid, np.array(snaps_t), np.array(snaps_m),
                    np.array(snaps_v), np.array(snaps_tr), state, seed, stride, max_clip, h_viol)
