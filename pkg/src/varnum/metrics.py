"""Time-average objective, population variance, and the online-vs-offline gap."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .utility import user_bank


def var_T(series) -> np.ndarray:
    """Population variance (1/T) along axis 0, two-pass."""
    x = np.asarray(series, dtype=float)
    if x.shape[0] == 0:
        raise ValueError("variance of an empty series")
    dev = x - x.mean(axis=0)
    out = np.mean(dev * dev, axis=0)
    return float(out) if out.ndim == 0 else out


def phi_T(trajectory, users) -> float:
    """Mean reward minus variance penalty, summed over users."""
    r = np.asarray(trajectory, dtype=float)
    if r.ndim == 1:
        r = r[:, None]
    bank = user_bank(users)
    lower = bank.reward.lower
    if np.any(~bank.reward.lin_mask & ~(r > lower).all(axis=0)):
        raise DomainError("trajectory leaves the reward utility domain")
    return float(np.sum(bank.reward.value(r).mean(axis=0) - bank.penalty.value(var_T(r))))


@dataclass
class GapReport:
    horizons: list
    phi_avr: list = field(default_factory=list)
    phi_oracle: list = field(default_factory=list)
    gap: list = field(default_factory=list)
    oracle_residual: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.horizons, self.phi_avr, self.phi_oracle, self.gap))


def gap_experiment(scenario, horizons, seed: int, oracle_tol: float = 1e-6,
                   theta0=None) -> GapReport:
    """Online and offline objective on the same realised path for each horizon.

    The offline solve is warm-started from the online allocations; its ascent
    is monotone so the oracle can never end below them.
    """
    from .avr import run_avr
    from .offline import solve_opt_T
    from .process import sample_path

    rep = GapReport(list(horizons))
    for T in rep.horizons:
        idx = sample_path(scenario.process, T, seed).indices
        trace = run_avr(scenario, T, seed, theta0=theta0, path=idx)
        f_avr = phi_T(trace.allocations, scenario.users)
        oracle = solve_opt_T(scenario.batch.take(idx), scenario.users, scenario.r_min,
                             tol=oracle_tol, r0=trace.allocations)
        rep.phi_avr.append(f_avr)
        rep.phi_oracle.append(oracle.phi_T)
        rep.gap.append(oracle.phi_T - f_avr)
        rep.oracle_residual.append(oracle.kkt_residual)
    return rep
