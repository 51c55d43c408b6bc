"""Reward utilities U^R and variance penalties U^V.

Both families are closed and parametric so the modelling assumptions can be
checked numerically. Every spec is a frozen dataclass; ``RewardBank`` and
``PenaltyBank`` pack a list of users into arrays for vectorised evaluation
inside the solvers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError, ValidationReport

GRID_POINTS = 1000


@dataclass(frozen=True)
class RewardUtility:
    """Concave increasing reward utility.

    ``alpha_fair`` is ``log(r + shift)`` for ``alpha == 1`` and
    ``(r + shift)**(1 - alpha) / (1 - alpha)`` otherwise. ``log_shifted`` is the
    ``alpha == 1`` member with a mandatory positive shift. ``linear`` is
    ``slope * r``.
    """

    kind: str
    alpha: float = 1.0
    shift: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if self.kind == "linear":
            if not self.slope > 0:
                raise ValidationError("linear reward utility needs slope > 0")
        elif self.kind == "alpha_fair":
            if not self.alpha > 0:
                raise ValidationError("alpha_fair needs alpha > 0")
            if not self.shift >= 0:
                raise ValidationError("alpha_fair needs shift >= 0")
        elif self.kind == "log_shifted":
            if not self.shift > 0:
                raise ValidationError("log_shifted needs shift > 0")
            object.__setattr__(self, "alpha", 1.0)
        else:
            raise ValidationError(f"unknown reward utility kind {self.kind!r}")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def lower_limit(self) -> float:
        """Infimum of the open domain; -inf for linear utilities."""
        return -math.inf if self.is_linear else -self.shift

    def value(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_linear:
            return self.slope * r
        z = r + self.shift
        if self.alpha == 1.0:
            return np.log(z)
        return z ** (1.0 - self.alpha) / (1.0 - self.alpha)

    def d1(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_linear:
            return np.full_like(r, self.slope)
        return (r + self.shift) ** (-self.alpha)

    def d2(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_linear:
            return np.zeros_like(r)
        return -self.alpha * (r + self.shift) ** (-self.alpha - 1.0)

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "slope": self.slope}
        if self.kind == "log_shifted":
            return {"kind": "log_shifted", "shift": self.shift}
        return {"kind": "alpha_fair", "alpha": self.alpha, "shift": self.shift}


@dataclass(frozen=True)
class VariancePenalty:
    """Increasing variance penalty: ``slope * v`` or ``(v + delta)**alpha``."""

    kind: str
    slope: float = 1.0
    alpha: float = 0.5
    delta: float = 1.0

    def __post_init__(self):
        if self.kind == "linear":
            if not self.slope > 0:
                raise ValidationError("linear penalty needs slope d > 0")
        elif self.kind == "power":
            if not 0.5 <= self.alpha < 1.0:
                raise ValidationError("power penalty needs alpha in [0.5, 1)")
            if not self.delta > 0:
                raise ValidationError("power penalty needs delta > 0")
        else:
            raise ValidationError(f"unknown variance penalty kind {self.kind!r}")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"

    def value(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_linear:
            return self.slope * v
        return (v + self.delta) ** self.alpha

    def d1(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_linear:
            return np.full_like(v, self.slope)
        return self.alpha * (v + self.delta) ** (self.alpha - 1.0)

    def d2(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_linear:
            return np.zeros_like(v)
        return self.alpha * (self.alpha - 1.0) * (v + self.delta) ** (self.alpha - 2.0)

    def to_dict(self) -> dict:
        if self.is_linear:
            return {"kind": "linear", "slope": self.slope}
        return {"kind": "power", "alpha": self.alpha, "delta": self.delta}


@dataclass(frozen=True)
class UserSpec:
    id: int
    reward_utility: RewardUtility
    variance_penalty: VariancePenalty

    @property
    def linear_penalty(self) -> bool:
        """True for members of the linear-penalty set (no variance tracking needed)."""
        return self.variance_penalty.is_linear


# convenience constructors

def alpha_fair(alpha: float, shift: float = 0.0) -> RewardUtility:
    return RewardUtility("alpha_fair", alpha=alpha, shift=shift)


def linear_reward(slope: float = 1.0) -> RewardUtility:
    return RewardUtility("linear", slope=slope)


def log_shifted(shift: float) -> RewardUtility:
    return RewardUtility("log_shifted", shift=shift)


def linear_penalty(slope: float = 1.0) -> VariancePenalty:
    return VariancePenalty("linear", slope=slope)


def power_penalty(alpha: float, delta: float) -> VariancePenalty:
    return VariancePenalty("power", alpha=alpha, delta=delta)


def reward_from_dict(d: dict) -> RewardUtility:
    kind = d["kind"]
    if kind == "linear":
        return linear_reward(float(d.get("slope", 1.0)))
    if kind == "alpha_fair":
        return alpha_fair(float(d["alpha"]), float(d.get("shift", 0.0)))
    if kind == "log_shifted":
        return log_shifted(float(d["shift"]))
    raise ValidationError(f"unknown reward utility kind {kind!r}")


def penalty_from_dict(d: dict) -> VariancePenalty:
    kind = d["kind"]
    if kind == "linear":
        return linear_penalty(float(d.get("slope", d.get("d", 1.0))))
    if kind == "power":
        return power_penalty(float(d["alpha"]), float(d["delta"]))
    raise ValidationError(f"unknown variance penalty kind {kind!r}")


def ur_eval(spec: RewardUtility, r: float) -> tuple[float, float]:
    """Return ``(U^R(r), (U^R)'(r))``; raises DomainError at or below the singularity."""
    r = float(r)
    if not spec.is_linear and not r + spec.shift > 0:
        raise DomainError(f"reward utility undefined at r={r} (shift={spec.shift})")
    return float(spec.value(r)), float(spec.d1(r))


def uv_eval(spec: VariancePenalty, v: float) -> tuple[float, float, float]:
    """Return ``(U^V(v), (U^V)'(v), (U^V)''(v))`` for ``v >= 0``."""
    v = float(v)
    if v < 0:
        raise DomainError(f"variance penalty evaluated at negative v={v}")
    return float(spec.value(v)), float(spec.d1(v)), float(spec.d2(v))


def norm_convexity_margin(spec: VariancePenalty, x1, x2, alpha: float) -> float:
    """RHS minus LHS of the strict convexity-in-squared-norm inequality.

    Positive means ``U(|a x1 + (1-a) x2|^2) < a U(|x1|^2) + (1-a) U(|x2|^2)``.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    mid = alpha * x1 + (1.0 - alpha) * x2
    lhs = spec.value(float(mid @ mid))
    rhs = alpha * spec.value(float(x1 @ x1)) + (1.0 - alpha) * spec.value(float(x2 @ x2))
    return float(rhs - lhs)


def validate_assumptions(
    users: Sequence[UserSpec],
    r_min: float,
    r_max: float,
    n_samples: int = 1000,
    seed: int = 0,
) -> ValidationReport:
    """Grid and sampling checks of the reward and penalty assumptions.

    Failures are reported with a witnessing sample, never raised.
    """
    report = ValidationReport()
    if not r_max > r_min >= 0:
        report.add("bounds", False, f"need r_max > r_min >= 0, got r_min={r_min}, r_max={r_max}")
        return report
    v_max = (r_max - r_min) ** 2
    rgrid = np.linspace(r_min, r_max, GRID_POINTS)
    vgrid = np.linspace(0.0, v_max, GRID_POINTS)
    rng = np.random.default_rng(seed)

    for u in users:
        tag = f"user {u.id}"
        ur = u.reward_utility
        if not ur.is_linear and not r_min + ur.shift > 0:
            report.add(f"reward domain ({tag})", False,
                       f"{ur.kind} singular at r_min={r_min} with shift={ur.shift}",
                       witness=r_min)
        else:
            d1 = ur.d1(rgrid)
            val = ur.value(rgrid)
            finite = np.all(np.isfinite(d1)) and np.all(d1 > 0)
            report.add(f"reward domain ({tag})", True)
            report.add(f"reward derivative positive ({tag})", bool(finite),
                       witness=None if finite else float(rgrid[np.argmin(d1)]))
            dd = np.diff(d1)
            conc = bool(np.all(dd <= 1e-12 * np.maximum(1.0, np.abs(d1[:-1]))))
            report.add(f"reward concave ({tag})", conc,
                       witness=None if conc else float(rgrid[np.argmax(dd)]))
            incr = bool(np.all(np.diff(val) > 0))
            report.add(f"reward strictly increasing ({tag})", incr,
                       witness=None if incr else float(rgrid[np.argmin(np.diff(val))]))

        uv = u.variance_penalty
        d1v = uv.d1(vgrid)
        pos = bool(np.all(d1v > 0))
        report.add(f"penalty derivative positive ({tag})", pos,
                   f"d_min={float(d1v.min()):.6g}, d_max={float(d1v.max()):.6g}",
                   witness=None if pos else float(vgrid[np.argmin(d1v)]))
        if uv.is_linear:
            report.add(f"penalty norm convexity ({tag})", True, "linear penalty")
            continue
        d2v = uv.d2(vgrid)
        report.add(f"penalty curvature negative somewhere ({tag})", bool(d2v.min() < 0))
        worst = math.inf
        witness = None
        for _ in range(n_samples):
            dim = int(rng.integers(1, 5))
            scale = math.sqrt(v_max / dim)
            x1 = rng.uniform(-scale, scale, dim)
            x2 = rng.uniform(-scale, scale, dim)
            a = float(rng.uniform(0.01, 0.99))
            m = norm_convexity_margin(uv, x1, x2, a)
            if m < worst:
                worst, witness = m, (x1.tolist(), x2.tolist(), a)
        ok = worst > 0
        report.add(f"penalty norm convexity ({tag})", ok, f"min margin {worst:.3g}",
                   witness=None if ok else witness)
    return report


class RewardBank:
    """Vectorised reward utilities for N users; arrays broadcast over the last axis."""

    def __init__(self, specs: Sequence[RewardUtility]):
        self.n = len(specs)
        lin = np.array([s.is_linear for s in specs])
        self.lin_mask = lin
        self.slope = np.array([s.slope if s.is_linear else 0.0 for s in specs])
        self.alpha = np.array([0.0 if s.is_linear else s.alpha for s in specs])
        self.shift = np.array([1.0 if s.is_linear else s.shift for s in specs])
        self.is_log = np.array([(not s.is_linear) and s.alpha == 1.0 for s in specs])
        self.all_linear = bool(lin.all())
        self.any_linear = bool(lin.any())
        self.lower = np.array([s.lower_limit() for s in specs])

    def d1(self, x):
        if self.all_linear:
            return np.broadcast_to(self.slope, np.shape(x))
        out = (x + self.shift) ** (-self.alpha)
        if self.any_linear:
            out = np.where(self.lin_mask, self.slope, out)
        return out

    def d2(self, x):
        if self.all_linear:
            return np.zeros(np.shape(x))
        out = -self.alpha * (x + self.shift) ** (-self.alpha - 1.0)
        if self.any_linear:
            out = np.where(self.lin_mask, 0.0, out)
        return out

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.all_linear:
            return self.slope * x
        if np.any((x <= self.lower) & ~self.lin_mask):
            raise DomainError("reward utility evaluated at or below its singularity")
        z = x + self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            one_minus = 1.0 - self.alpha
            safe = np.where(self.is_log, 1.0, one_minus)
            powv = z ** one_minus / safe
            out = np.where(self.is_log, np.log(z), powv)
        if self.any_linear:
            out = np.where(self.lin_mask, self.slope * x, out)
        return out


class PenaltyBank:
    """Vectorised variance penalties for N users."""

    def __init__(self, specs: Sequence[VariancePenalty]):
        self.n = len(specs)
        self.lin_mask = np.array([s.is_linear for s in specs])
        self.slope = np.array([s.slope if s.is_linear else 0.0 for s in specs])
        self.alpha = np.array([1.0 if s.is_linear else s.alpha for s in specs])
        self.delta = np.array([0.0 if s.is_linear else s.delta for s in specs])
        self.all_linear = bool(self.lin_mask.all())

    def value(self, v):
        v = np.asarray(v, dtype=float)
        if self.all_linear:
            return self.slope * v
        return np.where(self.lin_mask, self.slope * v, (v + self.delta) ** self.alpha)

    def d1(self, v):
        v = np.asarray(v, dtype=float)
        if self.all_linear:
            return np.broadcast_to(self.slope, v.shape).copy()
        return np.where(self.lin_mask, self.slope,
                        self.alpha * (v + self.delta) ** (self.alpha - 1.0))

    def d2(self, v):
        v = np.asarray(v, dtype=float)
        if self.all_linear:
            return np.zeros(v.shape)
        return np.where(self.lin_mask, 0.0,
                        self.alpha * (self.alpha - 1.0) * (v + self.delta) ** (self.alpha - 2.0))


@dataclass(frozen=True)
class UserBank:
    reward: RewardBank
    penalty: PenaltyBank
    nonlinear: np.ndarray  # bool mask of users whose penalty is not linear

    @property
    def n(self) -> int:
        return self.reward.n


@lru_cache(maxsize=256)
def _bank(users: tuple) -> UserBank:
    return UserBank(
        RewardBank([u.reward_utility for u in users]),
        PenaltyBank([u.variance_penalty for u in users]),
        np.array([not u.linear_penalty for u in users]),
    )


def user_bank(users: Sequence[UserSpec]) -> UserBank:
    return _bank(tuple(users))
