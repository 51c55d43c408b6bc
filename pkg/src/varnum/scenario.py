"""Scenario container, JSON scenario files, and stock scenarios used in tests.

A scenario file is a JSON object::

    {
      "label": "two-state",
      "users": [{"reward_utility": {"kind": "linear", "slope": 1.0},
                 "variance_penalty": {"kind": "linear", "slope": 1.0}}],
      "constraints": [{"family": "WN", "p": [1.0]}, {"family": "WN", "p": [3.0]}],
      "process": {"kind": "iid", "probabilities": [0.5, 0.5]},
      "r_min": 0.0
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .constraint import (ConstraintBatch, ConstraintSet, constraint_from_dict, derive_bounds,
                         validate_constraint_set, wn, wnt)
from .errors import ValidationError, ValidationReport
from .process import ConstraintProcess, iid, markov, process_from_dict, stationary_distribution
from .utility import (UserSpec, alpha_fair, linear_penalty, linear_reward, log_shifted,
                      penalty_from_dict, power_penalty, reward_from_dict, validate_assumptions)


class ScenarioError(ValidationError):
    """Scenario failed validation; ``report`` holds every check."""

    def __init__(self, message: str, report: ValidationReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Scenario:
    users: tuple
    constraints: ConstraintSet
    process: ConstraintProcess
    label: str = "scenario"
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_states(self) -> int:
        return len(self.constraints)

    @property
    def r_min(self) -> float:
        return self.constraints.r_min

    @property
    def r_max(self) -> float:
        return self.constraints.r_max

    @property
    def v_max(self) -> float:
        return self.constraints.v_max

    @cached_property
    def pi(self) -> np.ndarray:
        return stationary_distribution(self.process)

    @cached_property
    def batch(self) -> ConstraintBatch:
        return ConstraintBatch(self.constraints.elements)

    @property
    def nonlinear_mask(self) -> np.ndarray:
        return np.array([not u.linear_penalty for u in self.users])

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "users": [{"reward_utility": u.reward_utility.to_dict(),
                       "variance_penalty": u.variance_penalty.to_dict()} for u in self.users],
            "constraints": [c.to_dict() for c in self.constraints.elements],
            "process": self.process.to_dict(),
            "r_min": self.r_min,
        }


def validate_scenario(sc: Scenario) -> ValidationReport:
    """Every modelling check: constraints, process irreducibility, utilities."""
    rep = ValidationReport()
    rep.extend(validate_constraint_set(sc.constraints))
    if sc.process.n_states != sc.n_states:
        rep.add("process state count", False,
                f"process has {sc.process.n_states} states, constraint set has {sc.n_states}")
    else:
        irreducible = sc.process.is_irreducible()
        rep.add("process irreducible", irreducible,
                "" if irreducible else "transition matrix is reducible")
    if any(c.n != sc.n_users for c in sc.constraints.elements):
        rep.add("dimensions", False, "constraint dimension does not match the number of users")
    rep.extend(validate_assumptions(sc.users, sc.r_min, sc.r_max))
    return rep


def build_scenario(users, constraints, process, r_min=None, label="scenario",
                   validate: bool = True) -> Scenario:
    cset = ConstraintSet.from_elements(list(constraints), r_min)
    users = tuple(u if isinstance(u, UserSpec) else UserSpec(k, *u) for k, u in enumerate(users))
    sc = Scenario(users, cset, process, label)
    if validate:
        rep = validate_scenario(sc)
        if not rep.ok:
            bad = rep.first_failure()
            raise ScenarioError(f"{bad.name} failed: {bad.detail}", rep)
    return sc


def scenario_from_dict(d: dict, validate: bool = True) -> Scenario:
    try:
        users = [UserSpec(k, reward_from_dict(u["reward_utility"]),
                          penalty_from_dict(u["variance_penalty"]))
                 for k, u in enumerate(d["users"])]
        constraints = [constraint_from_dict(c) for c in d["constraints"]]
        process = process_from_dict(d["process"])
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing field {exc}") from exc
    return build_scenario(users, constraints, process, d.get("r_min"),
                          d.get("label", "scenario"), validate)


def load_scenario(path, validate: bool = True) -> Scenario:
    text = Path(path).read_text()
    return scenario_from_dict(json.loads(text), validate)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(json.dumps(sc.to_dict(), indent=2) + "\n")


# stock scenarios

def two_state_scenario() -> Scenario:
    """One user, rates capped at 1 or 3 with equal probability, linear utility and penalty."""
    return build_scenario(
        [UserSpec(0, linear_reward(1.0), linear_penalty(1.0))],
        [wn([1.0]), wn([3.0])],
        iid([0.5, 0.5]),
        label="two-state",
    )


def deterministic_scenario(r_min: float = 0.1) -> Scenario:
    """Single constraint r <= 2 with log utility and linear penalty."""
    return build_scenario(
        [UserSpec(0, alpha_fair(1.0), linear_penalty(1.0))],
        [wn([2.0])],
        iid([1.0]),
        r_min=r_min,
        label="deterministic",
    )


def vanishing_penalty_scenario(slope: float = 1e-6) -> Scenario:
    return build_scenario(
        [UserSpec(0, linear_reward(1.0), linear_penalty(slope))],
        [wn([1.0]), wn([3.0])],
        iid([0.5, 0.5]),
        label="vanishing-penalty",
    )


def random_users(rng, n: int, penalties: str = "mixed", wnt_safe: bool = False):
    users = []
    for i in range(n):
        kind = rng.integers(3)
        if kind == 0:
            ur = linear_reward(float(rng.uniform(0.5, 2.0)))
        elif kind == 1:
            ur = log_shifted(float(rng.uniform(0.2, 1.0)))
        else:
            ur = alpha_fair(float(rng.uniform(0.5, 2.5)), float(rng.uniform(0.2, 1.0)))
        lin = {"linear": True, "power": False}.get(penalties, bool(rng.integers(2)))
        if penalties == "mixed" and i == 0:
            lin = not lin if n > 1 and rng.integers(2) else lin
        if lin:
            uv = linear_penalty(float(rng.uniform(0.2, 2.0)))
        else:
            uv = power_penalty(float(rng.uniform(0.5, 0.95)), float(rng.uniform(0.05, 1.0)))
        users.append(UserSpec(i, ur, uv))
    return users


def random_constraints(rng, family: str, n: int, k: int):
    out = []
    for _ in range(k):
        p = rng.uniform(0.5, 3.0, n)
        if family == "WN":
            out.append(wn(p))
        elif family == "WNE":
            from .constraint import wne
            out.append(wne(p, float(rng.uniform(0.0, 0.5))))
        else:
            out.append(wnt(p, rng.uniform(0.5, 2.0, n), rng.uniform(0.5, 2.0, n)))
    return out


def random_scenario(rng, n_users: int | None = None, n_states: int | None = None,
                    family: str = "WN", penalties: str = "mixed", markov_chain: bool = False,
                    label: str = "random") -> Scenario:
    """Small random scenario (N <= 3, |C| <= 4 by default) that passes validation."""
    n = int(n_users or rng.integers(1, 4))
    k = int(n_states or rng.integers(2, 5))
    users = random_users(rng, n, penalties)
    cons = random_constraints(rng, family, n, k)
    if markov_chain:
        P = rng.uniform(0.1, 1.0, (k, k))
        P /= P.sum(axis=1, keepdims=True)
        proc = markov(P)
    else:
        w = rng.uniform(0.3, 1.0, k)
        w /= w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        proc = iid(w)
    return build_scenario(users, cons, proc, label=label)


__all__ = [
    "Scenario", "ScenarioError", "build_scenario", "scenario_from_dict", "load_scenario",
    "save_scenario", "validate_scenario", "two_state_scenario", "deterministic_scenario",
    "vanishing_penalty_scenario", "random_scenario", "random_users", "random_constraints",
    "derive_bounds",
]
