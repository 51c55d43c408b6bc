"""Exception types and the pass/fail report shared by the validators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


class DomainError(ValueError):
    """A utility or constraint was evaluated outside its domain."""


class ValidationError(ValueError):
    """A scenario component violates a modelling assumption."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the best iterate found and its residual so callers can inspect
    how far off it was.
    """

    def __init__(self, message: str, best: Any = None, residual: float = float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SizeError(ValueError):
    """Problem exceeds a configured size cap."""


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: Any = None


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = "", witness: Any = None) -> None:
        self.checks.append(Check(name, bool(passed), detail, witness))

    def extend(self, other: "ValidationReport") -> None:
        self.checks.extend(other.checks)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def first_failure(self) -> Check | None:
        bad = self.failures
        return bad[0] if bad else None

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            line = f"[{tag}] {c.name}"
            if c.detail:
                line += f": {c.detail}"
            out.append(line)
        return out
