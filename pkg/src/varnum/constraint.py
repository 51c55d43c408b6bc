"""Per-slot resource constraints for the wireless families WN, WN-E and WN-T.

Every family is separable: ``c(r) = sum_i phi_i(r_i) - budget`` with each
``phi_i`` convex and increasing. The solvers rely on this through
``ConstraintBatch``, which stacks many constraint elements into arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, ValidationError, ValidationReport

FAMILIES = ("WN", "WNE", "WNT")


@dataclass(frozen=True)
class ConstraintSpec:
    """One element c of the constraint set.

    WN:  sum r_i / p_i - 1
    WNE: sum r_i / p_i - (1 - f)
    WNT: sum q_i^{-1}(r_i) / p_i - 1 with q_i(w) = a_i log(1 + b_i w)
    """

    family: str
    p: tuple
    f: float = 0.0
    a: tuple | None = None
    b: tuple | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown constraint family {self.family!r}")
        p = tuple(float(x) for x in self.p)
        if not p or any(not x > 0 for x in p):
            raise ValidationError("peak rates p must be a nonempty vector of positive reals")
        object.__setattr__(self, "p", p)
        if self.family == "WNE":
            if not 0.0 <= self.f < 1.0:
                raise ValidationError("WNE reserved fraction f must lie in [0, 1)")
        elif self.f != 0.0:
            raise ValidationError(f"{self.family} takes no reserved fraction")
        if self.family == "WNT":
            if self.a is None or self.b is None:
                raise ValidationError("WNT needs quality-map parameters a and b")
            a = tuple(float(x) for x in self.a)
            b = tuple(float(x) for x in self.b)
            if len(a) != len(p) or len(b) != len(p):
                raise ValidationError("WNT a, b must have one entry per user")
            if any(not x > 0 for x in a + b):
                raise ValidationError("WNT a, b must be positive")
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)
        elif self.a is not None or self.b is not None:
            raise ValidationError(f"{self.family} takes no quality maps")

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def affine(self) -> bool:
        return self.family != "WNT"

    @property
    def budget(self) -> float:
        return 1.0 - self.f

    def _check(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.shape[-1:] != (self.n,):
            raise ValueError(f"expected {self.n} rewards, got shape {r.shape}")
        return r

    def value(self, r) -> float:
        r = self._check(r)
        p = np.asarray(self.p)
        if self.affine:
            return float(np.sum(r / p) - self.budget)
        a, b = np.asarray(self.a), np.asarray(self.b)
        return float(np.sum(np.expm1(r / a) / (b * p)) - 1.0)

    def grad(self, r) -> np.ndarray:
        r = self._check(r)
        p = np.asarray(self.p)
        if self.affine:
            return 1.0 / p
        a, b = np.asarray(self.a), np.asarray(self.b)
        return np.exp(r / a) / (a * b * p)

    def quality(self, w) -> np.ndarray:
        """Per-user quality map q_i(w_i); WNT only."""
        a, b = np.asarray(self.a), np.asarray(self.b)
        return a * np.log1p(b * np.asarray(w, dtype=float))

    def coordinate_cap(self) -> np.ndarray:
        """Largest r_i allowed by this constraint alone when every other r_j = 0."""
        p = np.asarray(self.p)
        if self.affine:
            return p * self.budget
        return self.quality(p)

    def to_dict(self) -> dict:
        d = {"family": self.family, "p": list(self.p)}
        if self.family == "WNE":
            d["f"] = self.f
        if self.family == "WNT":
            d["a"] = list(self.a)
            d["b"] = list(self.b)
        return d


def wn(p) -> ConstraintSpec:
    return ConstraintSpec("WN", tuple(p))


def wne(p, f: float) -> ConstraintSpec:
    return ConstraintSpec("WNE", tuple(p), f=f)


def wnt(p, a, b) -> ConstraintSpec:
    return ConstraintSpec("WNT", tuple(p), a=tuple(a), b=tuple(b))


def constraint_from_dict(d: dict) -> ConstraintSpec:
    fam = d.get("family")
    if fam == "WN":
        return wn(d["p"])
    if fam == "WNE":
        return wne(d["p"], float(d["f"]))
    if fam == "WNT":
        return wnt(d["p"], d["a"], d["b"])
    raise ValidationError(f"unknown constraint family {fam!r}")


def c_eval(spec: ConstraintSpec, r) -> float:
    r = spec._check(r)
    if spec.family == "WNT" and np.any(r < 0):
        raise DomainError("WNT constraint needs nonnegative rewards")
    return spec.value(r)


def c_grad(spec: ConstraintSpec, r) -> np.ndarray:
    r = spec._check(r)
    if spec.family == "WNT" and np.any(r < 0):
        raise DomainError("WNT constraint needs nonnegative rewards")
    return spec.grad(r)


def _single_family(elements: Sequence[ConstraintSpec]) -> str:
    if not elements:
        raise ValidationError("constraint set must be nonempty")
    fams = {c.family for c in elements}
    if len(fams) != 1:
        raise ValidationError(f"constraint set mixes families {sorted(fams)}")
    dims = {c.n for c in elements}
    if len(dims) != 1:
        raise ValidationError("constraint elements disagree on the number of users")
    return fams.pop()


def r_min_upper_bound(elements: Sequence[ConstraintSpec]) -> float:
    """Largest admissible r_min for the affine families: min_c (1-f) min_i p_i / N."""
    n = elements[0].n
    return min(c.budget * min(c.p) for c in elements) / n


def derive_bounds(elements: Sequence[ConstraintSpec], requested_r_min: float | None = None):
    """Return ``(r_min, r_max, v_max)`` for a constraint set."""
    fam = _single_family(elements)
    if fam == "WNT":
        if requested_r_min not in (None, 0, 0.0):
            raise ValidationError("WNT constraint sets require r_min = 0")
        r_min = 0.0
        r_max = max(float(np.max(c.quality(c.p))) for c in elements)
    else:
        r_max = max(max(c.p) for c in elements)
        r_min = 0.0
        if requested_r_min is not None:
            bound = r_min_upper_bound(elements)
            if not 0.0 <= requested_r_min <= bound:
                raise ValidationError(
                    f"requested r_min={requested_r_min} outside [0, {bound:.6g}]")
            r_min = float(requested_r_min)
    return r_min, float(r_max), float((r_max - r_min) ** 2)


@dataclass(frozen=True)
class ConstraintSet:
    elements: tuple
    r_min: float
    r_max: float

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        _single_family(self.elements)

    @classmethod
    def from_elements(cls, elements: Sequence[ConstraintSpec], r_min: float | None = None):
        lo, hi, _ = derive_bounds(elements, r_min)
        return cls(tuple(elements), lo, hi)

    @property
    def v_max(self) -> float:
        return (self.r_max - self.r_min) ** 2

    @property
    def n(self) -> int:
        return self.elements[0].n

    @property
    def family(self) -> str:
        return self.elements[0].family

    def __len__(self) -> int:
        return len(self.elements)

    def __getitem__(self, k) -> ConstraintSpec:
        return self.elements[k]


def validate_constraint_set(cs: ConstraintSet) -> ValidationReport:
    """Per element: feasibility at the lower corner, the box bound, convexity and slack."""
    rep = ValidationReport()
    corner = np.full(cs.n, cs.r_min)
    for k, c in enumerate(cs.elements):
        val = c.value(corner)
        rep.add(f"corner feasible (element {k})", val <= 0, f"c(r_min*1) = {val:.6g}", witness=val)
        cap = c.coordinate_cap()
        ok = bool(np.all(cap <= cs.r_max * (1 + 1e-12)))
        rep.add(f"box bound (element {k})", ok, f"max coordinate bound {float(cap.max()):.6g} vs r_max {cs.r_max:.6g}")
        rep.add(f"convex (element {k})", True,
                "affine" if c.affine else "sum of convex increasing exponentials")
        if not c.affine:
            rep.add(f"corner slack (element {k})", val < 0, f"c(r_min*1) = {val:.6g}", witness=val)
        else:
            rep.add(f"corner slack (element {k})", val <= 0, f"c(r_min*1) = {val:.6g}", witness=val)
    return rep


class ConstraintBatch:
    """A stack of B same-family constraints viewed as separable maps.

    ``terms(x)`` returns the per-coordinate phi_i(x_i) of shape (B, N) and
    ``value(x)`` the row sums minus the budget.
    """

    def __init__(self, elements: Sequence[ConstraintSpec]):
        _single_family(elements)
        self.elements = tuple(elements)
        self.affine = elements[0].affine
        self.inv_p = np.array([[1.0 / x for x in c.p] for c in elements])
        self.budget = np.array([c.budget for c in elements])
        if not self.affine:
            self.a = np.array([c.a for c in elements], dtype=float)
            self.bq = np.array([c.b for c in elements], dtype=float)
            self._scale = self.inv_p / self.bq
        # phi_i^{-1}(budget + 1): any coordinate beyond this makes c > 0 by a margin
        if self.affine:
            self.cap = (self.budget[:, None] + 1.0) / self.inv_p
        else:
            self.cap = self.a * np.log1p((self.budget[:, None] + 1.0) / self._scale)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def n(self) -> int:
        return self.inv_p.shape[1]

    def take(self, idx) -> "ConstraintBatch":
        """Rows ``idx`` (repeats allowed) without rebuilding from the specs."""
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        out = object.__new__(ConstraintBatch)
        out.elements = tuple(self.elements[i] for i in idx)
        out.affine = self.affine
        for name in ("inv_p", "budget", "cap", "a", "bq", "_scale"):
            if hasattr(self, name):
                setattr(out, name, np.ascontiguousarray(getattr(self, name)[idx]))
        return out

    def terms(self, x):
        if self.affine:
            return x * self.inv_p
        return np.expm1(x / self.a) * self._scale

    def value(self, x):
        return self.terms(x).sum(axis=-1) - self.budget

    def dphi(self, x):
        if self.affine:
            return np.broadcast_to(self.inv_p, np.shape(x))
        return np.exp(x / self.a) * self._scale / self.a

    def d2phi(self, x):
        if self.affine:
            return np.zeros(np.shape(x))
        return np.exp(x / self.a) * self._scale / (self.a * self.a)


def sample_feasible(c: ConstraintSpec, r_min: float, r_max: float, rng, size: int) -> np.ndarray:
    """Points with c(r) <= 0 and r >= r_min, drawn by rejection then radial scaling."""
    out = np.empty((size, c.n))
    corner = np.full(c.n, r_min)
    for k in range(size):
        x = rng.uniform(r_min, r_max, c.n)
        if c.value(x) > 0:
            # bisect along the segment from the corner, which is feasible by the corner check
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if c.value(corner + mid * (x - corner)) <= 0:
                    lo = mid
                else:
                    hi = mid
            x = corner + lo * rng.uniform(0.0, 1.0) * (x - corner)
        out[k] = x
    return out
