"""Stationary ergodic processes over the finite constraint set."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintProcess:
    """Either i.i.d. draws from ``probabilities`` or a Markov chain with matrix ``P``.

    For Markov chains ``initial`` is ``"stationary"`` or an integer state index.
    """

    kind: str
    probabilities: tuple | None = None
    P: tuple | None = None
    initial: str | int = "stationary"

    def __post_init__(self):
        if self.kind == "iid":
            if self.probabilities is None:
                raise ValidationError("iid process needs probabilities")
            p = np.asarray(self.probabilities, dtype=float)
            if p.ndim != 1 or p.size == 0:
                raise ValidationError("probabilities must be a nonempty vector")
            if np.any(p <= 0):
                raise ValidationError("iid probabilities must all be positive")
            if abs(p.sum() - 1.0) > PROB_TOL:
                raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
            object.__setattr__(self, "probabilities", tuple(p.tolist()))
        elif self.kind == "markov":
            if self.P is None:
                raise ValidationError("markov process needs a transition matrix P")
            P = np.asarray(self.P, dtype=float)
            if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] == 0:
                raise ValidationError("transition matrix must be square and nonempty")
            if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > PROB_TOL):
                raise ValidationError("transition matrix must be row-stochastic")
            object.__setattr__(self, "P", tuple(tuple(row) for row in P.tolist()))
            if self.initial != "stationary":
                k = self.initial
                if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or not 0 <= k < P.shape[0]:
                    raise ValidationError(f"invalid initial state {k!r}")
        else:
            raise ValidationError(f"unknown process kind {self.kind!r}")

    @property
    def n_states(self) -> int:
        return len(self.probabilities) if self.kind == "iid" else len(self.P)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.P, dtype=float)

    def is_irreducible(self) -> bool:
        if self.kind == "iid":
            return True
        n, _ = connected_components(self.matrix() > 0, directed=True, connection="strong")
        return n == 1

    def to_dict(self) -> dict:
        if self.kind == "iid":
            return {"kind": "iid", "probabilities": list(self.probabilities)}
        init = self.initial if self.initial == "stationary" else {"fixed_state": int(self.initial)}
        return {"kind": "markov", "P": [list(r) for r in self.P], "initial": init}


def iid(probabilities) -> ConstraintProcess:
    return ConstraintProcess("iid", probabilities=tuple(probabilities))


def markov(P, initial="stationary") -> ConstraintProcess:
    return ConstraintProcess("markov", P=tuple(tuple(r) for r in P), initial=initial)


def process_from_dict(d: dict) -> ConstraintProcess:
    kind = d.get("kind")
    if kind == "iid":
        return iid(d["probabilities"])
    if kind == "markov":
        init = d.get("initial", "stationary")
        if isinstance(init, dict):
            init = int(init["fixed_state"])
        return markov(d["P"], init)
    raise ValidationError(f"unknown process kind {kind!r}")


def stationary_distribution(process: ConstraintProcess) -> np.ndarray:
    if process.kind == "iid":
        return np.asarray(process.probabilities, dtype=float)
    if not process.is_irreducible():
        raise ValidationError("process not irreducible: transition matrix is reducible, ergodicity cannot be verified")
    P = process.matrix()
    n = P.shape[0]
    A = np.vstack([P.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    # a couple of power steps polish the residual down to rounding level
    for _ in range(3):
        pi = pi @ P
        pi /= pi.sum()
    if np.any(pi <= 0):
        raise ValidationError("stationary distribution has a non-positive entry")
    return pi


@dataclass(frozen=True)
class SamplePath:
    indices: np.ndarray = field(repr=False)
    seed: int

    def __len__(self) -> int:
        return len(self.indices)

    def empirical_frequencies(self, n_states: int) -> np.ndarray:
        return np.bincount(self.indices, minlength=n_states) / len(self.indices)


def sample_path(process: ConstraintProcess, T: int, seed: int) -> SamplePath:
    """Draw C_1..C_T; a pure function of ``(process, T, seed)``."""
    if T < 1:
        raise ValueError("horizon T must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    if process.kind == "iid":
        p = np.asarray(process.probabilities)
        cum = np.cumsum(p)
        cum[-1] = 1.0
        idx = np.searchsorted(cum, rng.random(T), side="right")
        return SamplePath(idx.astype(np.int64), seed)
    P = process.matrix()
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    u = rng.random(T)
    idx = np.empty(T, dtype=np.int64)
    if process.initial == "stationary":
        pi_cum = np.cumsum(stationary_distribution(process))
        pi_cum[-1] = 1.0
        state = int(np.searchsorted(pi_cum, u[0], side="right"))
    else:
        state = int(process.initial)
    idx[0] = state
    rows = [row for row in cum]
    for t in range(1, T):
        state = int(np.searchsorted(rows[state], u[t], side="right"))
        idx[t] = state
    return SamplePath(idx, seed)
