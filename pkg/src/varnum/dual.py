"""Lagrangian dual solver for separable problems with one constraint per row.

Solves, independently for each row b of a batch,

    max_x  sum_i f_i(x_i)   s.t.  sum_i phi_{b,i}(x_i) <= budget_b,  x_i >= r_min

with marginals of the form

    f_i'(x) = w_i * U_i'(x) - k_{b,i} * (x - t_{b,i}),    k > 0,

where U_i is a reward utility (linear or shifted power/log). The slot problem
uses k = 2 (U^V)'(v), t = m; Euclidean projection uses w = 0, k = 1, t = y.
Every ``phi_{b,i}`` is convex increasing (see ``ConstraintBatch``).

For a fixed multiplier mu the maximiser splits into scalar equations
f_i'(x) = mu * phi_i'(x) with unique roots; mu is the root of the decreasing
map mu -> c(x(mu)). Both levels are Newton iterations kept inside a
bisection bracket. The kernels are compiled with numba because the batches
are tiny (a handful of users) and per-call numpy overhead would dominate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .constraint import ConstraintBatch
from .errors import ConvergenceError
from .utility import RewardBank

INNER_ITERS = 200
OUTER_ITERS = 200


@dataclass
class DualResult:
    x: np.ndarray       # (B, N)
    mu: np.ndarray      # (B,)
    gamma: np.ndarray   # (B, N)
    outer_iters: int


@njit(cache=True)
def _u1(x, lin, slope, alpha, shift):
    if lin:
        return slope
    return (x + shift) ** (-alpha)


@njit(cache=True)
def _u2(x, lin, alpha, shift):
    if lin:
        return 0.0
    return -alpha * (x + shift) ** (-alpha - 1.0)


@njit(cache=True)
def _dphi(x, affine, inv_p, a, scale):
    if affine:
        return inv_p
    return np.exp(x / a) * scale / a


@njit(cache=True)
def _d2phi(x, affine, a, scale):
    if affine:
        return 0.0
    return np.exp(x / a) * scale / (a * a)


@njit(cache=True)
def _phi(x, affine, inv_p, a, scale):
    if affine:
        return x * inv_p
    return np.expm1(x / a) * scale


@njit(cache=True)
def _root(mu, x0, lo, hi, w, lin, slope, alpha, shift, k, t, affine, inv_p, a, scale):
    """Root of w U'(x) - k (x - t) - mu phi'(x) on [lo, hi]; endpoint if none inside."""
    f_lo = w * _u1(lo, lin, slope, alpha, shift) - k * (lo - t) - mu * _dphi(lo, affine, inv_p, a, scale)
    if f_lo <= 0.0:
        return lo
    f_hi = w * _u1(hi, lin, slope, alpha, shift) - k * (hi - t) - mu * _dphi(hi, affine, inv_p, a, scale)
    if f_hi >= 0.0:
        return hi
    x = min(max(x0, lo), hi)
    for _ in range(INNER_ITERS):
        f = w * _u1(x, lin, slope, alpha, shift) - k * (x - t) - mu * _dphi(x, affine, inv_p, a, scale)
        if f == 0.0:
            return x
        if f > 0.0:
            lo = x
        else:
            hi = x
        fp = w * _u2(x, lin, alpha, shift) - k - mu * _d2phi(x, affine, a, scale)
        xn = x - f / fp
        if not (xn >= lo and xn <= hi):
            xn = 0.5 * (lo + hi)
        if abs(xn - x) <= 1e-15 * (1.0 + abs(x)) or hi - lo <= 1e-15 * (1.0 + abs(hi)):
            return xn
        x = xn
    return x


@njit(cache=True)
def _solve_rows(w, lin, slope, alpha, shift, k, t, affine, inv_p, budget, a, scale, cap,
                r_min, x_out, mu_out, gamma_out):
    B, N = k.shape
    worst_iters = 0
    failed = -1
    hi = np.empty(N)
    x = np.empty(N)
    for b in range(B):
        for i in range(N):
            up = t[b, i] + w[i] * _u1(r_min, lin[i], slope[i], alpha[i], shift[i]) / k[b, i]
            hi[i] = max(r_min, min(up, cap[b, i]))
            x[i] = r_min
        # mu = 0 first
        g = -budget[b]
        for i in range(N):
            x[i] = _root(0.0, x[i], r_min, hi[i], w[i], lin[i], slope[i], alpha[i], shift[i],
                         k[b, i], t[b, i], affine, inv_p[b, i], a[b, i], scale[b, i])
            g += _phi(x[i], affine, inv_p[b, i], a[b, i], scale[b, i])
        mu = 0.0
        if g > 0.0:
            lo_mu = 0.0
            g_lo = g
            up_mu = 0.0
            g_up = -budget[b]
            for i in range(N):
                fc = w[i] * _u1(r_min, lin[i], slope[i], alpha[i], shift[i]) - k[b, i] * (r_min - t[b, i])
                cand = max(fc, 0.0) / _dphi(r_min, affine, inv_p[b, i], a[b, i], scale[b, i])
                up_mu = max(up_mu, cand)
                g_up += _phi(r_min, affine, inv_p[b, i], a[b, i], scale[b, i])
            up_mu = up_mu * (1.0 + 1e-12) + 1e-300
            mu = lo_mu + g_lo * (up_mu - lo_mu) / max(g_lo - g_up, 1e-300)
            if not (mu > lo_mu and mu < up_mu):
                mu = 0.5 * (lo_mu + up_mu)
            tol = 1e-14 * (1.0 + budget[b])
            it = 0
            converged = False
            while it < OUTER_ITERS:
                it += 1
                g = -budget[b]
                gp = 0.0
                for i in range(N):
                    xi = _root(mu, x[i], r_min, hi[i], w[i], lin[i], slope[i], alpha[i], shift[i],
                               k[b, i], t[b, i], affine, inv_p[b, i], a[b, i], scale[b, i])
                    x[i] = xi
                    g += _phi(xi, affine, inv_p[b, i], a[b, i], scale[b, i])
                    if xi > r_min and xi < hi[i]:
                        dp = _dphi(xi, affine, inv_p[b, i], a[b, i], scale[b, i])
                        fp = (w[i] * _u2(xi, lin[i], alpha[i], shift[i]) - k[b, i]
                              - mu * _d2phi(xi, affine, a[b, i], scale[b, i]))
                        gp += dp * dp / fp
                if g > 0.0:
                    lo_mu = mu
                else:
                    up_mu = mu
                if abs(g) <= tol or up_mu - lo_mu <= 4e-16 * (1.0 + up_mu):
                    converged = True
                    break
                mn = mu - g / gp if gp < 0.0 else -1.0
                if not (mn > lo_mu and mn < up_mu):
                    mn = 0.5 * (lo_mu + up_mu)
                mu = mn
            if not converged:
                failed = b
            if g > tol:
                # converged on bracket width while still infeasible: take the feasible end
                mu = up_mu
                for i in range(N):
                    x[i] = _root(mu, x[i], r_min, hi[i], w[i], lin[i], slope[i], alpha[i], shift[i],
                                 k[b, i], t[b, i], affine, inv_p[b, i], a[b, i], scale[b, i])
            worst_iters = max(worst_iters, it)
        mu_out[b] = mu
        for i in range(N):
            x_out[b, i] = x[i]
            if x[i] <= r_min:
                f = (w[i] * _u1(x[i], lin[i], slope[i], alpha[i], shift[i]) - k[b, i] * (x[i] - t[b, i])
                     - mu * _dphi(x[i], affine, inv_p[b, i], a[b, i], scale[b, i]))
                gamma_out[b, i] = max(-f, 0.0)
            else:
                gamma_out[b, i] = 0.0
    return worst_iters, failed


def _as_rows(arr, shape):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(arr, dtype=float), shape))


def solve_separable(reward: RewardBank | None, weight, k, t, batch: ConstraintBatch,
                    r_min: float) -> DualResult:
    """Solve every row of the batch.

    Parameters
    ----------
    reward:
        Reward utilities supplying U_i'; ``None`` means no utility term.
    weight:
        Scalar or (N,) multiplier w_i on U_i'.
    k, t:
        Curvature and centre of the quadratic term, broadcastable to (B, N).
    """
    B, N = batch.inv_p.shape
    shape = (B, N)
    if reward is None:
        lin = np.ones(N, dtype=np.bool_)
        slope = np.zeros(N)
        alpha = np.zeros(N)
        shift = np.ones(N)
        w = np.zeros(N)
    else:
        lin = reward.lin_mask.astype(np.bool_)
        slope, alpha, shift = reward.slope, reward.alpha, reward.shift
        w = _as_rows(weight, (N,))
    if batch.affine:
        a = np.ones(shape)
        scale = np.ones(shape)
    else:
        a, scale = batch.a, batch._scale
    x = np.empty(shape)
    mu = np.empty(B)
    gamma = np.empty(shape)
    iters, failed = _solve_rows(w, lin, slope, alpha, shift, _as_rows(k, shape), _as_rows(t, shape),
                                batch.affine, batch.inv_p, batch.budget, a, scale, batch.cap,
                                float(r_min), x, mu, gamma)
    if failed >= 0:
        raise ConvergenceError(f"dual multiplier search did not converge on row {failed}", best=x)
    return DualResult(x, mu, gamma, int(iters))


def project(y: np.ndarray, batch: ConstraintBatch, r_min: float) -> np.ndarray:
    """Euclidean projection of each row of ``y`` onto {c_b(x) <= 0, x >= r_min}."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return solve_separable(None, 0.0, 1.0, y, batch, r_min).x
