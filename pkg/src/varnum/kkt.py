"""Multiplier recovery and KKT residuals for rows of single-constraint problems.

Each row b has stationarity ``G_b - mu_b * grad c_b + gamma_b = 0`` where G is the
objective gradient, plus slackness ``mu_b c_b = 0`` and ``gamma_bi (r_bi - r_min) = 0``.
Multipliers are fitted by least squares over the active constraints only.
"""
from __future__ import annotations

import numpy as np

ACTIVE_TOL = 1e-9


def recover_residual(G, dphi, cval, r, r_min: float, act_tol: float = ACTIVE_TOL):
    """Return ``(residual_per_row, mu, gamma)``.

    ``mu`` is the least-squares fit over coordinates strictly above r_min when
    the row's constraint is active; if every coordinate sits at r_min, the
    smallest mu making all gamma nonnegative is used instead.
    """
    G = np.atleast_2d(G)
    dphi = np.broadcast_to(dphi, G.shape)
    r = np.atleast_2d(r)
    cval = np.atleast_1d(cval)
    free = (r - r_min) > act_tol
    active = cval >= -act_tol
    nfree = free.sum(axis=1)
    num = np.sum(np.where(free, G * dphi, 0.0), axis=1)
    den = np.sum(np.where(free, dphi * dphi, 0.0), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_ls = num / den
        mu_all = np.max(G / dphi, axis=1)
    mu = np.where(nfree > 0, mu_ls, mu_all)
    mu = np.where(active, np.maximum(mu, 0.0), 0.0)
    gamma = np.where(free, 0.0, np.maximum(mu[:, None] * dphi - G, 0.0))
    stat = G - mu[:, None] * dphi + gamma
    parts = [
        np.abs(stat).max(axis=1),
        np.abs(mu * cval),
        np.abs(gamma * (r - r_min)).max(axis=1),
        np.maximum(cval, 0.0),
        np.maximum(r_min - r, 0.0).max(axis=1),
    ]
    return np.max(np.vstack(parts), axis=0), mu, gamma
