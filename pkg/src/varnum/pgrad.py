"""Projected gradient ascent for smooth concave objectives over row-wise sets.

The step is backtracked on the local curvature seen along the step,
``-<G(x+) - G(x), x+ - x>_w <= |x+ - x|_w^2 / step``, rather than on function
values: near the optimum the objective changes by less than its rounding
error, while gradient differences stay informative.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError


def ascend(x0, grad, proj, residual, weights, tol: float, max_iters: int, step0: float,
           label: str = "projected gradient"):
    """Return ``(x, iterations, residual)``.

    ``grad(x)`` is the gradient in the ``weights`` inner product, ``proj``
    projects every row, ``residual(x, G)`` is the stopping criterion.
    """
    x = proj(x0)
    G = grad(x)
    res = residual(x, G)
    step = step0
    it = 0
    while res > tol:
        if it >= max_iters:
            raise ConvergenceError(f"{label} stopped at residual {res:.3g} after {it} iterations",
                                   best=x, residual=res)
        it += 1
        step = min(step * 2.0, 1e8)
        while True:
            x_new = proj(x + step * G)
            D = x_new - x
            G_new = grad(x_new)
            dd = float(np.sum(weights * D * D))
            curv = -float(np.sum(weights * (G_new - G) * D))
            if curv <= dd / step or step < 1e-16:
                break
            step *= 0.5
        if dd == 0.0:
            res = residual(x, G)
            if res > tol:
                raise ConvergenceError(f"{label} stalled at residual {res:.3g}", best=x, residual=res)
            break
        x, G = x_new, G_new
        res = residual(x, G)
    return x, it, res
