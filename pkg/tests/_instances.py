"""Random instance builders shared by the tests."""
import numpy as np
from scipy.optimize import minimize

from varnum.constraint import derive_bounds
from varnum.scenario import random_constraints, random_users
from varnum.slot import Theta
from varnum.utility import user_bank

FAMILIES = ("WN", "WNE", "WNT")


def slot_instance(rng, family, n=None, interior_v=False):
    n = int(n or rng.integers(1, 4))
    users = random_users(rng, n)
    c = random_constraints(rng, family, n, 1)[0]
    r_min, r_max, v_max = derive_bounds([c])
    m = rng.uniform(r_min, r_max, n)
    lo = 0.05 * v_max if interior_v else 0.0
    v = rng.uniform(lo, v_max - lo, n)
    return users, c, Theta(m, v), r_min


def slsqp_slot(users, c, theta, r_min):
    """Independent solve of the slot problem with a general NLP method."""
    bank = user_bank(users)
    d = bank.penalty.d1(theta.v)

    def f(r):
        return -np.sum(bank.reward.value(r) - d * (r - theta.m) ** 2)

    def g(r):
        return -(bank.reward.d1(r) - 2 * d * (r - theta.m))

    x0 = np.full(c.n, r_min + 1e-3)
    res = minimize(f, x0, jac=g, method="SLSQP",
                   bounds=[(r_min, None)] * c.n,
                   constraints=[{"type": "ineq", "fun": lambda r: -c.value(r),
                                 "jac": lambda r: -c.grad(r)}],
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x, -res.fun
