"""Independent reference implementations used only by the tests.

Nothing here imports the package, so a bug in it cannot hide in its oracle.
"""

import itertools
import math

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

# Frozen reference values (four decimals as published).
GOLDEN_BD8 = {
    0.0: (0.5432, 0.1212, 0.1212, 0.1212, 0.0270, 0.0270, 0.0270, 0.0060, 0.0060),
    0.1212: (0.5432, 0.1212, 0.1212, 0.1212, 0.0270, 0.0270, 0.0270, 0.0060, 0.0060),
    0.1238: (0.5548, 0.1238, 0.1238, 0.1238, 0.0276, 0.0276, 0.0062, 0.0062, 0.0062),
    0.1522: (0.5575, 0.1244, 0.1244, 0.1244, 0.0278, 0.0278, 0.0062, 0.0062, 0.0014),
}
SCALAR_BD2 = (0.6469, 0.1443, 0.1443, 0.0322, 0.0322)
VECTOR_MARGINAL = (0.7681, 0.1073, 0.1073, 0.0086, 0.0086)
VECTOR_CENTER, VECTOR_NEAR, VECTOR_FAR = 0.6954, 0.0346, 0.0017
GOLDEN_BREAKPOINTS = (0.1212, 0.1238, 0.1522)


def leakage(f, eps, offsets, tol=1e-9):
    """Loop-based sup over offsets of sum_eta 1[f(eta) > e^eps f(eta+mu)] f(eta)."""
    f = np.asarray(f, dtype=float)
    shape = f.shape
    mod = shape[0]
    best = 0.0
    for mu in offsets:
        mu = (mu,) if np.isscalar(mu) else tuple(mu)
        total = 0.0
        for eta in itertools.product(range(mod), repeat=len(shape)):
            shifted = tuple((e + m) % mod for e, m in zip(eta, mu))
            if f[eta] - math.exp(eps) * f[shifted] > tol:
                total += f[eta]
        best = max(best, total)
    return best


def channel_leakage(rows, eps, offsets, two_sided=True, tol=1e-9):
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0] - 1
    best = 0.0
    for mu in offsets:
        for d in (mu, -mu) if two_sided else (mu,):
            for q in range(n + 1):
                qp = q - d
                if not 0 <= qp <= n:
                    continue
                total = sum(
                    rows[q, k]
                    for k in range(n + 1)
                    if rows[q, k] - math.exp(eps) * rows[qp, k] > tol
                )
                best = max(best, total)
    return best


def highs_lp(lp):
    """(status, objective, x) from HiGHS; status is 'optimal' or 'infeasible'."""
    le = np.array([s == '<=' for s in lp.senses], dtype=bool)
    kwargs = {}
    if le.any():
        kwargs.update(A_ub=lp.A[le], b_ub=lp.b[le])
    if (~le).any():
        kwargs.update(A_eq=lp.A[~le], b_eq=lp.b[~le])
    res = linprog(lp.c, bounds=list(zip(lp.lo, lp.hi)), method='highs', **kwargs)
    if res.status == 2:
        return 'infeasible', None, None
    assert res.status == 0, res.message
    return 'optimal', res.fun, res.x


def highs_milp(m):
    lp = m.lp
    integrality = np.zeros(lp.num_vars)
    integrality[list(m.binaries)] = 1
    le = np.array([s == '<=' for s in lp.senses], dtype=bool)
    cons = LinearConstraint(lp.A, np.where(le, -np.inf, lp.b), lp.b)
    res = milp(
        lp.c,
        constraints=cons,
        integrality=integrality,
        bounds=Bounds(lp.lo, lp.hi),
        options={'mip_rel_gap': 0.0},
    )
    if res.status == 2:
        return 'infeasible', None, None
    assert res.status == 0, res.message
    return 'optimal', res.fun, res.x


def sd_zero_delta(n, mu, eps):
    """Geometric masses along the multiples of mu, zeros off that lattice."""
    size = (n + 1) // math.gcd(n + 1, mu)
    f0 = (1 - math.exp(-eps)) / (1 - math.exp(-size * eps))
    f = np.zeros(n + 1)
    for k in range(size):
        f[(k * mu) % (n + 1)] = f0 * math.exp(-k * eps)
    return f


def bd_zero_delta(n, mu_bar, eps):
    """Staircase: f(0), then steps of mu_bar equal values decaying by e^-eps."""
    levels = [1.0] + [math.exp(-(1 + i // mu_bar) * eps) for i in range(n)]
    f = np.array(levels)
    return f / f.sum()
