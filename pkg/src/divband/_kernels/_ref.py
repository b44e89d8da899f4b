"""Pure-NumPy reference implementation of the hot kernels.

The compiled extension (_core.pyx) mirrors these functions exactly; parity
is enforced by tests. Family codes: 0 kl, 1 reverse-kl, 2 hellinger2,
3 chi2, 4 alpha (param = alpha), 5 neyman-chi2.
"""

from __future__ import annotations

import numpy as np

_INF = np.inf


def g_by_id(fam_id: int, param: float, y: np.ndarray) -> np.ndarray:
    """Inverse of f' for the built-in families, vectorized."""
    y = np.asarray(y, dtype=np.float64)
    if fam_id == 0:
        with np.errstate(over="ignore"):
            return np.exp(y - 1.0)
    if fam_id == 1:
        with np.errstate(divide="ignore"):
            return np.where(y < 0.0, -1.0 / np.where(y < 0.0, y, -1.0), _INF)
    if fam_id == 2:
        with np.errstate(divide="ignore"):
            return np.where(y < 1.0, (1.0 - np.where(y < 1.0, y, 0.0)) ** -2.0, _INF)
    if fam_id == 3:
        return np.maximum(0.0, 1.0 + 0.5 * y)
    if fam_id == 4:
        a = param
        base = 1.0 + (a - 1.0) * y
        if a > 1.0:
            return np.where(base > 0.0, np.maximum(base, 0.0) ** (1.0 / (a - 1.0)), 0.0)
        with np.errstate(divide="ignore"):
            return np.where(base > 0.0, np.maximum(base, 1e-300) ** (1.0 / (a - 1.0)), _INF)
    if fam_id == 5:
        with np.errstate(divide="ignore"):
            return np.where(y < 1.0, (1.0 - np.where(y < 1.0, y, 0.0)) ** -0.5, _INF)
    raise ValueError(f"unknown family id {fam_id}")


def middle_delta(
    p0m: np.ndarray,
    p1m: np.ndarray,
    eta0: float,
    nu0: float,
    eta1: float,
    nu1: float,
    lam: float,
    fam0_id: int,
    par0: float,
    fam1_id: int,
    par1: float,
    iters: int = 60,
) -> np.ndarray:
    """Pointwise decision values t in [0, 1] on the middle region.

    Solves lam * g0((lam*t + eta0)/nu0) * p0 = g1((1 - t + eta1)/nu1) * p1
    per point by fixed-count bisection; the left side is nondecreasing and
    the right side nonincreasing in t, and the root is bracketed by
    construction of the region.
    """
    p0m = np.asarray(p0m, dtype=np.float64)
    p1m = np.asarray(p1m, dtype=np.float64)
    tlo = np.zeros_like(p0m)
    thi = np.ones_like(p0m)
    for _ in range(iters):
        t = 0.5 * (tlo + thi)
        lhs = lam * g_by_id(fam0_id, par0, (lam * t + eta0) / nu0) * p0m
        rhs = g_by_id(fam1_id, par1, (1.0 - t + eta1) / nu1) * p1m
        above = lhs > rhs
        thi = np.where(above, t, thi)
        tlo = np.where(above, tlo, t)
    return 0.5 * (tlo + thi)


def clip_iterate(
    p0: np.ndarray,
    p1: np.ndarray,
    a0: float,
    b0: float,
    a1: float,
    b1: float,
    lam: float,
    q1_init: np.ndarray,
    fp_tol: float,
    max_iters: int,
    damping: float,
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Alternating coupled clipping with fixed lam and no normalization.

    q0 <- min(b0 p0, max(q1/lam, a0 p0)); q1 <- min(b1 p1, max(lam q0, a1 p1)),
    optionally damped. Returns (q0, q1, iterations, final sup-norm change).
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    q1 = np.asarray(q1_init, dtype=np.float64).copy()
    q0 = np.minimum(b0 * p0, np.maximum(q1 / lam, a0 * p0))
    resid = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        q0_new = np.minimum(b0 * p0, np.maximum(q1 / lam, a0 * p0))
        if damping < 1.0 and it > 1:
            q0_new = (1.0 - damping) * q0 + damping * q0_new
        q1_new = np.minimum(b1 * p1, np.maximum(lam * q0_new, a1 * p1))
        if damping < 1.0 and it > 1:
            q1_new = (1.0 - damping) * q1 + damping * q1_new
        resid = max(
            float(np.max(np.abs(q0_new - q0))), float(np.max(np.abs(q1_new - q1)))
        )
        q0, q1 = q0_new, q1_new
        if resid < fp_tol:
            break
    return q0, q1, it, resid
