"""f-divergence families and numerical evaluation of D_f(h || p).

A family packages the convex function f with f(1) = 0, its nondecreasing
(sub)derivative f', and the inverse g of f' extended by g(y) = 0 below the
infimum of f' and g(y) = +inf above its supremum. Families whose f' is
strictly increasing and continuous are marked ``smooth``; only those are
accepted by the ball calibrator, while evaluation works for all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonSmoothFamily, NumericalNegativity
from .grid import GriddedDensity, quadrature, same_grid, GriddedMeasure

# kernel ids understood by the compiled backend (see _kernels)
KERNEL_KL = 0
KERNEL_REVERSE_KL = 1
KERNEL_HELLINGER2 = 2
KERNEL_CHI2 = 3
KERNEL_ALPHA = 4
KERNEL_NEYMAN_CHI2 = 5


@dataclass(frozen=True)
class DivergenceFamily:
    """Convex f with f(1)=0 plus derivative and inverse-derivative tables.

    ``f``, ``f_prime`` and ``g`` accept and return numpy arrays. ``g`` may be
    None, in which case :func:`g_eval` inverts ``f_prime`` by bisection.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    g: Optional[Callable[[np.ndarray], np.ndarray]]
    f_at_zero: float
    slope_at_infinity: float
    smooth: bool
    alpha: Optional[float] = None
    kernel_id: Optional[int] = None
    kernel_param: float = 0.0

    def __post_init__(self):
        f1 = float(self.f(np.asarray(1.0)))
        if abs(f1) > 1e-12:
            raise ValueError(f"family {self.name}: f(1) = {f1}, must be 0")

    def __repr__(self):
        return f"DivergenceFamily({self.name!r})"


def _g_kl(y):
    with np.errstate(over="ignore"):
        return np.exp(np.asarray(y, dtype=np.float64) - 1.0)


def kl() -> DivergenceFamily:
    return DivergenceFamily(
        name="kl",
        f=lambda t: t * np.log(t),
        f_prime=lambda t: np.log(t) + 1.0,
        g=_g_kl,
        f_at_zero=0.0,
        slope_at_infinity=math.inf,
        smooth=True,
        kernel_id=KERNEL_KL,
    )


def _g_reverse_kl(y):
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(y < 0, -1.0 / np.where(y < 0, y, -1.0), math.inf)


def reverse_kl() -> DivergenceFamily:
    return DivergenceFamily(
        name="reverse-kl",
        f=lambda t: -np.log(t),
        f_prime=lambda t: -1.0 / t,
        g=_g_reverse_kl,
        f_at_zero=math.inf,
        slope_at_infinity=0.0,
        smooth=True,
        kernel_id=KERNEL_REVERSE_KL,
    )


def _g_hellinger2(y):
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(y < 1.0, (1.0 - np.where(y < 1.0, y, 0.0)) ** -2.0, math.inf)


def squared_hellinger() -> DivergenceFamily:
    return DivergenceFamily(
        name="hellinger2",
        f=lambda t: (np.sqrt(t) - 1.0) ** 2,
        f_prime=lambda t: 1.0 - 1.0 / np.sqrt(t),
        g=_g_hellinger2,
        f_at_zero=1.0,
        slope_at_infinity=1.0,
        smooth=True,
        kernel_id=KERNEL_HELLINGER2,
    )


def chi_squared() -> DivergenceFamily:
    return DivergenceFamily(
        name="chi2",
        f=lambda t: (t - 1.0) ** 2,
        f_prime=lambda t: 2.0 * (t - 1.0),
        g=lambda y: np.maximum(0.0, 1.0 + np.asarray(y, dtype=np.float64) / 2.0),
        f_at_zero=1.0,
        slope_at_infinity=math.inf,
        smooth=True,
        kernel_id=KERNEL_CHI2,
    )


def _g_neyman(y):
    y = np.asarray(y, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.where(y < 1.0, (1.0 - np.where(y < 1.0, y, 0.0)) ** -0.5, math.inf)


def neyman_chi_squared() -> DivergenceFamily:
    """Reversal partner of chi2: f(x) = (1-x)^2 / x."""
    return DivergenceFamily(
        name="neyman-chi2",
        f=lambda t: (1.0 - t) ** 2 / t,
        f_prime=lambda t: 1.0 - t**-2.0,
        g=_g_neyman,
        f_at_zero=math.inf,
        slope_at_infinity=1.0,
        smooth=True,
        kernel_id=KERNEL_NEYMAN_CHI2,
    )


def alpha_divergence(alpha: float) -> DivergenceFamily:
    """f(x) = (x^a - a x - (1-a)) / (a (a-1)), a not in {0, 1}.

    This normalization has f(1) = 0, nests KL and reverse-KL as the limits
    a -> 1 and a -> 0, and satisfies reverse(alpha) = alpha_divergence(1-a).
    """
    a = float(alpha)
    if a in (0.0, 1.0):
        raise ValueError("alpha divergence needs alpha not in {0, 1}")

    def f(t):
        t = np.asarray(t, dtype=np.float64)
        return (t**a - a * t - (1.0 - a)) / (a * (a - 1.0))

    def f_prime(t):
        t = np.asarray(t, dtype=np.float64)
        return (t ** (a - 1.0) - 1.0) / (a - 1.0)

    def g(y):
        y = np.asarray(y, dtype=np.float64)
        base = 1.0 + (a - 1.0) * y
        if a > 1.0:
            return np.where(base > 0, np.maximum(base, 0.0) ** (1.0 / (a - 1.0)), 0.0)
        with np.errstate(divide="ignore"):
            return np.where(base > 0, np.maximum(base, 1e-300) ** (1.0 / (a - 1.0)), math.inf)

    if a > 1.0:
        f_at_zero = 1.0 / a
        slope = math.inf
    elif a > 0.0:
        f_at_zero = 1.0 / a
        slope = 1.0 / (1.0 - a)
    else:
        f_at_zero = math.inf
        slope = 1.0 / (1.0 - a)
    return DivergenceFamily(
        name=f"alpha:{a:g}",
        f=f,
        f_prime=f_prime,
        g=g,
        f_at_zero=f_at_zero,
        slope_at_infinity=slope,
        smooth=True,
        alpha=a,
        kernel_id=KERNEL_ALPHA,
        kernel_param=a,
    )


def total_variation() -> DivergenceFamily:
    """f(x) = |x-1|/2. Evaluation only: f' has a kink, so g is set-valued."""
    return DivergenceFamily(
        name="tv",
        f=lambda t: np.abs(t - 1.0) / 2.0,
        f_prime=lambda t: np.sign(np.asarray(t, dtype=np.float64) - 1.0) / 2.0,
        g=None,
        f_at_zero=0.5,
        slope_at_infinity=0.5,
        smooth=False,
    )


def make_family(name: str) -> DivergenceFamily:
    """Resolve a CLI family name: kl, reverse-kl, hellinger2, chi2,
    alpha:<value>, tv."""
    key = name.strip().lower()
    simple = {
        "kl": kl,
        "reverse-kl": reverse_kl,
        "hellinger2": squared_hellinger,
        "chi2": chi_squared,
        "neyman-chi2": neyman_chi_squared,
        "tv": total_variation,
    }
    if key in simple:
        return simple[key]()
    if key.startswith("alpha:"):
        return alpha_divergence(float(key.split(":", 1)[1]))
    raise ValueError(f"unknown divergence family {name!r}")


def eval_divergence(h: GriddedMeasure, p: GriddedMeasure, fam: DivergenceFamily) -> float:
    """D_f(h || p) = integral of f(h/p) p, with the lower-semicontinuous
    boundary conventions at h = 0 or p = 0.

    Returns +inf when the conventions produce an infinite integrand on a set
    of positive quadrature weight. Small negative totals (above -1e-10) are
    clamped to 0; anything more negative signals a broken family.
    """
    grid = same_grid(h, p)
    hv, pv = h.values, p.values
    both = (hv > 0) & (pv > 0)
    out = np.zeros(grid.n)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out[both] = fam.f(hv[both] / pv[both]) * pv[both]
    h_only = (pv == 0) & (hv > 0)
    if np.any(h_only):
        out[h_only] = fam.slope_at_infinity * hv[h_only]
    p_only = (hv == 0) & (pv > 0)
    if np.any(p_only):
        out[p_only] = fam.f_at_zero * pv[p_only]
    total = float(np.dot(grid.weights, out))
    if math.isnan(total):
        raise NumericalNegativity(f"divergence for {fam.name} evaluated to NaN")
    if total < -1e-10:
        raise NumericalNegativity(
            f"divergence for {fam.name} came out {total}; family is inconsistent"
        )
    return max(total, 0.0)


def reverse_family(fam: DivergenceFamily) -> DivergenceFamily:
    """Family of the reversal f~(x) = f(1/x) x, so that
    D_f(p || h) = D_f~(h || p) for all densities h, p.

    Known pairs are returned in closed form; other families get a generic
    wrapper whose g falls back to numeric inversion.
    """
    closed = {
        "kl": reverse_kl,
        "reverse-kl": kl,
        "hellinger2": squared_hellinger,
        "chi2": neyman_chi_squared,
        "neyman-chi2": chi_squared,
        "tv": total_variation,
    }
    if fam.name in closed:
        return closed[fam.name]()
    if fam.alpha is not None:
        return alpha_divergence(1.0 - fam.alpha)

    def f(t):
        t = np.asarray(t, dtype=np.float64)
        return fam.f(1.0 / t) * t

    def f_prime(t):
        t = np.asarray(t, dtype=np.float64)
        return fam.f(1.0 / t) - fam.f_prime(1.0 / t) / t

    return DivergenceFamily(
        name=f"reverse({fam.name})",
        f=f,
        f_prime=f_prime,
        g=None,
        f_at_zero=fam.slope_at_infinity,
        slope_at_infinity=fam.f_at_zero,
        smooth=fam.smooth,
    )


def g_eval(fam: DivergenceFamily, y) -> float | np.ndarray:
    """Inverse of f' at y: the unique x >= 0 with f'(x) = y, extended by 0
    below the infimum of f' and +inf above its supremum.

    Uses the family's closed form when available, otherwise bracketed
    bisection on f' to 1e-12 relative accuracy.
    """
    if not fam.smooth:
        raise NonSmoothFamily(f"family {fam.name} has no single-valued g")
    scalar = np.isscalar(y) or np.ndim(y) == 0
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if fam.g is not None:
        out = np.asarray(fam.g(y_arr), dtype=np.float64)
    else:
        out = np.array([_g_bisect(fam, float(yi)) for yi in y_arr])
    return float(out[0]) if scalar else out


def _g_bisect(fam: DivergenceFamily, y: float) -> float:
    lo, hi = 1e-12, 1.0
    f_lo = float(fam.f_prime(np.asarray(lo)))
    if y <= f_lo:
        # at or below the (numerical) infimum of f'
        return 0.0 if y < f_lo else lo
    f_hi = float(fam.f_prime(np.asarray(hi)))
    while f_hi < y:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
        f_hi = float(fam.f_prime(np.asarray(hi)))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(fam.f_prime(np.asarray(mid))) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)
