"""Equivalent density-band construction for f-divergence ball uncertainty.

Given two balls {h : D_f0(h||p0) <= eps0} and {h : D_f1(h||p1) <= eps1} and a
threshold lam, the calibrator finds Lagrange multipliers (eta0, nu0, eta1, nu1)
such that the stationary density pair

    q0 = g0((lam*delta + eta0)/nu0) * p0,
    q1 = g1((1 - delta + eta1)/nu1) * p1,     q1 = lam * q0 on the middle set,

has unit masses and active divergence constraints. The band scalars follow as
a0 = g0(eta0/nu0), b0 = g0((lam+eta0)/nu0), a1 = g1(eta1/nu1),
b1 = g1((1+eta1)/nu1), and the pair is simultaneously the least favorable one
for the band model with bounds (a_i p_i, b_i p_i).

The pair is built pointwise: the grid splits by the nominal likelihood ratio
l = p1/p0 into a region where both densities clip (l < lam*a0/b1, decision
value 0), a region where both clip the other way (l > lam*b0/a1, decision
value 1), and a middle region where the decision value solves a monotone
scalar equation per point. This construction is exact: it is a fixed point of
the coupled clip maps and satisfies the stationarity system to solver
precision, which iterating the clip maps from an arbitrary start does not
(the middle-region shape of a clip fixed point depends on its initializer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import _kernels
from .bands import (
    LOWER_CLIP,
    MIDDLE,
    UPPER_CLIP,
    BandModel,
    SolverOptions,
    scaled_band,
)
from .divergence import DivergenceFamily, eval_divergence, g_eval
from .errors import (
    DegenerateOverlap,
    NoConvergence,
    NonSmoothFamily,
)
from .grid import Grid, GriddedDensity, GriddedMeasure, same_grid

P_FLOOR = 1e-12


@dataclass(frozen=True)
class UncertaintyBall:
    """All densities within divergence epsilon of the nominal."""

    nominal: GriddedDensity
    family: DivergenceFamily
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")


@dataclass(frozen=True)
class CalibrationResult:
    eta0: float
    nu0: float
    eta1: float
    nu1: float
    a0: float
    b0: float
    a1: float
    b1: float
    lam: float
    q0: GriddedDensity
    q1: GriddedDensity
    residuals: np.ndarray = field(repr=False)  # mass0, mass1, div0, div1 defects
    band0: BandModel = field(repr=False)
    band1: BandModel = field(repr=False)
    regions0: np.ndarray = field(repr=False)
    regions1: np.ndarray = field(repr=False)
    delta_star: np.ndarray = field(repr=False)  # P(decide H1) per grid point
    nfev: int = 0

    def to_dict(self) -> dict:
        from .bands import region_names

        return {
            "grid": self.q0.grid.to_dict(),
            "multipliers": {
                "eta0": self.eta0,
                "nu0": self.nu0,
                "eta1": self.eta1,
                "nu1": self.nu1,
            },
            "coefficients": {"a0": self.a0, "b0": self.b0, "a1": self.a1, "b1": self.b1},
            "lambda": self.lam,
            "residuals": {
                "mass0": float(self.residuals[0]),
                "mass1": float(self.residuals[1]),
                "divergence0": float(self.residuals[2]),
                "divergence1": float(self.residuals[3]),
            },
            "q0": self.q0.values.tolist(),
            "q1": self.q1.values.tolist(),
            "regions0": region_names(self.regions0),
            "regions1": region_names(self.regions1),
            "nfev": self.nfev,
        }


def coefficients_from_multipliers(
    eta: float, nu: float, weight: float, fam: DivergenceFamily
) -> tuple[float, float]:
    """Band scalars (a, b) = (g(eta/nu), g((weight+eta)/nu)).

    ``weight`` is lam for hypothesis 0 and 1 for hypothesis 1. Since g is
    nondecreasing and weight >= 0, always a <= b.
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if not fam.smooth:
        raise NonSmoothFamily(f"family {fam.name} is not smooth")
    return float(g_eval(fam, eta / nu)), float(g_eval(fam, (weight + eta) / nu))


class _State:
    """Pointwise KKT construction at fixed multipliers (plain arrays)."""

    __slots__ = ("a0", "b0", "a1", "b1", "q0", "q1", "r0", "r1", "low", "mid", "high",
                 "delta", "mass0", "mass1", "div0", "div1", "feasible")


def _kkt_state(p0, p1, l_ratio, w, fam0, fam1, eta0, nu0, eta1, nu1, lam,
               eps0, eps1) -> _State:
    st = _State()
    a0, b0 = coefficients_from_multipliers(eta0, nu0, lam, fam0)
    a1, b1 = coefficients_from_multipliers(eta1, nu1, 1.0, fam1)
    st.a0, st.b0, st.a1, st.b1 = a0, b0, a1, b1
    if not all(map(math.isfinite, (a0, b0, a1, b1))):
        st.feasible = False
        st.mass0 = st.mass1 = math.inf
        st.div0 = st.div1 = math.inf
        return st
    st.feasible = True
    low = l_ratio < (lam * a0 / b1 if b1 > 0 else math.inf)
    if a1 > 0:
        high = l_ratio * a1 > lam * b0
    else:
        high = np.zeros_like(low)
    mid = ~(low | high)
    r0 = np.where(low, a0, b0)
    r1 = np.where(low, b1, a1)
    delta = np.where(low, 0.0, 1.0)
    if np.any(mid):
        if fam0.kernel_id is not None and fam1.kernel_id is not None:
            t = _kernels.middle_delta(
                np.ascontiguousarray(p0[mid]),
                np.ascontiguousarray(p1[mid]),
                eta0, nu0, eta1, nu1, lam,
                fam0.kernel_id, fam0.kernel_param,
                fam1.kernel_id, fam1.kernel_param,
            )
        else:
            t = _middle_delta_generic(p0[mid], p1[mid], eta0, nu0, eta1, nu1, lam,
                                      fam0, fam1)
        g0_mid = np.asarray(g_eval(fam0, (lam * t + eta0) / nu0))
        r0 = r0.copy()
        r0[mid] = g0_mid
        delta[mid] = t
    q0 = r0 * p0
    q1 = np.where(mid, lam * q0, r1 * p1)
    st.q0, st.q1 = q0, q1
    st.r0 = r0
    st.r1 = np.where(p1 > 0, q1 / np.where(p1 > 0, p1, 1.0), 0.0)
    st.low, st.mid, st.high = low, mid, high
    st.delta = delta
    st.mass0 = float(np.dot(w, q0))
    st.mass1 = float(np.dot(w, q1))
    st.div0 = _div_from_ratio(fam0, st.r0, p0, w) - eps0
    st.div1 = _div_from_ratio(fam1, st.r1, p1, w) - eps1
    return st


def _div_from_ratio(fam, r, p, w) -> float:
    """Divergence integral from the ratio array, with the h=0 convention."""
    pos = p > 0
    rp, pp, wp = r[pos], p[pos], w[pos]
    out = np.zeros_like(rp)
    rpos = rp > 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out[rpos] = np.asarray(fam.f(rp[rpos])) * pp[rpos]
    if not rpos.all():
        out[~rpos] = fam.f_at_zero * pp[~rpos]
    return float(np.dot(wp, out))


def _middle_delta_generic(p0m, p1m, eta0, nu0, eta1, nu1, lam, fam0, fam1, iters=60):
    """NumPy bisection for families without a kernel id."""
    tlo = np.zeros(len(p0m))
    thi = np.ones(len(p0m))
    for _ in range(iters):
        t = 0.5 * (tlo + thi)
        lhs = lam * np.asarray(g_eval(fam0, (lam * t + eta0) / nu0)) * p0m
        rhs = np.asarray(g_eval(fam1, (1.0 - t + eta1) / nu1)) * p1m
        above = lhs > rhs
        thi = np.where(above, t, thi)
        tlo = np.where(above, tlo, t)
    return 0.5 * (tlo + thi)


class _Calibrator:
    """Nested scalar solves for the four multipliers.

    Inner loop: for fixed (nu0, nu1), alternate eta0/eta1 root solves for the
    two mass defects (mass_i is nondecreasing in eta_i; the bracket expansion
    doubles as a runtime monotonicity check). Outer loop: alternate nu0/nu1
    root solves for the two divergence defects (nonincreasing in nu after
    mass re-calibration). Any bracketing failure or stall falls back to a
    damped quasi-Newton solve on the full 4-vector.
    """

    def __init__(self, p0, p1, w, fam0, fam1, lam, eps0, eps1):
        self.p0, self.p1, self.w = p0, p1, w
        self.fam0, self.fam1 = fam0, fam1
        self.lam = lam
        self.eps0, self.eps1 = eps0, eps1
        with np.errstate(divide="ignore", invalid="ignore"):
            self.l_ratio = np.where(p0 > 0, p1 / np.where(p0 > 0, p0, 1.0), math.inf)
        self.nfev = 0

    def state(self, eta0, nu0, eta1, nu1) -> _State:
        self.nfev += 1
        return _kkt_state(self.p0, self.p1, self.l_ratio, self.w, self.fam0, self.fam1,
                          eta0, nu0, eta1, nu1, self.lam, self.eps0, self.eps1)

    # -- scalar root helpers -------------------------------------------------
    def _solve_eta(self, which, eta, nu_pair, eta_other, xtol=1e-13):
        """Root of mass_which(eta) - 1, bracketing by geometric expansion."""
        nu0, nu1 = nu_pair

        def mass(e):
            if which == 0:
                st = self.state(e, nu0, eta_other, nu1)
                return st.mass0 - 1.0
            st = self.state(eta_other, nu0, e, nu1)
            return st.mass1 - 1.0

        f0 = mass(eta)
        if f0 == 0.0:
            return eta
        step = max(0.25, 0.25 * abs(eta))
        lo = hi = eta
        f_lo = f_hi = f0
        for _ in range(120):
            if f_lo > 0:
                lo -= step
                step *= 2.0
                f_lo = mass(lo)
            elif f_hi < 0:
                hi += step
                step *= 2.0
                f_hi = mass(hi)
            else:
                break
        else:
            raise NoConvergence(f"could not bracket eta{which} for the mass constraint")
        return float(scipy.optimize.brentq(mass, lo, hi, xtol=xtol, rtol=8.9e-16))

    def solve_masses(self, eta0, nu0, eta1, nu1, tol=1e-11, rounds=60):
        for _ in range(rounds):
            st = self.state(eta0, nu0, eta1, nu1)
            if abs(st.mass0 - 1.0) <= tol and abs(st.mass1 - 1.0) <= tol:
                return eta0, eta1
            if abs(st.mass0 - 1.0) > tol:
                eta0 = self._solve_eta(0, eta0, (nu0, nu1), eta1)
            st = self.state(eta0, nu0, eta1, nu1)
            if abs(st.mass1 - 1.0) > tol:
                eta1 = self._solve_eta(1, eta1, (nu0, nu1), eta0)
        raise NoConvergence("mass calibration stalled")

    def _solve_nu(self, which, nu, nus, etas, xtol=1e-12):
        nu0, nu1 = nus
        eta_state = {"etas": etas}

        def defect(v):
            if which == 0:
                e0, e1 = self.solve_masses(eta_state["etas"][0], v,
                                           eta_state["etas"][1], nu1)
                eta_state["etas"] = (e0, e1)
                return self.state(e0, v, e1, nu1).div0
            e0, e1 = self.solve_masses(eta_state["etas"][0], nu0,
                                       eta_state["etas"][1], v)
            eta_state["etas"] = (e0, e1)
            return self.state(e0, nu0, e1, v).div1

        f0 = defect(nu)
        if f0 == 0.0:
            return nu, eta_state["etas"]
        lo = hi = nu
        f_lo = f_hi = f0
        for _ in range(120):
            if f_lo < 0:  # divergence too small: widen the band by shrinking nu
                lo /= 1.7
                f_lo = defect(lo)
            elif f_hi > 0:
                hi *= 1.7
                f_hi = defect(hi)
            else:
                break
        else:
            raise NoConvergence(f"could not bracket nu{which} for the divergence constraint")
        root = float(scipy.optimize.brentq(defect, lo, hi, xtol=xtol, rtol=8.9e-16))
        defect(root)  # leave eta_state at the root
        return root, eta_state["etas"]

    # -- drivers ---------------------------------------------------------
    def run_nested(self, eta0, nu0, eta1, nu1, target, rounds=30):
        eta0, eta1 = self.solve_masses(eta0, nu0, eta1, nu1)
        for _ in range(rounds):
            st = self.state(eta0, nu0, eta1, nu1)
            if max(abs(st.div0), abs(st.div1)) <= target:
                return eta0, nu0, eta1, nu1
            if abs(st.div0) > target:
                nu0, (eta0, eta1) = self._solve_nu(0, nu0, (nu0, nu1), (eta0, eta1))
            st = self.state(eta0, nu0, eta1, nu1)
            if abs(st.div1) > target:
                nu1, (eta0, eta1) = self._solve_nu(1, nu1, (nu0, nu1), (eta0, eta1))
        raise NoConvergence("outer divergence calibration stalled")

    def run_quasi_newton(self, eta0, nu0, eta1, nu1):
        """Damped quasi-Newton (Powell hybrid, finite-difference Jacobian) on
        (eta0, log nu0, eta1, log nu1)."""

        def resid(v):
            st = self.state(v[0], math.exp(v[1]), v[2], math.exp(v[3]))
            return [st.mass0 - 1.0, st.mass1 - 1.0, st.div0, st.div1]

        sol = scipy.optimize.root(
            resid,
            [eta0, math.log(nu0), eta1, math.log(nu1)],
            method="hybr",
            options={"xtol": 1e-13, "maxfev": 200 * 5, "eps": 1e-5},
        )
        v = sol.x
        return v[0], math.exp(v[1]), v[2], math.exp(v[3])


def _collapsed_multipliers(fam: DivergenceFamily) -> tuple[float, float]:
    """Multipliers representing a zero-radius ball: nu -> inf pins a = b = 1."""
    nu = 1e30
    fp1 = float(fam.f_prime(np.asarray(1.0)))
    return nu * fp1, nu


def _balls_overlap(ball0: UncertaintyBall, ball1: UncertaintyBall) -> bool:
    """Sufficient overlap check: scan the geometric path between the nominals
    for a density inside both balls."""
    grid = ball0.nominal.grid
    p0 = ball0.nominal.values
    p1 = ball1.nominal.values
    for t in np.linspace(0.0, 1.0, 33):
        with np.errstate(divide="ignore"):
            raw = np.where(
                (p0 > 0) & (p1 > 0), p0 ** (1.0 - t) * p1**t, 0.0
            )
        mass = float(np.dot(grid.weights, raw))
        if mass <= 0:
            continue
        h = GriddedMeasure(grid, raw / mass)
        d0 = _div_from_ratio(
            ball0.family, np.where(p0 > 0, h.values / np.where(p0 > 0, p0, 1.0), 0.0),
            p0, grid.weights,
        )
        d1 = _div_from_ratio(
            ball1.family, np.where(p1 > 0, h.values / np.where(p1 > 0, p1, 1.0), 0.0),
            p1, grid.weights,
        )
        if d0 <= ball0.epsilon and d1 <= ball1.epsilon:
            return True
    return False


def calibrate(
    ball0: UncertaintyBall,
    ball1: UncertaintyBall,
    lam: float,
    opts: SolverOptions | None = None,
    calib_tol: float = 1e-6,
) -> CalibrationResult:
    """Multipliers, band scalars, and the least favorable pair for two balls.

    Raises NonSmoothFamily for families without an invertible f',
    DegenerateOverlap when the balls are large enough that the least
    favorable densities coincide, and NoConvergence when neither the nested
    scalar scheme nor the quasi-Newton fallback reaches ``calib_tol``.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    if not ball0.family.smooth or not ball1.family.smooth:
        raise NonSmoothFamily(
            "calibration needs smooth families; total variation is evaluation-only"
        )
    grid = same_grid(ball0.nominal, ball1.nominal)
    p0 = ball0.nominal.values
    p1 = ball1.nominal.values
    w = grid.weights
    fam0, fam1 = ball0.family, ball1.family
    eps0, eps1 = ball0.epsilon, ball1.epsilon

    cal = _Calibrator(p0, p1, w, fam0, fam1, lam, eps0, eps1)

    if eps0 == 0.0 and eps1 == 0.0:
        return _zero_radius_result(ball0, ball1, lam, grid, cal)

    # zero-radius sides are held at collapsed multipliers, not solved
    fixed0 = eps0 == 0.0
    fixed1 = eps1 == 0.0
    if fixed0:
        eta0, nu0 = _collapsed_multipliers(fam0)
    else:
        nu0 = 1.0
        eta0 = float(fam0.f_prime(np.asarray(1.0))) - lam / 2.0
    if fixed1:
        eta1, nu1 = _collapsed_multipliers(fam1)
    else:
        nu1 = 1.0
        eta1 = float(fam1.f_prime(np.asarray(1.0))) - 0.5

    target = min(1e-9, 0.1 * calib_tol)
    try:
        if fixed0 or fixed1:
            eta0, nu0, eta1, nu1 = _run_one_sided(cal, eta0, nu0, eta1, nu1,
                                                  fixed0, fixed1, target)
        else:
            eta0, nu0, eta1, nu1 = cal.run_nested(eta0, nu0, eta1, nu1, target)
    except (NoConvergence, ValueError):
        if _balls_overlap(ball0, ball1):
            raise DegenerateOverlap(
                "the divergence balls intersect: no separating least favorable "
                "pair exists at these radii"
            ) from None
        eta0, nu0, eta1, nu1 = cal.run_quasi_newton(eta0, nu0, eta1, nu1)

    st = cal.state(eta0, nu0, eta1, nu1)
    residuals = np.array([st.mass0 - 1.0, st.mass1 - 1.0, st.div0, st.div1])
    if np.max(np.abs(residuals)) > calib_tol:
        # one more chance: polish with the quasi-Newton fallback
        eta0, nu0, eta1, nu1 = cal.run_quasi_newton(eta0, nu0, eta1, nu1)
        st = cal.state(eta0, nu0, eta1, nu1)
        residuals = np.array([st.mass0 - 1.0, st.mass1 - 1.0, st.div0, st.div1])
        if np.max(np.abs(residuals)) > calib_tol:
            if _balls_overlap(ball0, ball1):
                raise DegenerateOverlap(
                    "the divergence balls intersect: no separating least "
                    "favorable pair exists at these radii"
                )
            raise NoConvergence(
                f"calibration residuals {residuals} exceed calib_tol={calib_tol}"
            )

    tv = 0.5 * float(np.dot(w, np.abs(st.q0 - st.q1)))
    if tv <= 1e-6:
        raise DegenerateOverlap(
            f"least favorable densities coincide (total variation {tv:.2e}); "
            "the divergence balls intersect"
        )

    labels0 = np.zeros(grid.n, dtype=np.int8)
    labels0[st.low] = LOWER_CLIP
    labels0[st.high] = UPPER_CLIP
    labels1 = np.zeros(grid.n, dtype=np.int8)
    labels1[st.low] = UPPER_CLIP
    labels1[st.high] = LOWER_CLIP

    return CalibrationResult(
        eta0=eta0, nu0=nu0, eta1=eta1, nu1=nu1,
        a0=st.a0, b0=st.b0, a1=st.a1, b1=st.b1,
        lam=lam,
        q0=GriddedDensity(grid, st.q0 / st.mass0),
        q1=GriddedDensity(grid, st.q1 / st.mass1),
        residuals=residuals,
        band0=scaled_band(ball0.nominal, st.a0, st.b0),
        band1=scaled_band(ball1.nominal, st.a1, st.b1),
        regions0=labels0,
        regions1=labels1,
        delta_star=st.delta,
        nfev=cal.nfev,
    )


def _run_one_sided(cal, eta0, nu0, eta1, nu1, fixed0, fixed1, target):
    """Nested solve when one ball has zero radius (its multipliers stay put)."""
    for _ in range(30):
        if fixed0:
            eta1 = cal._solve_eta(1, eta1, (nu0, nu1), eta0)
            st = cal.state(eta0, nu0, eta1, nu1)
            if abs(st.div1) <= target:
                return eta0, nu0, eta1, nu1
            nu1, (eta0, eta1) = cal._solve_nu(1, nu1, (nu0, nu1), (eta0, eta1))
        else:
            eta0 = cal._solve_eta(0, eta0, (nu0, nu1), eta1)
            st = cal.state(eta0, nu0, eta1, nu1)
            if abs(st.div0) <= target:
                return eta0, nu0, eta1, nu1
            nu0, (eta0, eta1) = cal._solve_nu(0, nu0, (nu0, nu1), (eta0, eta1))
    raise NoConvergence("one-sided calibration stalled")


def _zero_radius_result(ball0, ball1, lam, grid, cal) -> CalibrationResult:
    p0, p1 = ball0.nominal, ball1.nominal
    l_ratio = cal.l_ratio
    labels0 = np.zeros(grid.n, dtype=np.int8)
    labels1 = np.zeros(grid.n, dtype=np.int8)
    delta = np.where(l_ratio > lam, 1.0, np.where(l_ratio < lam, 0.0, 0.5))
    return CalibrationResult(
        eta0=math.inf, nu0=math.inf, eta1=math.inf, nu1=math.inf,
        a0=1.0, b0=1.0, a1=1.0, b1=1.0,
        lam=lam,
        q0=p0, q1=p1,
        residuals=np.zeros(4),
        band0=scaled_band(p0, 1.0, 1.0),
        band1=scaled_band(p1, 1.0, 1.0),
        regions0=labels0,
        regions1=labels1,
        delta_star=delta,
        nfev=cal.nfev,
    )


def clip_fixed_point(
    a0: float, b0: float, a1: float, b1: float,
    lam: float,
    p0: GriddedDensity, p1: GriddedDensity,
    opts: SolverOptions | None = None,
) -> tuple[GriddedMeasure, GriddedMeasure]:
    """Damped alternating clipping with fixed lam and no normalization.

    Starts from q1 = p1 and iterates q0 <- min(b0 p0, max(q1/lam, a0 p0)),
    q1 <- min(b1 p1, max(lam q0, a1 p1)) until the sup-norm change drops
    below fp_tol. Outputs are measures: their masses feed the calibration
    residual system. Note the fixed-point set is not a singleton; this
    operation returns the p1-initialized member.
    """
    if min(a0, a1) < 0 or b0 < a0 or b1 < a1 or lam <= 0:
        raise ValueError("need 0 <= a_i <= b_i and lam > 0")
    opts = opts or SolverOptions()
    grid = same_grid(p0, p1)
    q0, q1, iters, resid = _kernels.clip_iterate(
        p0.values, p1.values, a0, b0, a1, b1, lam,
        p1.values, opts.fp_tol, opts.max_iters, opts.damping,
    )
    if resid >= opts.fp_tol:
        raise NoConvergence(
            f"clip fixed point did not reach {opts.fp_tol} in {opts.max_iters} "
            f"iterations (last change {resid})"
        )
    m0 = GriddedMeasure(grid, q0)
    m1 = GriddedMeasure(grid, q1)
    mass0, mass1 = m0.total_mass, m1.total_mass
    if mass0 > 0 and mass1 > 0:
        tv = 0.5 * float(np.dot(grid.weights, np.abs(q0 / mass0 - q1 / mass1)))
        if tv <= 1e-6:
            raise DegenerateOverlap(
                "clip fixed point collapsed to proportional densities; "
                "the coupled equations are rank-deficient for these bounds"
            )
    return m0, m1


def extract_band_coefficients(
    q: GriddedDensity,
    p: GriddedDensity,
    regions: np.ndarray | None = None,
    p_floor: float = P_FLOOR,
) -> tuple[float, float]:
    """Scalars (a, b) from the ratio of a least favorable density to its nominal.

    Without labels: (min, max) of q/p over p > p_floor. With labels: averages
    over the lower-/upper-clip regions, cross-checked against the extremes to
    1e-6 relative. A missing clip region downgrades to the extremes with a
    warning.
    """
    import warnings

    same_grid(q, p)
    mask = p.values > p_floor
    ratio = q.values[mask] / p.values[mask]
    a_ext, b_ext = float(np.min(ratio)), float(np.max(ratio))
    if regions is None:
        return a_ext, b_ext
    reg = np.asarray(regions)[mask]
    lower = reg == LOWER_CLIP
    upper = reg == UPPER_CLIP
    if not lower.any() or not upper.any():
        missing = "lower" if not lower.any() else "upper"
        warnings.warn(
            f"{missing}-clip region is empty; returning ratio extremes", stacklevel=2
        )
        return a_ext, b_ext
    a_avg = float(np.mean(ratio[lower]))
    b_avg = float(np.mean(ratio[upper]))
    if abs(a_avg - a_ext) > 1e-6 * max(abs(a_avg), 1e-30) or (
        abs(b_avg - b_ext) > 1e-6 * max(abs(b_avg), 1e-30)
    ):
        raise ValueError(
            f"clip-region averages ({a_avg}, {b_avg}) disagree with ratio "
            f"extremes ({a_ext}, {b_ext}); region labels are inconsistent"
        )
    return a_avg, b_avg


@dataclass(frozen=True)
class ContaminationReport:
    """Outlier-model reading of an equivalent band: ratios and envelopes."""

    ratio0: float
    ratio1: float
    envelope_factor0: float | None
    envelope_factor1: float | None
    envelope0: np.ndarray | None = field(repr=False, default=None)
    envelope1: np.ndarray | None = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "contamination_ratio0": self.ratio0,
            "contamination_ratio1": self.ratio1,
            "envelope_factor0": self.envelope_factor0,
            "envelope_factor1": self.envelope_factor1,
        }


def contamination_report(result: CalibrationResult) -> ContaminationReport:
    """Contamination ratios 1 - a_i and outlier envelopes (b_i-a_i)/(1-a_i) p_i."""

    def one(a, b, nominal_values):
        ratio = 1.0 - a
        if ratio <= 0.0:
            return 0.0, None, None
        factor = (b - a) / ratio
        return ratio, factor, factor * nominal_values

    # nominals are recoverable from the bands: upper = b * p
    nom0 = result.band0.upper.values / result.b0
    nom1 = result.band1.upper.values / result.b1
    r0, f0, e0 = one(result.a0, result.b0, nom0)
    r1, f1, e1 = one(result.a1, result.b1, nom1)
    return ContaminationReport(r0, r1, f0, f1, e0, e1)


def stationarity_residuals_for(
    result: CalibrationResult,
    ball0: UncertaintyBall,
    ball1: UncertaintyBall,
    p_floor: float = P_FLOOR,
) -> tuple[float, float]:
    """Sup-norm stationarity defects, given the balls that produced ``result``."""
    if not math.isfinite(result.nu0):
        return 0.0, 0.0
    p0 = ball0.nominal.values
    p1 = ball1.nominal.values
    q0 = result.q0.values
    q1 = result.q1.values
    lam = result.lam
    fam0, fam1 = ball0.family, ball1.family

    mask0 = p0 > p_floor
    mask1 = p1 > p_floor
    r0 = q0[mask0] / p0[mask0]
    r1 = q1[mask1] / p1[mask1]

    # delta in the source labeling: 1 on the q1-upper-clip side, 0 on the
    # q1-lower-clip side, interior from the hypothesis-1 identity on middle
    delta_chk = np.empty(len(p1))
    delta_chk[result.regions1 == UPPER_CLIP] = 1.0
    delta_chk[result.regions1 == LOWER_CLIP] = 0.0
    mid = result.regions1 == MIDDLE
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio_mid = np.where(p1 > 0, q1 / np.where(p1 > 0, p1, 1.0), 0.0)[mid]
    delta_chk[mid] = np.clip(
        result.nu1 * np.asarray(fam1.f_prime(np.maximum(ratio_mid, 1e-300)))
        - result.eta1,
        0.0,
        1.0,
    )

    res0 = lam * (1.0 - delta_chk[mask0]) - (
        result.nu0 * np.asarray(fam0.f_prime(np.maximum(r0, 1e-300))) - result.eta0
    )
    res1 = delta_chk[mask1] - (
        result.nu1 * np.asarray(fam1.f_prime(np.maximum(r1, 1e-300))) - result.eta1
    )
    return float(np.max(np.abs(res0))), float(np.max(np.abs(res1)))


def lfd_pair_from_multipliers(
    p0: GriddedDensity,
    p1: GriddedDensity,
    fam0: DivergenceFamily,
    fam1: DivergenceFamily,
    eta0: float,
    nu0: float,
    eta1: float,
    nu1: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise stationary pair (q0, q1, delta) on an arbitrary grid.

    Used to transport a calibrated solution to a coarser grid for the
    repeated-observation probes; masses come out 1 only up to the coarse
    quadrature error.
    """
    grid = same_grid(p0, p1)
    cal = _Calibrator(p0.values, p1.values, grid.weights, fam0, fam1, lam, 0.0, 0.0)
    st = cal.state(eta0, nu0, eta1, nu1)
    return st.q0, st.q1, st.delta
