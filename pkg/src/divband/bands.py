"""Density-band uncertainty models and their least favorable density pairs.

A band constrains the true density pointwise between a nonnegative lower
measure and an upper measure. The least favorable pair for two bands is a
coupled clipping fixed point; it is computed here by alternating normalized
clipping, where each half-step rescales the opposing density until the
clipped result has unit mass.

The pair is not unique in general: on the region where neither density is
clipped, only the ratio q1/q0 and the total middle mass are pinned, so the
converged shape there depends on the starting point. ``solve_band_lfds``
accepts an explicit initializer for callers that need a particular selection
(for example the ball calibrator's round trip); the default start is the
normalized clip of the band-1 midpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketFailure,
    DegenerateOverlap,
    InfeasibleBand,
    NoConvergence,
    ZeroDirection,
)
from .grid import (
    NORM_TOL,
    Grid,
    GriddedDensity,
    GriddedMeasure,
    normalize,
    quadrature,
    same_grid,
)

# region labels
LOWER_CLIP = -1
MIDDLE = 0
UPPER_CLIP = 1

_LABEL_NAMES = {LOWER_CLIP: "lower-clip", MIDDLE: "middle", UPPER_CLIP: "upper-clip"}


def region_names(labels: np.ndarray) -> list[str]:
    return [_LABEL_NAMES[int(v)] for v in labels]


@dataclass(frozen=True)
class SolverOptions:
    fp_tol: float = 1e-10
    max_iters: int = 10_000
    bisect_tol: float = 1e-12
    damping: float = 1.0

    def __post_init__(self):
        if self.fp_tol <= 0 or self.max_iters <= 0 or self.bisect_tol <= 0:
            raise ValueError("solver tolerances and iteration budget must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class BandModel:
    """Pointwise envelope lower <= h <= upper for a probability density."""

    lower: GriddedMeasure
    upper: GriddedMeasure

    def __post_init__(self):
        same_grid(self.lower, self.upper)
        if np.any(self.lower.values > self.upper.values + 1e-15):
            raise InfeasibleBand("band lower bound exceeds upper bound pointwise")
        if quadrature(self.lower) > 1.0 + NORM_TOL:
            raise InfeasibleBand("band lower bound carries more than unit mass")
        if quadrature(self.upper) < 1.0 - NORM_TOL:
            raise InfeasibleBand("band upper bound carries less than unit mass")

    @property
    def grid(self) -> Grid:
        return self.lower.grid


@dataclass(frozen=True)
class LFDSolution:
    q0: GriddedDensity
    q1: GriddedDensity
    lam: float
    lambda_interval: tuple[float, float]
    regions0: np.ndarray = field(repr=False)
    regions1: np.ndarray = field(repr=False)
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "grid": self.q0.grid.to_dict(),
            "q0": self.q0.values.tolist(),
            "q1": self.q1.values.tolist(),
            "lambda": self.lam,
            "lambda_interval": list(self.lambda_interval),
            "regions0": region_names(self.regions0),
            "regions1": region_names(self.regions1),
            "iterations": self.iterations,
            "residual": self.residual,
        }


def scaled_band(p: GriddedDensity, a: float, b: float) -> BandModel:
    """Band with bounds a*p and b*p. Needs a <= 1 <= b or no density fits."""
    if a < 0 or b < a:
        raise InfeasibleBand(f"need 0 <= a <= b, got a={a}, b={b}")
    if a > 1.0 + NORM_TOL or b < 1.0 - NORM_TOL:
        raise InfeasibleBand(
            f"scaled band needs a <= 1 <= b (got a={a}, b={b}); "
            "otherwise its masses exclude every probability density"
        )
    return BandModel(
        GriddedMeasure(p.grid, a * p.values), GriddedMeasure(p.grid, b * p.values)
    )


def clip_update(r: GriddedMeasure, band: BandModel) -> GriddedMeasure:
    """Pointwise min(upper, max(r, lower))."""
    same_grid(r, band.lower)
    return GriddedMeasure(
        r.grid, np.minimum(band.upper.values, np.maximum(r.values, band.lower.values))
    )


def _clip_mass(c: float, direction, lower, upper, weights) -> float:
    return float(np.dot(weights, np.minimum(upper, np.maximum(c * direction, lower))))


def _normalized_clip_arrays(direction, lower, upper, weights, bisect_tol):
    """Scale ``direction`` by c so the clipped result has unit mass."""
    if float(np.dot(weights, direction)) <= 0.0:
        raise ZeroDirection("clipping direction has zero mass")
    mass1 = _clip_mass(1.0, direction, lower, upper, weights)
    if abs(mass1 - 1.0) <= bisect_tol:
        return np.minimum(upper, np.maximum(direction, lower)), 1.0
    # the map c -> mass is continuous and nondecreasing; expand a bracket
    c_lo = c_hi = 1.0
    if mass1 > 1.0:
        for _ in range(200):
            c_lo /= 2.0
            if _clip_mass(c_lo, direction, lower, upper, weights) <= 1.0:
                break
        else:
            raise BracketFailure("clipped mass stays above 1: band lower bound too heavy")
    else:
        for _ in range(200):
            c_hi *= 2.0
            if _clip_mass(c_hi, direction, lower, upper, weights) >= 1.0:
                break
        else:
            raise BracketFailure("clipped mass stays below 1: band upper bound too light")
    c = brentq(
        lambda cc: _clip_mass(cc, direction, lower, upper, weights) - 1.0,
        c_lo,
        c_hi,
        xtol=bisect_tol,
        rtol=8.9e-16,
    )
    return np.minimum(upper, np.maximum(c * direction, lower)), float(c)


def normalized_clip(
    direction: GriddedMeasure, band: BandModel, opts: SolverOptions | None = None
) -> tuple[GriddedDensity, float]:
    """Clip c*direction into the band with c chosen so the result is a density."""
    opts = opts or SolverOptions()
    same_grid(direction, band.lower)
    values, c = _normalized_clip_arrays(
        direction.values,
        band.lower.values,
        band.upper.values,
        direction.grid.weights,
        opts.bisect_tol,
    )
    return normalize(GriddedMeasure(direction.grid, values)), c


def _label_regions(direction, lower, upper):
    """Classify clip activity from the pre-clip direction; ties go to middle."""
    scale = np.maximum(1.0, upper)
    tol = 1e-10 * scale
    labels = np.zeros(len(direction), dtype=np.int8)
    labels[direction <= lower - tol] = LOWER_CLIP
    labels[direction >= upper + tol] = UPPER_CLIP
    return labels


def _alternating_solve(lower0, upper0, lower1, upper1, weights, opts, init_q1):
    """Array-level alternating normalized clipping. Returns a state dict."""
    q1 = init_q1
    q0 = np.minimum(upper0, np.maximum(q1, lower0))
    c0 = c1 = 1.0
    resid = np.inf
    it = 0
    for it in range(1, opts.max_iters + 1):
        q0_new, c0 = _normalized_clip_arrays(q1, lower0, upper0, weights, opts.bisect_tol)
        if opts.damping < 1.0 and it > 1:
            q0_new = (1.0 - opts.damping) * q0 + opts.damping * q0_new
        q1_new, c1 = _normalized_clip_arrays(q0_new, lower1, upper1, weights, opts.bisect_tol)
        if opts.damping < 1.0 and it > 1:
            q1_new = (1.0 - opts.damping) * q1 + opts.damping * q1_new
        resid = max(float(np.max(np.abs(q0_new - q0))), float(np.max(np.abs(q1_new - q1))))
        q0, q1 = q0_new, q1_new
        if resid < opts.fp_tol:
            break
    else:
        raise NoConvergence(
            f"band LFD iteration did not reach {opts.fp_tol} in {opts.max_iters} rounds "
            f"(last change {resid})"
        )
    tv = 0.5 * float(np.dot(weights, np.abs(q0 - q1)))
    if tv <= 1e-6:
        raise DegenerateOverlap(
            "computed least favorable densities coincide (total variation "
            f"{tv:.2e}): the uncertainty sets overlap and no test separates them"
        )
    lam = c1
    return {
        "q0": q0,
        "q1": q1,
        "lam": lam,
        "lambda_interval": (min(c1, 1.0 / c0), max(c1, 1.0 / c0)),
        "regions0": _label_regions(q1 / lam, lower0, upper0),
        "regions1": _label_regions(lam * q0, lower1, upper1),
        "iterations": it,
        "residual": resid,
    }


def solve_band_lfds(
    band0: BandModel,
    band1: BandModel,
    opts: SolverOptions | None = None,
    init_q1: GriddedDensity | None = None,
) -> LFDSolution:
    """Least favorable density pair for two band models on a shared grid.

    ``init_q1`` selects among the fixed points when the constant-ratio middle
    region leaves shape freedom; by default the iteration starts from the
    normalized clip of the band-1 midpoint.
    """
    opts = opts or SolverOptions()
    grid = same_grid(band0.lower, band1.lower)
    if init_q1 is None:
        midpoint = GriddedMeasure(
            grid, 0.5 * (band1.lower.values + band1.upper.values)
        )
        start = normalize(clip_update(midpoint, band1)).values
    else:
        same_grid(init_q1, band0.lower)
        start = init_q1.values
    state = _alternating_solve(
        band0.lower.values,
        band0.upper.values,
        band1.lower.values,
        band1.upper.values,
        grid.weights,
        opts,
        start,
    )
    return LFDSolution(
        q0=normalize(GriddedMeasure(grid, state["q0"])),
        q1=normalize(GriddedMeasure(grid, state["q1"])),
        lam=state["lam"],
        lambda_interval=state["lambda_interval"],
        regions0=state["regions0"],
        regions1=state["regions1"],
        iterations=state["iterations"],
        residual=state["residual"],
    )
