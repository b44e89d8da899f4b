"""Densities and nonnegative measures tabulated on a uniform grid.

Everything downstream works with densities w.r.t. Lebesgue measure on a
truncated interval, integrated by the trapezoid rule. Values are immutable
after construction; all operations are pure functions.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, NonPositiveVariance, ZeroMass

NORM_TOL = 1e-6


def _frozen(values: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(values, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [x_min, x_max] with n points."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"grid needs n >= 16, got {self.n}")
        if not self.x_min < self.x_max:
            raise ValueError(f"need x_min < x_max, got [{self.x_min}, {self.x_max}]")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights."""
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n": self.n}


@dataclass(frozen=True)
class GriddedMeasure:
    """Nonnegative density values on a grid, integrated by trapezoid rule."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.n,):
            raise ValueError(f"values shape {v.shape} != grid n {self.grid.n}")
        if np.any(v < 0):
            raise ValueError("measure values must be nonnegative")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def total_mass(self) -> float:
        return quadrature(self)


@dataclass(frozen=True)
class GriddedDensity(GriddedMeasure):
    """A GriddedMeasure whose total mass is 1 within NORM_TOL."""

    def __post_init__(self):
        super().__post_init__()
        mass = self.total_mass
        if abs(mass - 1.0) > NORM_TOL:
            raise ValueError(f"density mass {mass} deviates from 1 beyond {NORM_TOL}")


def same_grid(*measures: GriddedMeasure) -> Grid:
    g = measures[0].grid
    for m in measures[1:]:
        if m.grid != g:
            raise GridMismatch(f"grids differ: {g} vs {m.grid}")
    return g


def quadrature(m: GriddedMeasure) -> float:
    """Trapezoid-rule integral of the tabulated values."""
    return float(np.dot(m.grid.weights, m.values))


def gaussian_density(grid: Grid, mean: float, variance: float) -> GriddedDensity:
    """Normal density tabulated on the grid, renormalized to unit mass.

    Warns when the grid covers less than 8 standard deviations on either
    side of the mean, since the truncated tail mass then becomes visible.
    """
    if variance <= 0:
        raise NonPositiveVariance(f"variance must be > 0, got {variance}")
    sd = math.sqrt(variance)
    if grid.x_min > mean - 8 * sd or grid.x_max < mean + 8 * sd:
        warnings.warn(
            f"grid [{grid.x_min}, {grid.x_max}] covers less than 8 standard "
            f"deviations around mean {mean}; truncation loses tail mass",
            stacklevel=2,
        )
    x = grid.points
    raw = np.exp(-((x - mean) ** 2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)
    mass = float(np.dot(grid.weights, raw))
    return GriddedDensity(grid, raw / mass)


def normalize(m: GriddedMeasure) -> GriddedDensity:
    """Scale a measure to unit mass."""
    mass = m.total_mass
    if mass <= 0:
        raise ZeroMass("cannot normalize a measure with zero total mass")
    return GriddedDensity(m.grid, m.values / mass)


def cdf_values(d: GriddedMeasure) -> np.ndarray:
    """Cumulative trapezoid integral, rescaled so the last entry is exactly 1."""
    v = d.values
    h = d.grid.spacing
    inc = 0.5 * h * (v[:-1] + v[1:])
    F = np.concatenate([[0.0], np.cumsum(inc)])
    total = F[-1]
    if total <= 0:
        raise ZeroMass("cannot build a CDF from a zero measure")
    return F / total


def inverse_cdf_sample(d: GriddedDensity, u) -> float | np.ndarray:
    """Quantile of the piecewise-linear CDF at u in [0, 1]. Monotone in u."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise ValueError("u must lie in [0, 1]")
    F = cdf_values(d)
    x = d.grid.points
    out = np.interp(u_arr, F, x)
    return float(out) if np.isscalar(u) or u_arr.ndim == 0 else out


def load_density_csv(path: str, norm: bool = True) -> GriddedDensity | GriddedMeasure:
    """Load a density from a two-column ``x,value`` CSV (header required).

    The x column must be strictly increasing and uniformly spaced to 1e-9
    relative tolerance. Values are renormalized to unit mass unless
    ``norm=False``, in which case a raw measure is returned.
    """
    xs, vs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: expected header row 'x,value'")
        try:
            float(header[0])
        except ValueError:
            pass
        else:
            raise ValueError(f"{path}: missing header row")
        for row in reader:
            if not row:
                continue
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    x = np.asarray(xs)
    v = np.asarray(vs)
    if len(x) < 16:
        raise ValueError(f"{path}: need at least 16 rows, got {len(x)}")
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise ValueError(f"{path}: x column must be strictly increasing")
    spacing = (x[-1] - x[0]) / (len(x) - 1)
    if np.max(np.abs(dx - spacing)) > 1e-9 * max(abs(spacing), 1.0):
        raise ValueError(f"{path}: x column is not uniformly spaced (tol 1e-9 relative)")
    grid = Grid(float(x[0]), float(x[-1]), len(x))
    measure = GriddedMeasure(grid, v)
    return normalize(measure) if norm else measure
