"""Run configuration: JSON schema, validation, and problem assembly."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .bands import BandModel, SolverOptions, scaled_band
from .calibration import UncertaintyBall
from .divergence import DivergenceFamily, make_family
from .errors import ConfigError
from .grid import Grid, GriddedDensity, gaussian_density, load_density_csv

DEFAULT_GRID = {"x_min": -12.0, "x_max": 12.0, "n": 4096}
OUTPUT_DIR_ENV = "DIVBAND_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    nominal0: dict
    nominal1: dict
    family0: str = "kl"
    family1: str = "kl"
    epsilon0: float = 0.0
    epsilon1: float = 0.0
    lam: float = 1.0
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    tolerances: dict = field(default_factory=dict)
    seed: int = 7
    output_dir: str | None = None
    band: dict | None = None
    simulate: dict = field(default_factory=dict)
    verify: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(raw) - {
            "nominal0", "nominal1", "family0", "family1", "epsilon0", "epsilon1",
            "lambda", "grid", "tolerances", "seed", "output_dir", "band",
            "simulate", "verify",
        }
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("nominal0", "nominal1"):
            if key not in raw:
                raise ConfigError(f"missing required key {key!r}")
            spec = raw[key]
            if not isinstance(spec, dict) or not ({"gaussian", "csv"} & set(spec)):
                raise ConfigError(f"{key} must specify 'gaussian' or 'csv'")
        grid = dict(DEFAULT_GRID)
        grid.update(raw.get("grid", {}))
        try:
            Grid(float(grid["x_min"]), float(grid["x_max"]), int(grid["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid grid: {exc}") from exc
        eps0 = float(raw.get("epsilon0", 0.0))
        eps1 = float(raw.get("epsilon1", 0.0))
        lam = float(raw.get("lambda", 1.0))
        if eps0 < 0 or eps1 < 0:
            raise ConfigError("epsilon values must be nonnegative")
        if lam <= 0:
            raise ConfigError("lambda must be positive")
        for key in ("family0", "family1"):
            name = raw.get(key, "kl")
            try:
                make_family(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        cfg = cls(
            nominal0=raw["nominal0"],
            nominal1=raw["nominal1"],
            family0=raw.get("family0", "kl"),
            family1=raw.get("family1", "kl"),
            epsilon0=eps0,
            epsilon1=eps1,
            lam=lam,
            grid=grid,
            tolerances=raw.get("tolerances", {}),
            seed=int(raw.get("seed", 7)),
            output_dir=raw.get("output_dir"),
            band=raw.get("band"),
            simulate=raw.get("simulate", {}),
            verify=raw.get("verify", {}),
        )
        if base_dir is not None:
            object.__setattr__(cfg, "_base_dir", base_dir)
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    # -- assembly ----------------------------------------------------------
    def make_grid(self) -> Grid:
        return Grid(float(self.grid["x_min"]), float(self.grid["x_max"]), int(self.grid["n"]))

    def _resolve(self, path: str) -> str:
        base = getattr(self, "_base_dir", None)
        if base is not None and not os.path.isabs(path):
            return str(Path(base) / path)
        return path

    def _nominal(self, spec: dict, grid: Grid) -> GriddedDensity:
        if "gaussian" in spec:
            g = spec["gaussian"]
            try:
                return gaussian_density(grid, float(g["mean"]), float(g["variance"]))
            except (KeyError, TypeError) as exc:
                raise ConfigError(f"gaussian nominal needs mean and variance: {exc}") from exc
        density = load_density_csv(self._resolve(spec["csv"]))
        if density.grid != grid:
            raise ConfigError(
                f"CSV grid {density.grid} does not match configured grid {grid}"
            )
        return density

    def nominals(self) -> tuple[GriddedDensity, GriddedDensity]:
        grid = self.make_grid()
        return self._nominal(self.nominal0, grid), self._nominal(self.nominal1, grid)

    def families(self) -> tuple[DivergenceFamily, DivergenceFamily]:
        return make_family(self.family0), make_family(self.family1)

    def balls(self) -> tuple[UncertaintyBall, UncertaintyBall]:
        p0, p1 = self.nominals()
        f0, f1 = self.families()
        return (
            UncertaintyBall(p0, f0, self.epsilon0),
            UncertaintyBall(p1, f1, self.epsilon1),
        )

    def solver_options(self) -> SolverOptions:
        known = {"fp_tol", "max_iters", "bisect_tol", "damping"}
        opts = {k: v for k, v in self.tolerances.items() if k in known}
        extra = set(self.tolerances) - known - {"calib_tol"}
        if extra:
            raise ConfigError(f"unknown tolerance keys: {sorted(extra)}")
        try:
            return SolverOptions(**opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid tolerances: {exc}") from exc

    @property
    def calib_tol(self) -> float:
        return float(self.tolerances.get("calib_tol", 1e-6))

    def explicit_bands(self) -> tuple[BandModel, BandModel]:
        if not self.band:
            raise ConfigError("band command needs a 'band' section (scalars or CSVs)")
        p0, p1 = self.nominals()
        spec = self.band
        if {"a0", "b0", "a1", "b1"} <= set(spec):
            return (
                scaled_band(p0, float(spec["a0"]), float(spec["b0"])),
                scaled_band(p1, float(spec["a1"]), float(spec["b1"])),
            )
        needed = {"lower0_csv", "upper0_csv", "lower1_csv", "upper1_csv"}
        if needed <= set(spec):
            def load(path):
                return load_density_csv(self._resolve(path), norm=False)

            return (
                BandModel(load(spec["lower0_csv"]), load(spec["upper0_csv"])),
                BandModel(load(spec["lower1_csv"]), load(spec["upper1_csv"])),
            )
        raise ConfigError(
            "band section needs either scalars a0,b0,a1,b1 or the four CSV paths"
        )

    def resolve_output_dir(self, override: str | None = None) -> Path:
        chosen = override or self.output_dir or os.environ.get(OUTPUT_DIR_ENV) or "divband-out"
        return Path(chosen)
