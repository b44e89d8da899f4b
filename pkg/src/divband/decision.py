"""Randomized clipped likelihood-ratio tests and their error probabilities.

The rule compares q1(x) against lam * q0(x) with a relative boundary
tolerance; on the boundary set it randomizes with probability kappa, or with
a per-point profile when the rule was built from a calibration (the
stationary decision values are not constant on the constant-ratio region).

Conventions: delta is the probability of deciding hypothesis 1; alpha (false
alarm) integrates h0 * delta, beta (miss) integrates h1 * (1 - delta), and
the weighted error is beta + lam * alpha, the quantity the least favorable
pair maximizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidTrialCount, OutOfDomain
from .grid import GriddedDensity, cdf_values, same_grid

_PHILOX_CHUNK = 65536  # trials per counter block; fixed so results never
# depend on how work is scheduled


@dataclass(frozen=True)
class DecisionRule:
    q0: GriddedDensity
    q1: GriddedDensity
    lam: float
    kappa: float = 0.5
    boundary_tol: float = 1e-9
    kappa_profile: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        same_grid(self.q0, self.q1)
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.kappa_profile is not None and len(self.kappa_profile) != self.q0.grid.n:
            raise ValueError("kappa_profile length must match the grid")

    def delta_grid(self) -> np.ndarray:
        """Decision values on the grid points."""
        q0v, q1v = self.q0.values, self.q1.values
        thresh = self.lam * q0v
        boundary = self.kappa if self.kappa_profile is None else self.kappa_profile
        return np.where(
            q1v > thresh * (1.0 + self.boundary_tol),
            1.0,
            np.where(q1v < thresh * (1.0 - self.boundary_tol), 0.0, boundary),
        )


def delta(rule: DecisionRule, x) -> float | np.ndarray:
    """Decision probability at x (linear interpolation between grid points)."""
    grid = rule.q0.grid
    x_arr = np.asarray(x, dtype=np.float64)
    if np.any((x_arr < grid.x_min) | (x_arr > grid.x_max)):
        raise OutOfDomain(f"x outside [{grid.x_min}, {grid.x_max}]")
    pts = grid.points
    q0x = np.interp(x_arr, pts, rule.q0.values)
    q1x = np.interp(x_arr, pts, rule.q1.values)
    thresh = rule.lam * q0x
    if rule.kappa_profile is None:
        boundary = rule.kappa
    else:
        boundary = np.interp(x_arr, pts, rule.kappa_profile)
    out = np.where(
        q1x > thresh * (1.0 + rule.boundary_tol),
        1.0,
        np.where(q1x < thresh * (1.0 - rule.boundary_tol), 0.0, boundary),
    )
    return float(out) if np.ndim(x) == 0 else out


def error_probabilities(
    rule: DecisionRule, h0: GriddedDensity, h1: GriddedDensity
) -> tuple[float, float]:
    """(alpha, beta) = (false alarm, miss) of the rule under (h0, h1)."""
    grid = same_grid(rule.q0, h0, h1)
    d = rule.delta_grid()
    w = grid.weights
    alpha = float(np.dot(w, h0.values * d))
    beta = float(np.dot(w, h1.values * (1.0 - d)))
    return alpha, beta


def weighted_error(rule: DecisionRule, h0: GriddedDensity, h1: GriddedDensity) -> float:
    """beta + lam * alpha; the adversary's objective at threshold lam."""
    alpha, beta = error_probabilities(rule, h0, h1)
    return beta + rule.lam * alpha


@dataclass(frozen=True)
class SimulationReport:
    n_samples: int
    trials: int
    seed: int
    threshold: float
    alpha_hat: float
    beta_hat: float
    alpha_ci: float
    beta_ci: float

    def to_dict(self) -> dict:
        return {
            "N": self.n_samples,
            "trials": self.trials,
            "seed": self.seed,
            "threshold": self.threshold,
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "ci": {"alpha": self.alpha_ci, "beta": self.beta_ci},
        }


def _stream(seed: int, hypothesis: int, chunk: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, hypothesis, chunk index)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(hypothesis, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _simulate_one(rule, sampling_density, n_samples, trials, seed, hypothesis, threshold):
    """Fraction of trials deciding H1 when samples are drawn from
    ``sampling_density``. Evaluated in fixed-size chunks with independent
    counter-based streams so the result is reproducible regardless of
    scheduling."""
    grid = rule.q0.grid
    pts = grid.points
    F = cdf_values(sampling_density)
    q0v, q1v = rule.q0.values, rule.q1.values
    decide_h1 = 0
    done = 0
    while done < trials:
        m = min(_PHILOX_CHUNK, trials - done)
        g = _stream(seed, hypothesis, done // _PHILOX_CHUNK)
        u = g.random((m, n_samples + 1))
        x = np.interp(u[:, :n_samples], F, pts)
        q0x = np.interp(x, pts, q0v)
        q1x = np.interp(x, pts, q1v)
        # product likelihood ratio against the single threshold
        with np.errstate(divide="ignore", invalid="ignore"):
            log_lr = np.where(
                q1x > 0,
                np.log(np.where(q1x > 0, q1x, 1.0))
                - np.log(np.where(q0x > 0, q0x, 1e-300)),
                -np.inf,
            )
        stat = np.sum(log_lr, axis=1)
        log_thresh = math.log(threshold)
        tol = rule.boundary_tol
        up = stat > log_thresh + tol
        down = stat < log_thresh - tol
        tie = ~(up | down)
        decisions = np.where(up, 1.0, 0.0)
        decisions[tie] = (u[tie, n_samples] < rule.kappa).astype(float)
        decide_h1 += int(np.sum(decisions))
        done += m
    return decide_h1 / trials


def simulate_errors(
    rule: DecisionRule,
    h0: GriddedDensity,
    h1: GriddedDensity,
    n_samples_per_test: int,
    trials: int,
    seed: int,
    threshold: float | None = None,
) -> SimulationReport:
    """Monte Carlo error rates of the n-sample product likelihood-ratio test.

    The product of the per-sample ratios q1/q0 is compared against the single
    threshold (default: the rule's lam), randomizing ties with kappa. Returns
    empirical rates with 95% binomial confidence half-widths; deterministic
    for a fixed seed.
    """
    if trials < 1000:
        raise InvalidTrialCount(f"need at least 1000 trials, got {trials}")
    if n_samples_per_test < 1:
        raise ValueError("n_samples_per_test must be >= 1")
    same_grid(rule.q0, h0, h1)
    thr = rule.lam if threshold is None else float(threshold)
    alpha_hat = _simulate_one(rule, h0, n_samples_per_test, trials, seed, 0, thr)
    miss_rate = 1.0 - _simulate_one(rule, h1, n_samples_per_test, trials, seed, 1, thr)
    ci = lambda p: 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / trials)
    return SimulationReport(
        n_samples=n_samples_per_test,
        trials=trials,
        seed=seed,
        threshold=thr,
        alpha_hat=alpha_hat,
        beta_hat=miss_rate,
        alpha_ci=ci(alpha_hat),
        beta_ci=ci(miss_rate),
    )


def saddle_rule(result, kappa: float = 0.5) -> DecisionRule:
    """Decision rule of a calibration: threshold lam with the stationary
    per-point randomization on the constant-ratio region."""
    return DecisionRule(
        q0=result.q0,
        q1=result.q1,
        lam=result.lam,
        kappa=kappa,
        kappa_profile=np.asarray(result.delta_star, dtype=np.float64),
    )
