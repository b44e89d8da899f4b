"""Independent numerical checks of the minimax claims.

Feasible-member samplers draw random densities from a band or ball; saddle
probes then verify that no sampled pair achieves a higher weighted error than
the least favorable pair. Small discrete instances are cross-checked against
a brute-force lattice enumeration, and a tensor-grid probe checks that the
band least favorable pair stays least favorable under repeated observations.

These are necessary-condition checks by sampling, not proofs: the samplers
cover the feasible sets with smooth random fields whose membership is
enforced by scalar bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .bands import MIDDLE, BandModel, SolverOptions, _alternating_solve
from .calibration import UncertaintyBall
from .decision import DecisionRule, weighted_error
from .divergence import eval_divergence
from .errors import BracketFailure, GridTooLarge, TooLarge
from .grid import GriddedDensity, GriddedMeasure, normalize, quadrature, same_grid


@dataclass(frozen=True)
class ProbeReport:
    samples: int
    max_violation: float
    argmax_descriptor: str
    tolerance: float
    violations: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance

    def histogram(self, bins: int = 20) -> dict:
        counts, edges = np.histogram(self.violations, bins=bins)
        return {"counts": counts.tolist(), "edges": edges.tolist()}

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "max_violation": self.max_violation,
            "argmax": self.argmax_descriptor,
            "tolerance": self.tolerance,
            "passed": bool(self.passed),
            "violation_histogram": self.histogram(),
        }


def default_probe_tol(n: int) -> float:
    """1e-6 plus a discretization allowance: the saddle inequality holds
    exactly only in the continuum."""
    return 1e-6 + 10.0 / n


def _rng_for(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _smooth_bumps(grid, rng: np.random.Generator, count: int = 5) -> np.ndarray:
    x = grid.points
    span = grid.x_max - grid.x_min
    z = np.zeros(grid.n)
    for _ in range(count):
        center = rng.uniform(grid.x_min, grid.x_max)
        width = rng.uniform(0.02, 0.12) * span
        amp = rng.uniform(0.2, 1.0)
        z += amp * np.exp(-((x - center) ** 2) / (2.0 * width * width))
    return z


def sample_band_member(band: BandModel, seed: int | np.random.Generator) -> GriddedDensity:
    """Random density inside the band: lower bound plus a scaled smooth bump
    field, with the scale bisected so the clipped result has unit mass."""
    rng = seed if isinstance(seed, np.random.Generator) else _rng_for(int(seed), 0)
    grid = band.grid
    w = grid.weights
    lower = band.lower.values
    upper = band.upper.values
    mass_lower = float(np.dot(w, lower))
    if abs(mass_lower - 1.0) <= 1e-12:
        return normalize(GriddedMeasure(grid, lower))
    r = _smooth_bumps(grid, rng)

    def mass(t):
        return float(np.dot(w, np.minimum(upper, lower + t * r))) - 1.0

    t_hi = 1.0
    for _ in range(200):
        if mass(t_hi) >= 0:
            break
        t_hi *= 2.0
    else:
        raise BracketFailure("band upper bound unreachable: cannot reach unit mass")
    t = brentq(mass, 0.0, t_hi, xtol=1e-14, rtol=8.9e-16)
    return normalize(GriddedMeasure(grid, np.minimum(upper, lower + t * r)))


def sample_ball_member(ball: UncertaintyBall, seed: int | np.random.Generator) -> GriddedDensity:
    """Random density inside the ball: an exponential tilt of the nominal by
    a zero-mean smooth field, scaled so the divergence is a random fraction
    (uniform on [0.1, 1]) of the radius."""
    rng = seed if isinstance(seed, np.random.Generator) else _rng_for(int(seed), 0)
    if ball.epsilon <= 0:
        return ball.nominal
    grid = ball.nominal.grid
    w = grid.weights
    p = ball.nominal
    z = _smooth_bumps(grid, rng)
    z = z - float(np.dot(w, z * p.values))
    u = rng.uniform(0.1, 1.0)
    target = u * ball.epsilon

    def tilted(s):
        raw = p.values * np.exp(s * z)
        return normalize(GriddedMeasure(grid, raw))

    def defect(s):
        return eval_divergence(tilted(s), p, ball.family) - target

    s_hi = 1.0
    for _ in range(200):
        if defect(s_hi) >= 0:
            break
        s_hi *= 2.0
    else:
        raise BracketFailure("tilt field too weak to reach the target divergence")
    s = brentq(defect, 0.0, s_hi, xtol=1e-14, rtol=8.9e-16)
    h = tilted(s)
    assert eval_divergence(h, p, ball.family) <= ball.epsilon + 1e-9
    return h


def saddle_probe(
    rule: DecisionRule,
    feasible0,
    feasible1,
    count: int,
    seed: int,
    tolerance: float | None = None,
) -> ProbeReport:
    """Weighted-error violations of sampled feasible pairs against the rule's
    own pair. ``feasible0``/``feasible1`` are callables rng -> density."""
    if count < 100:
        raise ValueError(f"probe needs count >= 100, got {count}")
    tol = default_probe_tol(rule.q0.grid.n) if tolerance is None else tolerance
    base = weighted_error(rule, rule.q0, rule.q1)
    violations = np.empty(count)
    worst = -math.inf
    worst_idx = 0
    for i in range(count):
        rng = _rng_for(seed, i)
        h0 = feasible0(rng)
        h1 = feasible1(rng)
        violations[i] = weighted_error(rule, h0, h1) - base
        if violations[i] > worst:
            worst = violations[i]
            worst_idx = i
    return ProbeReport(
        samples=count,
        max_violation=float(np.max(violations)),
        argmax_descriptor=f"sample#{worst_idx}",
        tolerance=tol,
        violations=violations,
    )


def band_best_response(point_weights: np.ndarray, band: BandModel) -> GriddedDensity:
    """Feasible density maximizing the linear functional sum(w * h * weight)
    over the band: greedy fill from the lower bound in decreasing weight
    order. Used as a constructed witness in negative controls."""
    grid = band.grid
    w = grid.weights
    lower = band.lower.values.copy()
    upper = band.upper.values
    budget = 1.0 - float(np.dot(w, lower))
    if budget < 0:
        raise BracketFailure("band lower bound already exceeds unit mass")
    order = np.argsort(-np.asarray(point_weights), kind="stable")
    h = lower
    for idx in order:
        if budget <= 0:
            break
        room = (upper[idx] - lower[idx]) * w[idx]
        take = min(room, budget)
        if w[idx] > 0 and room > 0:
            h[idx] += take / w[idx]
            budget -= take
    return normalize(GriddedMeasure(grid, h))


def product_saddle_probe(
    rule: DecisionRule,
    band0: BandModel,
    band1: BandModel,
    n_samples: int,
    count: int,
    seed: int,
    tolerance: float | None = None,
) -> ProbeReport:
    """Repeated-observation check: the product of the band least favorable
    pair stays least favorable among product densities with band factors.

    Builds the n-fold product test with the same threshold on the tensor
    grid and evaluates the weighted error for sampled factor combinations
    (independent factors on even samples, identical factors on odd ones).
    """
    if n_samples not in (2, 3):
        raise ValueError("product probe supports n_samples in {2, 3}")
    if count < 100:
        raise ValueError(f"probe needs count >= 100, got {count}")
    grid = same_grid(rule.q0, band0.lower, band1.lower)
    n = grid.n
    if n_samples == 3 and n > 256:
        raise GridTooLarge("n <= 256 required for the three-sample tensor probe")
    if n_samples == 2 and n > 2048:
        raise GridTooLarge("n <= 2048 required for the two-sample tensor probe")
    tol = default_probe_tol(n) if tolerance is None else tolerance

    w = grid.weights
    with np.errstate(divide="ignore"):
        log_r = np.log(rule.q1.values) - np.log(np.maximum(rule.q0.values, 1e-300))
    log_thresh = math.log(rule.lam)

    axes = list(range(n_samples))
    stat = np.zeros((n,) * n_samples)
    for ax in axes:
        shape = [1] * n_samples
        shape[ax] = n
        stat = stat + log_r.reshape(shape)
    tol_b = rule.boundary_tol
    delta_n = np.where(
        stat > log_thresh + tol_b, 1.0, np.where(stat < log_thresh - tol_b, 0.0, rule.kappa)
    )

    def tensor(vals_list):
        out = np.ones((1,) * n_samples)
        for ax, v in enumerate(vals_list):
            shape = [1] * n_samples
            shape[ax] = n
            out = out * v.reshape(shape)
        return out

    W = tensor([w] * n_samples)

    def value(h0_factors, h1_factors):
        H0 = tensor([h.values for h in h0_factors])
        H1 = tensor([h.values for h in h1_factors])
        return float(np.sum(W * (H1 * (1.0 - delta_n) + rule.lam * H0 * delta_n)))

    base = value([rule.q0] * n_samples, [rule.q1] * n_samples)
    violations = np.empty(count)
    worst = -math.inf
    worst_idx = 0
    for i in range(count):
        rng = _rng_for(seed, i)
        if i % 2 == 0:
            f0 = [sample_band_member(band0, rng) for _ in range(n_samples)]
            f1 = [sample_band_member(band1, rng) for _ in range(n_samples)]
        else:
            h0 = sample_band_member(band0, rng)
            h1 = sample_band_member(band1, rng)
            f0 = [h0] * n_samples
            f1 = [h1] * n_samples
        violations[i] = value(f0, f1) - base
        if violations[i] > worst:
            worst = violations[i]
            worst_idx = i
    return ProbeReport(
        samples=count,
        max_violation=float(np.max(violations)),
        argmax_descriptor=f"sample#{worst_idx}",
        tolerance=tol,
        violations=violations,
    )


# ---------------------------------------------------------------------------
# discrete instances and the brute-force oracle


def solve_discrete_band_lfds(
    lower0, upper0, lower1, upper1, opts: SolverOptions | None = None, init_q1=None
):
    """Alternating normalized clipping on plain probability vectors
    (counting measure). Returns the solver state dict of the band module."""
    opts = opts or SolverOptions()
    lower1 = np.asarray(lower1, dtype=np.float64)
    upper1 = np.asarray(upper1, dtype=np.float64)
    if init_q1 is None:
        mid = 0.5 * (lower1 + upper1)
        init_q1 = np.minimum(upper1, np.maximum(mid / mid.sum(), lower1))
        init_q1 = init_q1 / init_q1.sum()
    weights = np.ones(len(lower1))
    return _alternating_solve(
        np.asarray(lower0, dtype=np.float64),
        np.asarray(upper0, dtype=np.float64),
        lower1,
        upper1,
        weights,
        opts,
        np.asarray(init_q1, dtype=np.float64),
    )


def _lattice_candidates(lower, upper, resolution, cap=2_000_000):
    """Integer compositions m (sum = resolution) with lower <= m/res <= upper."""
    k = len(lower)
    lo = np.ceil(np.asarray(lower) * resolution - 1e-9).astype(int)
    hi = np.floor(np.asarray(upper) * resolution + 1e-9).astype(int)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, resolution)
    out = []

    def rec(prefix, remaining, idx):
        if len(out) > cap:
            raise TooLarge("lattice candidate count exceeds the enumeration cap")
        if idx == k - 1:
            if lo[idx] <= remaining <= hi[idx]:
                out.append(prefix + [remaining])
            return
        tail_lo = int(np.sum(lo[idx + 1 :]))
        tail_hi = int(np.sum(hi[idx + 1 :]))
        m_min = max(lo[idx], remaining - tail_hi)
        m_max = min(hi[idx], remaining - tail_lo)
        for m in range(m_min, m_max + 1):
            rec(prefix + [m], remaining - m, idx + 1)

    rec([], resolution, 0)
    return np.asarray(out, dtype=np.float64) / resolution


def brute_force_band_lfds(
    p0, p1, band0, band1, resolution: int, lam: float = 1.0
) -> tuple[np.ndarray, np.ndarray, float]:
    """Exhaustive lattice maximizer of sum(min(h1, lam*h0)) over discrete
    band-constrained probability vectors.

    ``band0``/``band1`` are (lower, upper) array pairs. The rule minimization
    is closed-form pointwise, so only the density pair is enumerated. Serves
    as the oracle for the band solver on small instances.
    """
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    if len(p0) > 5 or len(p1) > 5:
        raise TooLarge("brute force supports at most 5 atoms")
    if resolution > 400:
        raise TooLarge("brute force supports resolution <= 400")
    c0 = _lattice_candidates(band0[0], band0[1], resolution)
    c1 = _lattice_candidates(band1[0], band1[1], resolution)
    if len(c0) == 0 or len(c1) == 0:
        raise TooLarge("no lattice candidates inside the band")
    if len(c0) * len(c1) > 500_000_000:
        raise TooLarge("candidate pair count exceeds the enumeration cap")
    best_v = -math.inf
    best = (None, None)
    chunk = max(1, int(5_000_000 / max(len(c1), 1)))
    for i0 in range(0, len(c0), chunk):
        blk = c0[i0 : i0 + chunk]
        V = np.minimum(c1[None, :, :], lam * blk[:, None, :]).sum(axis=2)
        idx = np.unravel_index(np.argmax(V), V.shape)
        if V[idx] > best_v:
            best_v = float(V[idx])
            best = (blk[idx[0]].copy(), c1[idx[1]].copy())
    return best[0], best[1], best_v


def random_discrete_instance(rng: np.random.Generator, spread: float = 0.3):
    """Well-separated random 3-atom instance with +-spread bands.

    Rejects draws whose solved clip pattern leaves two or more atoms doubly
    interior: there the least favorable pair is set-valued (only the middle
    mass is pinned) and comparison with a lattice argmax is ill-posed.
    """
    for _ in range(200):
        p0 = rng.dirichlet([6.0, 3.0, 1.0])
        p1 = rng.dirichlet([1.0, 3.0, 6.0])
        tv = 0.5 * float(np.abs(p0 - p1).sum())
        if tv < 0.35 or min(p0.min(), p1.min()) < 0.02:
            continue
        lower0, upper0 = (1 - spread) * p0, np.minimum((1 + spread) * p0, 1.0)
        lower1, upper1 = (1 - spread) * p1, np.minimum((1 + spread) * p1, 1.0)
        try:
            state = solve_discrete_band_lfds(lower0, upper0, lower1, upper1)
        except Exception:
            continue
        doubly_mid = int(np.sum((state["regions0"] == MIDDLE) & (state["regions1"] == MIDDLE)))
        if doubly_mid <= 1:
            return p0, p1, (lower0, upper0), (lower1, upper1)
    raise RuntimeError("could not draw a well-posed discrete instance")


@dataclass(frozen=True)
class ContainmentReport:
    count: int
    fraction_ball_members_in_band: float
    fraction_band_members_in_ball: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "fraction_ball_members_in_band": self.fraction_ball_members_in_band,
            "fraction_band_members_in_ball": self.fraction_band_members_in_ball,
        }


def containment_probe(
    ball: UncertaintyBall, band: BandModel, count: int, seed: int
) -> ContainmentReport:
    """Sampled containment fractions between an equivalent ball/band pair.

    Informational only: neither set provably contains the other."""
    same_grid(ball.nominal, band.lower)
    slack = 1e-9 * np.maximum(1.0, band.upper.values)
    in_band = 0
    in_ball = 0
    for i in range(count):
        rng = _rng_for(seed, i)
        h_ball = sample_ball_member(ball, rng)
        if np.all(h_ball.values >= band.lower.values - slack) and np.all(
            h_ball.values <= band.upper.values + slack
        ):
            in_band += 1
        h_band = sample_band_member(band, rng)
        if eval_divergence(h_band, ball.nominal, ball.family) <= ball.epsilon + 1e-9:
            in_ball += 1
    return ContainmentReport(
        count=count,
        fraction_ball_members_in_band=in_band / count,
        fraction_band_members_in_ball=in_ball / count,
    )
