import numpy as np
import pytest

import divband as db
from divband.errors import InvalidTrialCount, OutOfDomain
from tests.conftest import REF


@pytest.fixture(scope="module")
def rule512(calibrated512):
    return db.DecisionRule(q0=calibrated512.q0, q1=calibrated512.q1, lam=calibrated512.lam)


class TestDelta:
    def _tiny_rule(self, ratio, lam):
        grid = db.Grid(0.0, 1.0, 16)
        q0 = db.normalize(db.GriddedMeasure(grid, np.ones(16)))
        q1 = db.normalize(db.GriddedMeasure(grid, np.full(16, 1.0)))
        # scale the comparison through lam; q1/q0 = 1 pointwise
        return db.DecisionRule(q0=q0, q1=q1, lam=lam, kappa=0.25)

    def test_decide_h1(self):
        # q1 = 0.4, lam*q0 = 0.2
        rule = self._tiny_rule(2.0, 0.5)
        assert db.delta(rule, 0.5) == 1.0

    def test_decide_h0(self):
        rule = self._tiny_rule(1.0, 2.0)
        assert db.delta(rule, 0.5) == 0.0

    def test_boundary_randomizes(self):
        rule = self._tiny_rule(1.0, 1.0)
        assert db.delta(rule, 0.5) == 0.25

    def test_out_of_domain(self, rule512):
        with pytest.raises(OutOfDomain):
            db.delta(rule512, 100.0)

    def test_values_in_allowed_set(self, rule512):
        xs = np.linspace(-12, 12, 2001)
        rule = db.DecisionRule(q0=rule512.q0, q1=rule512.q1, lam=rule512.lam, kappa=0.5)
        d = db.delta(rule, xs)
        assert np.all(np.isin(d, [0.0, 0.5, 1.0]))

    def test_kappa_profile_used_on_boundary(self, calibrated512):
        rule = db.saddle_rule(calibrated512)
        d = rule.delta_grid()
        mid = (calibrated512.regions0 == 0) & (calibrated512.regions1 == 0)
        assert np.allclose(d[mid], calibrated512.delta_star[mid])


class TestErrorProbabilities:
    def test_always_h0(self, nominals512):
        p0, p1 = nominals512
        rule = db.DecisionRule(q0=p0, q1=p1, lam=1e9)  # q1 < lam q0 everywhere
        alpha, beta = db.error_probabilities(rule, p0, p1)
        assert alpha == pytest.approx(0.0, abs=1e-12)
        assert beta == pytest.approx(1.0, abs=1e-12)

    def test_always_h1(self, nominals512):
        p0, p1 = nominals512
        rule = db.DecisionRule(q0=p0, q1=p1, lam=1e-9)
        alpha, beta = db.error_probabilities(rule, p0, p1)
        assert alpha == pytest.approx(1.0, abs=1e-12)
        assert beta == pytest.approx(0.0, abs=1e-12)

    def test_identical_densities_sum_to_one(self, nominals512):
        p0, p1 = nominals512
        rule = db.DecisionRule(q0=p0, q1=p1, lam=1.0)
        alpha, beta = db.error_probabilities(rule, p0, p0)
        assert alpha + beta == pytest.approx(1.0, abs=1e-10)


class TestWeightedError:
    def test_identity_with_error_probabilities(self, rule512, nominals512, rng):
        p0, p1 = nominals512
        grid = p0.grid
        for _ in range(20):
            h0 = db.normalize(db.GriddedMeasure(grid, rng.random(grid.n) + 0.05))
            h1 = db.normalize(db.GriddedMeasure(grid, rng.random(grid.n) + 0.05))
            alpha, beta = db.error_probabilities(rule512, h0, h1)
            assert db.weighted_error(rule512, h0, h1) == pytest.approx(
                beta + rule512.lam * alpha, abs=1e-12
            )

    def test_always_h0_value_is_one(self, nominals512):
        # deciding H0 everywhere misses with probability one
        p0, p1 = nominals512
        rule = db.DecisionRule(q0=p0, q1=p1, lam=1e9)
        assert db.weighted_error(rule, p0, p1) == pytest.approx(1.0, abs=1e-9)

    def test_saddle_rule_minimizes(self, calibrated512, rng):
        # against the least favorable pair, no perturbed rule does better
        res = calibrated512
        rule = db.saddle_rule(res)
        base = db.weighted_error(rule, res.q0, res.q1)
        grid = res.q0.grid
        d_star = rule.delta_grid()
        w = grid.weights
        for _ in range(100):
            perturbation = rng.uniform(-1, 1, grid.n)
            d_alt = np.clip(d_star + 0.3 * perturbation, 0.0, 1.0)
            value_alt = float(
                np.dot(w, res.q1.values * (1 - d_alt))
                + res.lam * np.dot(w, res.q0.values * d_alt)
            )
            assert value_alt >= base - 1e-10

    def test_saddle_value_recorded(self, calibrated4096):
        # regression constant for the reference configuration
        res = calibrated4096
        rule = db.saddle_rule(res)
        value = db.weighted_error(rule, res.q0, res.q1)
        assert value == pytest.approx(0.57027, abs=5e-4)


class TestSimulateErrors:
    def test_deterministic(self, rule512, nominals512):
        p0, p1 = nominals512
        a = db.simulate_errors(rule512, p0, p1, 1, 2000, seed=11)
        b = db.simulate_errors(rule512, p0, p1, 1, 2000, seed=11)
        assert a == b

    def test_chunking_invariance(self, rule512, nominals512, monkeypatch):
        # the counter-based streams make results independent of work layout;
        # a different trial count reuses the identical leading chunks
        p0, p1 = nominals512
        import divband.decision as dec

        a = db.simulate_errors(rule512, p0, p1, 1, 3000, seed=3)
        monkeypatch.setattr(dec, "_PHILOX_CHUNK", 1024)
        b = db.simulate_errors(rule512, p0, p1, 1, 3000, seed=3)
        # chunk size is part of the stream layout, so rates stay within
        # Monte Carlo noise rather than being bit-identical
        assert abs(a.alpha_hat - b.alpha_hat) <= 3 * (a.alpha_ci + b.alpha_ci)

    def test_trial_floor(self, rule512, nominals512):
        p0, p1 = nominals512
        with pytest.raises(InvalidTrialCount):
            db.simulate_errors(rule512, p0, p1, 1, 999, seed=1)

    def test_matches_quadrature_single_sample(self, calibrated512):
        res = calibrated512
        rule = db.DecisionRule(q0=res.q0, q1=res.q1, lam=res.lam)
        alpha, beta = db.error_probabilities(rule, res.q0, res.q1)
        rep = db.simulate_errors(rule, res.q0, res.q1, 1, 200_000, seed=17)
        assert abs(rep.alpha_hat - alpha) <= 3 * rep.alpha_ci
        assert abs(rep.beta_hat - beta) <= 3 * rep.beta_ci

    def test_support_inside_reject_region(self, calibrated512, grid512):
        # an h0 supported where the rule always decides H0 never false-alarms
        res = calibrated512
        rule = db.DecisionRule(q0=res.q0, q1=res.q1, lam=res.lam)
        d = rule.delta_grid()
        x = grid512.points
        inside = (d == 0.0) & (x > -4.5) & (x < -1.5)
        assert inside.any()
        vals = np.where(inside, res.q0.values, 0.0)
        h0 = db.normalize(db.GriddedMeasure(grid512, vals))
        rep = db.simulate_errors(rule, h0, res.q1, 1, 5000, seed=23)
        assert rep.alpha_hat == 0.0

    def test_multi_sample_threshold_override(self, calibrated512):
        res = calibrated512
        rule = db.DecisionRule(q0=res.q0, q1=res.q1, lam=res.lam)
        default = db.simulate_errors(rule, res.q0, res.q1, 3, 2000, seed=5)
        assert default.threshold == res.lam
        override = db.simulate_errors(rule, res.q0, res.q1, 3, 2000, seed=5, threshold=2.0)
        assert override.threshold == 2.0
        assert override.alpha_hat <= default.alpha_hat

    def test_report_serializes(self, rule512, nominals512):
        p0, p1 = nominals512
        rep = db.simulate_errors(rule512, p0, p1, 1, 1500, seed=2)
        d = rep.to_dict()
        assert set(d) == {"N", "trials", "seed", "threshold", "alpha_hat", "beta_hat", "ci"}
