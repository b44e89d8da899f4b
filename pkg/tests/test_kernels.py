"""Backend parity: the compiled core must reproduce the NumPy reference."""

import numpy as np
import pytest

from divband import _kernels
from divband._kernels import _ref

compiled = pytest.importorskip(
    "divband._kernels._core", reason="compiled kernel backend not built"
)

FAMILY_CASES = [
    (0, 0.0),   # kl
    (1, 0.0),   # reverse-kl
    (2, 0.0),   # hellinger2
    (3, 0.0),   # chi2
    (4, 0.5),   # alpha 0.5
    (4, 2.0),   # alpha 2
    (5, 0.0),   # neyman-chi2
]


def _multipliers_for(fam_id, param, rng):
    """Multipliers with finite band scalars for the given family."""
    from divband._kernels._ref import g_by_id

    for _ in range(100):
        nu = rng.uniform(0.5, 4.0)
        # keep (w + eta)/nu inside g's finite domain for every family
        eta = rng.uniform(-1.5, 0.5) * nu
        top = (1.0 + max(eta, 0.0)) / nu
        vals = g_by_id(fam_id, param, np.array([eta / nu, (1.0 + eta) / nu]))
        if np.all(np.isfinite(vals)) and vals[1] > 0:
            return eta, nu
    raise RuntimeError("no feasible multipliers found")


class TestMiddleDeltaParity:
    @pytest.mark.parametrize("fam_id,param", FAMILY_CASES)
    def test_matches_reference(self, fam_id, param, rng):
        n = 257
        p0 = rng.random(n) + 1e-3
        p1 = rng.random(n) + 1e-3
        eta0, nu0 = _multipliers_for(fam_id, param, rng)
        eta1, nu1 = _multipliers_for(fam_id, param, rng)
        lam = rng.uniform(0.5, 2.0)
        args = (p0, p1, eta0, nu0, eta1, nu1, lam, fam_id, param, fam_id, param)
        t_ref = _ref.middle_delta(*args)
        t_fast = compiled.middle_delta(*args)
        assert np.max(np.abs(t_ref - t_fast)) <= 1e-13

    def test_mixed_families(self, rng):
        n = 129
        p0 = rng.random(n) + 1e-3
        p1 = rng.random(n) + 1e-3
        args = (p0, p1, 0.4, 1.2, 0.3, 2.0, 1.0, 0, 0.0, 2, 0.0)
        assert np.max(np.abs(_ref.middle_delta(*args) - compiled.middle_delta(*args))) <= 1e-13


class TestClipIterateParity:
    @pytest.mark.parametrize("damping", [1.0, 0.7])
    def test_matches_reference(self, damping, rng):
        n = 513
        x = np.linspace(-6, 6, n)
        p0 = np.exp(-((x + 1) ** 2) / 2)
        p0 /= p0.sum()
        p1 = np.exp(-((x - 1) ** 2) / 4)
        p1 /= p1.sum()
        args = (p0, p1, 0.9, 1.8, 0.85, 1.4, 1.1, p1.copy(), 1e-12, 5000, damping)
        q0_r, q1_r, it_r, res_r = _ref.clip_iterate(*args)
        q0_c, q1_c, it_c, res_c = compiled.clip_iterate(*args)
        assert it_r == it_c
        assert np.array_equal(q0_r, q0_c)
        assert np.array_equal(q1_r, q1_c)
        assert res_r == res_c


class TestDispatch:
    def test_backend_reports_name(self):
        assert _kernels.backend() in {"compiled", "python"}

    def test_env_override_selects_python(self):
        import subprocess
        import sys

        out = subprocess.run(
            [sys.executable, "-c", "import divband; print(divband.kernel_backend())"],
            capture_output=True,
            text=True,
            env={"DIVBAND_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        )
        assert out.stdout.strip() == "python"


class TestGById:
    @pytest.mark.parametrize("fam_id,param", FAMILY_CASES)
    def test_matches_family_definition(self, fam_id, param, rng):
        import divband as db

        fam = {
            (0, 0.0): db.kl(),
            (1, 0.0): db.reverse_kl(),
            (2, 0.0): db.squared_hellinger(),
            (3, 0.0): db.chi_squared(),
            (4, 0.5): db.alpha_divergence(0.5),
            (4, 2.0): db.alpha_divergence(2.0),
            (5, 0.0): __import__(
                "divband.divergence", fromlist=["x"]
            ).neyman_chi_squared(),
        }[(fam_id, param)]
        y = rng.uniform(-4, 0.95, 256)
        ours = _ref.g_by_id(fam_id, param, y)
        theirs = np.asarray(fam.g(y))
        finite = np.isfinite(ours)
        assert np.array_equal(finite, np.isfinite(theirs))
        assert np.allclose(ours[finite], theirs[finite], rtol=1e-13, atol=0)
