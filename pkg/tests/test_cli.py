import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from divband.cli import bundled_example_config, main
from divband.config import RunConfig
from divband.errors import ConfigError

SMALL_CONFIG = {
    "nominal0": {"gaussian": {"mean": -1.0, "variance": 1.0}},
    "nominal1": {"gaussian": {"mean": 1.0, "variance": 2.0}},
    "family0": "kl",
    "family1": "kl",
    "epsilon0": 0.03,
    "epsilon1": 0.02,
    "lambda": 1.0,
    "grid": {"x_min": -12.0, "x_max": 12.0, "n": 512},
    "seed": 7,
}


@pytest.fixture
def runner():
    return CliRunner()


def _write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestCalibrateCommand:
    def test_artifacts_written(self, runner, tmp_path):
        cfg = _write_config(tmp_path, SMALL_CONFIG)
        out = tmp_path / "out"
        result = runner.invoke(main, ["calibrate", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "calibration.json").read_text())
        assert set(report["coefficients"]) == {"a0", "b0", "a1", "b1"}
        assert "contamination" in report
        with open(out / "figure.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x", "p0", "p1", "a0p0", "b0p0", "a1p1", "b1p1", "q0", "q1"]
        assert len(rows) == SMALL_CONFIG["grid"]["n"] + 1

    def test_zero_epsilon_short_circuit(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, epsilon0=0.0, epsilon1=0.0)
        cfg = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        result = runner.invoke(main, ["calibrate", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "calibration.json").read_text())
        for key in ("a0", "b0", "a1", "b1"):
            assert report["coefficients"][key] == 1.0

    def test_nonsmooth_family_exit_code(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, family0="tv")
        cfg = _write_config(tmp_path, payload)
        result = runner.invoke(main, ["calibrate", "--config", cfg, "--output-dir", str(tmp_path / "o")])
        assert result.exit_code == 6

    def test_bad_config_exit_code(self, runner, tmp_path):
        cfg = _write_config(tmp_path, {"nominal0": {"gaussian": {"mean": 0, "variance": 1}}})
        result = runner.invoke(main, ["calibrate", "--config", cfg])
        assert result.exit_code == 2

    def test_invalid_json_exit_code(self, runner, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        result = runner.invoke(main, ["calibrate", "--config", str(path)])
        assert result.exit_code == 2


class TestBandCommand:
    def test_explicit_scalars(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, band={"a0": 0.9, "b0": 1.6, "a1": 0.85, "b1": 1.4})
        cfg = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        result = runner.invoke(main, ["band", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        solution = json.loads((out / "band_solution.json").read_text())
        assert solution["lambda"] > 0
        assert len(solution["q0"]) == SMALL_CONFIG["grid"]["n"]
        assert (out / "band_figure.csv").exists()

    def test_collapsed_bands_return_nominals(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, band={"a0": 1.0, "b0": 1.0, "a1": 1.0, "b1": 1.0})
        cfg = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        result = runner.invoke(main, ["band", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        solution = json.loads((out / "band_solution.json").read_text())
        q0 = np.asarray(solution["q0"])
        import divband as db

        grid = db.Grid(-12.0, 12.0, 512)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p0 = db.gaussian_density(grid, -1.0, 1.0)
        assert np.max(np.abs(q0 - p0.values)) <= 1e-9

    def test_infeasible_band_exit_code(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, band={"a0": 1.2, "b0": 2.0, "a1": 0.9, "b1": 1.4})
        cfg = _write_config(tmp_path, payload)
        result = runner.invoke(main, ["band", "--config", cfg, "--output-dir", str(tmp_path / "o")])
        assert result.exit_code == 5

    def test_missing_band_section(self, runner, tmp_path):
        cfg = _write_config(tmp_path, SMALL_CONFIG)
        result = runner.invoke(main, ["band", "--config", cfg, "--output-dir", str(tmp_path / "o")])
        assert result.exit_code == 2


class TestVerifyCommand:
    def test_small_verify_passes(self, runner, tmp_path):
        payload = dict(
            SMALL_CONFIG,
            verify={
                "probes": 100,
                "product_grid_n": 128,
                "product_probes": 100,
                "resolution": 100,
                "instances": 2,
            },
        )
        cfg = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        result = runner.invoke(main, ["verify", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads((out / "verify.json").read_text())
        assert report["passed"] is True
        assert report["band_saddle_probe"]["passed"] is True
        assert report["ball_saddle_probe"]["passed"] is True
        assert report["product_probe"]["passed"] is True
        assert report["oracle_agreement"]["passed"] is True
        assert report["negative_control"]["passed"] is True


class TestSimulateCommand:
    def test_simulation_table(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, simulate={"n_samples": 1, "trials": 2000})
        cfg = _write_config(tmp_path, payload)
        out = tmp_path / "out"
        result = runner.invoke(main, ["simulate", "--config", cfg, "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        with open(out / "simulation.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 2 + 5  # header + nominal + LFD + 5 sampled
        labels = [r[0] for r in rows[1:]]
        assert labels[:2] == ["nominal", "least-favorable"]

    def test_trial_floor_exit(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, simulate={"n_samples": 1, "trials": 10})
        cfg = _write_config(tmp_path, payload)
        result = runner.invoke(main, ["simulate", "--config", cfg, "--output-dir", str(tmp_path / "o")])
        assert result.exit_code == 1  # InvalidTrialCount has no dedicated code

    def test_deterministic_output_bytes(self, runner, tmp_path):
        payload = dict(SMALL_CONFIG, simulate={"n_samples": 1, "trials": 2000})
        cfg = _write_config(tmp_path, payload)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        r1 = runner.invoke(main, ["simulate", "--config", cfg, "--output-dir", str(out1)])
        r2 = runner.invoke(main, ["simulate", "--config", cfg, "--output-dir", str(out2)])
        assert r1.exit_code == 0 and r2.exit_code == 0
        assert (out1 / "simulation.csv").read_bytes() == (out2 / "simulation.csv").read_bytes()


class TestConfigValidation:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(dict(SMALL_CONFIG, bogus=1))

    def test_negative_epsilon_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(dict(SMALL_CONFIG, epsilon0=-0.1))

    def test_nonpositive_lambda_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({**SMALL_CONFIG, "lambda": 0.0})

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(dict(SMALL_CONFIG, family1="renyi"))

    def test_csv_nominal_round_trip(self, tmp_path):
        import divband as db

        grid = db.Grid(-12.0, 12.0, 512)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            p = db.gaussian_density(grid, -1.0, 1.0)
        path = tmp_path / "p0.csv"
        with open(path, "w") as fh:
            fh.write("x,value\n")
            for x, v in zip(grid.points, p.values):
                fh.write(f"{x!r},{v!r}\n")
        payload = dict(SMALL_CONFIG, nominal0={"csv": str(path)})
        cfg = RunConfig.from_dict(payload)
        p0, _ = cfg.nominals()
        assert np.max(np.abs(p0.values - p.values)) <= 1e-9

    def test_bundled_example_config_parses(self):
        cfg = RunConfig.from_dict(bundled_example_config())
        assert cfg.lam == 1.0
        assert cfg.epsilon0 == 0.03
        assert cfg.grid["n"] == 4096

    def test_output_dir_env(self, monkeypatch):
        cfg = RunConfig.from_dict(SMALL_CONFIG)
        monkeypatch.setenv("DIVBAND_OUTPUT_DIR", "/tmp/envdir")
        assert str(cfg.resolve_output_dir()) == "/tmp/envdir"
