import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from dyncomp import cli, io, optim
from dyncomp.errors import DegenerateCovarianceError
from dyncomp.synth import gp_generate


def run(*argv):
    return cli.main([str(a) for a in argv])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def embedded(tmp_path_factory):
    out = tmp_path_factory.mktemp("embed")
    assert run("synth", "lorenz-embed", "--snr", 1, "--dim", 30, "--steps", 4000,
               "--seed", 3, "--out-dir", out) == 0
    return out


class TestSynth:
    def test_lorenz_shape(self, tmp_path):
        assert run("synth", "lorenz", "--steps", 20000, "--seed", 7, "--out-dir", tmp_path) == 0
        data, header = io.read_csv(tmp_path / "data.csv")
        assert data.shape == (20000, 3) and header == ["x", "y", "z"]
        sidecar = json.loads((tmp_path / "data.json").read_text())
        assert sidecar["seed"] == 7 and sidecar["generator"] == "lorenz"
        assert (tmp_path / "synth_config.json").exists()

    def test_embed_outputs(self, embedded):
        assert io.read_csv(embedded / "data.csv")[0].shape == (4000, 30)
        assert io.read_matrix_csv(embedded / "embedding.csv").shape == (30, 3)
        assert io.read_csv(embedded / "data_latent.csv")[0].shape == (4000, 3)

    def test_rerun_is_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            assert run("synth", "gp", "--kernel", "exponential", "--tau", 5, "--steps", 3000,
                       "--seed", 2, "--out-dir", tmp_path / sub) == 0
        for name in ("data.csv", "data.json", "synth_config.json"):
            assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)

    def test_invalid_params_exit_nonzero(self, tmp_path, capsys):
        assert run("synth", "gp", "--tau", -1, "--out-dir", tmp_path) == 1
        assert "error" in capsys.readouterr().err


class TestFit:
    def test_pca_shape(self, embedded, tmp_path):
        assert run("fit", "--input", embedded / "data.csv", "--method", "pca", "-d", 3,
                   "--out-dir", tmp_path) == 0
        assert io.read_matrix_csv(tmp_path / "projection.csv").shape == (30, 3)
        assert "pi_nats" in json.loads((tmp_path / "report.json").read_text())

    def test_dca_report(self, embedded, tmp_path):
        args = ("fit", "--input", embedded / "data.csv", "--method", "dca", "-d", 3, "-T", 4,
                "--restarts", 5, "--seed", 1)
        assert run(*args, "--out-dir", tmp_path / "a") == 0
        rep = json.loads((tmp_path / "a" / "report.json").read_text())
        assert len(rep["restarts"]) == 5
        assert rep["restarts"][rep["chosen_restart"]]["penalty_residual"] < 1e-6
        assert run(*args, "--out-dir", tmp_path / "b") == 0
        rep_b = json.loads((tmp_path / "b" / "report.json").read_text())
        assert rep_b["pi_nats"] == rep["pi_nats"]
        assert digest(tmp_path / "a" / "projection.csv") == digest(tmp_path / "b" / "projection.csv")

    @pytest.mark.parametrize("method", ["sfa", "cca", "dca-deflate", "dca-fft-deflate"])
    def test_other_methods(self, embedded, tmp_path, method):
        assert run("fit", "--input", embedded / "data.csv", "--method", method, "-d", 2, "-T", 2,
                   "--restarts", 1, "--out-dir", tmp_path) == 0
        assert io.read_matrix_csv(tmp_path / "projection.csv").shape == (30, 2)
        if method == "cca":
            assert (tmp_path / "projection_future.csv").exists()

    def test_failure_writes_diagnostics(self, embedded, tmp_path, monkeypatch):
        def broken(*args, **kwargs):
            raise DegenerateCovarianceError("boom", np.inf)
        monkeypatch.setattr(optim, "_time_loss_grad", broken)
        assert run("fit", "--input", embedded / "data.csv", "-d", 2, "--restarts", 2,
                   "--out-dir", tmp_path) == 1
        rep = json.loads((tmp_path / "report.json").read_text())
        assert "error" in rep and len(rep["diagnostics"]) == 2

    def test_config_overrides_and_reproduces(self, embedded, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"input": str(embedded / "data.csv"), "method": "pca", "d": 2}))
        assert run("fit", "-d", 5, "--config", cfg, "--out-dir", tmp_path / "a") == 0
        assert io.read_matrix_csv(tmp_path / "a" / "projection.csv").shape == (30, 2)
        resolved = tmp_path / "a" / "fit_config.json"
        assert run("fit", "--config", resolved, "--out-dir", tmp_path / "b") == 0
        for name in ("projection.csv", "report.json", "fit_config.json"):
            assert digest(tmp_path / "a" / name) == digest(tmp_path / "b" / name)

    def test_unknown_config_key(self, embedded, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"nonsense": 1}))
        assert run("fit", "--input", embedded / "data.csv", "-d", 1, "--config", cfg,
                   "--out-dir", tmp_path) == 1

    def test_missing_required(self, tmp_path):
        with pytest.raises(SystemExit) as info:
            run("fit", "--out-dir", tmp_path)
        assert info.value.code == 2


class TestTransform:
    def test_identity(self, tmp_path, rng):
        X = rng.standard_normal((50, 4))
        io.write_csv(tmp_path / "x.csv", X)
        io.write_csv(tmp_path / "p.csv", np.eye(4))
        assert run("transform", "--input", tmp_path / "x.csv", "--projection", tmp_path / "p.csv",
                   "--out-dir", tmp_path) == 0
        np.testing.assert_array_equal(io.read_matrix_csv(tmp_path / "projected.csv"), X)

    def test_product_oracle(self, tmp_path, rng):
        X = rng.standard_normal((50, 4))
        V = rng.standard_normal((4, 2))
        io.write_csv(tmp_path / "x.csv", X)
        io.write_csv(tmp_path / "p.csv", V)
        assert run("transform", "--input", tmp_path / "x.csv", "--projection", tmp_path / "p.csv",
                   "--out-dir", tmp_path) == 0
        np.testing.assert_allclose(io.read_matrix_csv(tmp_path / "projected.csv"), X @ V, rtol=1e-15)

    def test_shape_mismatch_and_empty(self, tmp_path, rng):
        io.write_csv(tmp_path / "x.csv", rng.standard_normal((10, 3)))
        io.write_csv(tmp_path / "p.csv", np.eye(4)[:, :2])
        assert run("transform", "--input", tmp_path / "x.csv", "--projection", tmp_path / "p.csv",
                   "--out-dir", tmp_path) == 1
        (tmp_path / "e.csv").write_text("\n")
        assert run("transform", "--input", tmp_path / "x.csv", "--projection", tmp_path / "e.csv",
                   "--out-dir", tmp_path) == 1


class TestPI:
    def test_white_noise(self, tmp_path, rng):
        io.write_csv(tmp_path / "w.csv", rng.standard_normal((100_000, 1)))
        assert run("pi", "--input", tmp_path / "w.csv", "-T", 3, "--out-dir", tmp_path) == 0
        assert abs(json.loads((tmp_path / "pi.json").read_text())["value"]) < 0.02

    def test_ar1_long_timescale(self, tmp_path):
        y = gp_generate("exponential", 100.0, 100_000, seed=0)
        io.write_timeseries(tmp_path / "y.csv", y)
        values = {}
        for method in ("time", "freq"):
            out = tmp_path / method
            assert run("pi", "--input", tmp_path / "y.csv", "--method", method, "-T", 64,
                       "--out-dir", out) == 0
            values[method] = json.loads((out / "pi.json").read_text())["value"]
        assert abs(values["time"] / 1.961 - 1) < 0.05
        assert abs(values["freq"] / values["time"] - 1) < 0.05

    def test_knn_and_covs_dir(self, tmp_path, rng):
        y = gp_generate("exponential", 3.0, 3000, seed=1)
        io.write_timeseries(tmp_path / "y.csv", y)
        assert run("pi", "--input", tmp_path / "y.csv", "--method", "knn", "-T", 1,
                   "--out-dir", tmp_path / "k") == 0
        from dyncomp.synth import ar1_crosscov
        ar1_crosscov(3.0, 4).save(tmp_path / "covs")
        for method in ("time", "freq"):
            assert run("pi", "--covs", tmp_path / "covs", "--method", method, "-T", 2,
                       "--out-dir", tmp_path / method) == 0

    def test_freq_needs_one_channel(self, tmp_path, rng):
        io.write_csv(tmp_path / "x.csv", rng.standard_normal((500, 2)))
        assert run("pi", "--input", tmp_path / "x.csv", "--method", "freq", "-T", 2,
                   "--out-dir", tmp_path) == 1


class TestEval:
    def test_table_shape_and_aggregation(self, tmp_path, rng):
        F = rng.standard_normal((2000, 3))
        io.write_csv(tmp_path / "f.csv", F)
        io.write_csv(tmp_path / "g.csv", F @ rng.standard_normal((3, 2)))
        assert run("eval", "--features", tmp_path / "f.csv", "--targets", tmp_path / "g.csv",
                   "--lags", "0,5,10", "--label", "dca", "-T", 4, "--out-dir", tmp_path) == 0
        with open(tmp_path / "results.csv") as f:
            rows = list(csv.DictReader(f))
        assert list(rows[0]) == ["method", "d", "T", "lag", "fold", "r2"]
        assert len(rows) == 3 * 5
        summary = json.loads((tmp_path / "summary.json").read_text())
        for lag in ("0", "5", "10"):
            vals = [float(r["r2"]) for r in rows if r["lag"] == lag]
            assert abs(np.mean(vals) - summary["mean_r2"][lag]) < 1e-12
        r2_lag0 = [float(r["r2"]) for r in rows if r["lag"] == "0"]
        np.testing.assert_allclose(r2_lag0, 1.0, atol=1e-10)

    def test_misaligned_lengths(self, tmp_path, rng):
        io.write_csv(tmp_path / "f.csv", rng.standard_normal((100, 2)))
        io.write_csv(tmp_path / "g.csv", rng.standard_normal((90, 1)))
        assert run("eval", "--features", tmp_path / "f.csv", "--targets", tmp_path / "g.csv",
                   "--out-dir", tmp_path) == 1


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dyncomp", "synth", "lorenz", "--steps", "100",
                          "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "data.csv").exists()


def test_thread_cap_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DYNCOMP_THREADS", "1")
    assert run("synth", "lorenz", "--steps", 50, "--out-dir", tmp_path) == 0
    monkeypatch.setenv("DYNCOMP_THREADS", "many")
    assert run("synth", "lorenz", "--steps", 50, "--out-dir", tmp_path) == 1
