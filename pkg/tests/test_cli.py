"""End-to-end command-line pipeline: simulate -> fit -> summarize."""

import json

import numpy as np
import pytest

from msfactor.cli import main
from msfactor.diagnostics import summarize
from msfactor.sampler import SampleLog


def _write(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small simulate -> fit -> summarize run shared by the checks."""
    root = tmp_path_factory.mktemp("pipeline")
    sim_dir = root / "sim"
    fit_dir = root / "fit"
    sum_dir = root / "sum"

    sim_cfg = _write(root / "sim.json", {
        "n": 12, "k": 2, "subjects": 3, "seed": 101,
    })
    assert main(["simulate", "--config", sim_cfg, "--out", str(sim_dir)]) == 0

    fit_cfg = _write(root / "fit.json", {
        "data": str(sim_dir / "dataset.json"),
        "k": 2, "seed": 11, "iterations": 60, "warmup": 30,
        "tau": 0.3, "step_size": 0.05, "leapfrog_steps": 5,
    })
    assert main(["fit", "--config", fit_cfg, "--out", str(fit_dir)]) == 0

    sum_cfg = _write(root / "sum.json", {"fit_dir": str(fit_dir), "burn_in": 0.5})
    assert main([
        "summarize", "--config", sum_cfg, "--out", str(sum_dir),
        "--truth", str(sim_dir / "truth.json"),
    ]) == 0
    return root, sim_dir, fit_dir, sum_dir


class TestPipeline:
    def test_simulate_outputs(self, pipeline):
        _, sim_dir, _, _ = pipeline
        dataset = json.loads((sim_dir / "dataset.json").read_text())
        assert dataset["n"] == 12
        assert np.asarray(dataset["subjects"]).shape == (3, 12, 12)
        truth = json.loads((sim_dir / "truth.json").read_text())
        assert len(truth["frame"]) == 12
        assert len(truth["partition"]["levels"]) == 2
        assert (sim_dir / "effective_config.json").exists()

    def test_fit_outputs(self, pipeline):
        _, _, fit_dir, _ = pipeline
        assert (fit_dir / "chain_00" / "trace.csv").exists()
        assert (fit_dir / "chain_00" / "w_trace.csv").exists()
        meta = json.loads((fit_dir / "run_meta.json").read_text())
        assert meta["chains"]["chain_00"]["n_draws"] == 30
        effective = json.loads((fit_dir / "effective_config.json").read_text())
        assert effective["seed"] == 11 and effective["thin"] == 1

    def test_summary_metrics(self, pipeline):
        _, _, _, sum_dir = pipeline
        payload = json.loads((sum_dir / "summary.json").read_text())
        w_prob = np.asarray(payload["w_prob"])
        assert w_prob.shape == (12, 2)
        assert np.all((w_prob >= 0.0) & (w_prob <= 1.0))
        q_mean = np.asarray(payload["q_mean"])
        np.testing.assert_allclose(q_mean.T @ q_mean, np.eye(2), atol=1e-8)
        assert 0.0 <= payload["recovery"]["subspace_error"] <= np.sqrt(2.0) + 1e-12
        assert len(payload["recovery"]["level_recovery"]) == 2
        for value in payload["recovery"]["level_recovery"]:
            assert 0.0 <= value <= 1.0
        assert (sum_dir / "factors" / "factor_1.csv").exists()
        rows = (sum_dir / "factors" / "factor_2.csv").read_text().splitlines()
        assert len(rows) == 12 and len(rows[0].split(",")) == 12

    def test_summary_matches_direct_computation(self, pipeline):
        _, _, fit_dir, sum_dir = pipeline
        log = SampleLog.from_csv(
            fit_dir / "chain_00" / "trace.csv", fit_dir / "chain_00" / "w_trace.csv"
        )
        direct = summarize(log, burn_in=0.5)
        payload = json.loads((sum_dir / "summary.json").read_text())
        np.testing.assert_array_equal(np.asarray(payload["w_prob"]), direct.w_prob)
        np.testing.assert_array_equal(np.asarray(payload["q_mean"]), direct.q_mean)
        np.testing.assert_array_equal(np.asarray(payload["d_mean"]), direct.d_mean)
        assert payload["ess"]["chain_00"] == direct.ess


class TestDeterminism:
    def test_simulate_repeats_bytewise(self, tmp_path):
        cfg = _write(tmp_path / "sim.json", {"n": 10, "k": 2, "subjects": 2, "seed": 7})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "one")]) == 0
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "two")]) == 0
        assert (tmp_path / "one" / "dataset.json").read_text() == (
            tmp_path / "two" / "dataset.json"
        ).read_text()

    def test_fit_and_summary_repeat(self, tmp_path):
        sim = _write(tmp_path / "sim.json", {"n": 8, "k": 1, "subjects": 2, "seed": 3})
        assert main(["simulate", "--config", sim, "--out", str(tmp_path / "sim")]) == 0
        fit = _write(tmp_path / "fit.json", {
            "data": str(tmp_path / "sim" / "dataset.json"),
            "k": 1, "seed": 5, "iterations": 40, "warmup": 20,
            "tau": 0.3, "leapfrog_steps": 3,
        })
        for name in ("f1", "f2"):
            assert main(["fit", "--config", fit, "--out", str(tmp_path / name)]) == 0
            cfg = _write(tmp_path / f"{name}.json", {"fit_dir": str(tmp_path / name)})
            assert main([
                "summarize", "--config", cfg, "--out", str(tmp_path / f"{name}_sum"),
            ]) == 0
        assert (tmp_path / "f1" / "chain_00" / "trace.csv").read_text() == (
            tmp_path / "f2" / "chain_00" / "trace.csv"
        ).read_text()
        assert (tmp_path / "f1_sum" / "summary.json").read_text() == (
            tmp_path / "f2_sum" / "summary.json"
        ).read_text()

    def test_seed_override_changes_draws(self, tmp_path):
        sim = _write(tmp_path / "sim.json", {"n": 8, "k": 1, "subjects": 2, "seed": 3})
        assert main(["simulate", "--config", sim, "--out", str(tmp_path / "sim")]) == 0
        fit = _write(tmp_path / "fit.json", {
            "data": str(tmp_path / "sim" / "dataset.json"),
            "k": 1, "seed": 5, "iterations": 40, "warmup": 20,
            "tau": 0.3, "leapfrog_steps": 3,
        })
        assert main(["fit", "--config", fit, "--out", str(tmp_path / "s5")]) == 0
        assert main([
            "fit", "--config", fit, "--out", str(tmp_path / "s6"), "--seed", "6",
        ]) == 0
        assert (tmp_path / "s5" / "chain_00" / "trace.csv").read_text() != (
            tmp_path / "s6" / "chain_00" / "trace.csv"
        ).read_text()


class TestMultiChain:
    def test_two_chains_fit_and_pool(self, tmp_path):
        sim = _write(tmp_path / "sim.json", {"n": 8, "k": 1, "subjects": 2, "seed": 13})
        assert main(["simulate", "--config", sim, "--out", str(tmp_path / "sim")]) == 0
        fit = _write(tmp_path / "fit.json", {
            "data": str(tmp_path / "sim" / "dataset.json"),
            "k": 1, "seed": 17, "iterations": 30, "warmup": 10,
            "tau": 0.3, "leapfrog_steps": 2,
        })
        assert main([
            "fit", "--config", fit, "--out", str(tmp_path / "fit"), "--chains", "2",
        ]) == 0
        assert (tmp_path / "fit" / "chain_00" / "trace.csv").exists()
        assert (tmp_path / "fit" / "chain_01" / "trace.csv").exists()
        meta = json.loads((tmp_path / "fit" / "run_meta.json").read_text())
        assert set(meta["chains"]) == {"chain_00", "chain_01"}

        cfg = _write(tmp_path / "sum.json", {"fit_dir": str(tmp_path / "fit")})
        assert main(["summarize", "--config", cfg, "--out", str(tmp_path / "sum")]) == 0
        payload = json.loads((tmp_path / "sum" / "summary.json").read_text())
        assert payload["meta"]["chains"] == ["chain_00", "chain_01"]
        assert set(payload["ess"]) == {"chain_00", "chain_01"}


class TestFailureModes:
    def test_missing_config_field(self, tmp_path, capsys):
        cfg = _write(tmp_path / "fit.json", {"data": "x.json", "k": 1, "seed": 0})
        assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "iterations" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["simulate", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "JSON" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path, capsys):
        cfg = _write(tmp_path / "fit.json", {
            "data": str(tmp_path / "absent.json"), "k": 1, "seed": 0, "iterations": 10,
        })
        assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "absent.json" in capsys.readouterr().err

    def test_invalid_dataset(self, tmp_path, capsys):
        data = tmp_path / "data.json"
        data.write_text(json.dumps({
            "n": 2, "subjects": [[[0, 1], [0, 0]]],
        }))
        cfg = _write(tmp_path / "fit.json", {
            "data": str(data), "k": 1, "seed": 0, "iterations": 10,
        })
        assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "asymmetric" in capsys.readouterr().err

    def test_bad_dimensions(self, tmp_path, capsys):
        cfg = _write(tmp_path / "sim.json", {"n": 4, "k": 5, "subjects": 1, "seed": 0})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 2
        capsys.readouterr()

    def test_impossible_geometry_is_runtime_failure(self, tmp_path, capsys):
        # two nodes cannot carry two +-1 levels; the search must exhaust
        cfg = _write(tmp_path / "sim.json", {"n": 2, "k": 2, "subjects": 1, "seed": 0})
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 3
        assert "full-rank" in capsys.readouterr().err

    def test_summarize_without_chains(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        cfg = _write(tmp_path / "sum.json", {"fit_dir": str(empty)})
        assert main(["summarize", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "chain" in capsys.readouterr().err

    def test_warmup_exceeding_iterations(self, tmp_path, capsys):
        data = tmp_path / "d.json"
        data.write_text(json.dumps({"n": 2, "subjects": [[[0, 0], [0, 0]]]}))
        cfg = _write(tmp_path / "fit.json", {
            "data": str(data), "k": 1, "seed": 0, "iterations": 10, "warmup": 20,
        })
        assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 2
        assert "warmup" in capsys.readouterr().err
