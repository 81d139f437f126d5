import csv
import json
from pathlib import Path

import numpy as np
import pytest

from qkvqe import experiments
from qkvqe.cli import main as cli_main
from qkvqe.errors import ConfigError
from qkvqe.experiments import (ExperimentConfig, derive_seed, feature_dim_table,
                               find_opt, load_config, run_bo_sweep,
                               run_mps_regression, run_regression_sweep,
                               run_spsa_sweep)


class TestConfig:
    def test_defaults_valid(self):
        cfg = ExperimentConfig()
        assert cfg.kind == "regress"
        assert cfg.effective_repeats == cfg.repeats

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(kind="mystery")

    def test_full_scale_repeats(self):
        assert ExperimentConfig(repeats=20, full_scale=True).effective_repeats == 100
        assert ExperimentConfig(repeats=150, full_scale=True).effective_repeats == 150

    def test_ini_roundtrip(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[experiment]\n"
                       "kind = bo\nn = 3\ndepth = 2\nkernels = state unitary\n"
                       "nt_grid = 5, 10\nshots = 1000\ndepolarizing = 0.02\n"
                       "periodic = false\nrepeats = 3\n")
        cfg = load_config(ini)
        assert cfg.kind == "bo" and cfg.n == 3 and cfg.depth == 2
        assert cfg.kernels == ("state", "unitary")
        assert cfg.nt_grid == (5, 10)
        assert cfg.shots == 1000 and cfg.depolarizing == 0.02
        assert cfg.periodic is False and cfg.repeats == 3

    def test_overrides_win(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[experiment]\nseed = 1\nrepeats = 5\n")
        cfg = load_config(ini, seed=9, repeats=None)
        assert cfg.seed == 9 and cfg.repeats == 5

    def test_unknown_key_rejected(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text("[experiment]\nwibble = 3\n")
        with pytest.raises(ConfigError):
            load_config(ini)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.ini")

    def test_snapshot_reloads_identically(self, tmp_path):
        cfg = ExperimentConfig(kind="regress", n=2, depth=1, kernels=("rbf",),
                               nt_grid=(4,), n_v=3, repeats=1,
                               out_dir=str(tmp_path))
        experiments._snapshot(cfg, tmp_path)
        again = load_config(tmp_path / "config.ini")
        assert again == cfg

    def test_derive_seed(self):
        assert derive_seed(100, 7) == 107


def _tiny(tmp_path, **kw):
    base = dict(n=2, depth=1, kernels=("state",), nt_grid=(6, 10), n_v=5,
                repeats=2, seed=0, out_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


class TestRegressionSweep:
    def test_rows_and_persistence(self, tmp_path):
        cfg = _tiny(tmp_path, kernels=("state", "rbf"))
        rows = run_regression_sweep(cfg)
        assert len(rows) == 2 * 2 * 2  # kernels x repeats x nt_grid
        assert {"kernel", "n_t", "repeat", "seed", "r2v",
                "log10_one_minus_r2v"} <= set(rows[0])
        with open(tmp_path / "regression.jsonl") as fh:
            first = json.loads(fh.readline())
        assert first["schema_version"] == 1
        with open(tmp_path / "regression.csv") as fh:
            assert len(list(csv.DictReader(fh))) == len(rows)

    def test_deterministic(self, tmp_path):
        r1 = run_regression_sweep(_tiny(tmp_path / "a"))
        r2 = run_regression_sweep(_tiny(tmp_path / "b"))
        assert all(x["r2v"] == y["r2v"] for x, y in zip(r1, r2))

    def test_state_kernel_beats_rbf_globally(self, tmp_path):
        cfg = _tiny(tmp_path, kernels=("state", "rbf"), nt_grid=(40,),
                    n_v=20, repeats=1)
        rows = run_regression_sweep(cfg)
        by = {r["kernel"]: r["r2v"] for r in rows}
        assert by["state"] > 0.999
        assert by["state"] > by["rbf"]

    def test_local_mode_helps_classical(self, tmp_path):
        # inside a small window the energy is nearly linear, so a classical
        # kernel regresses it well even though it fails globally
        cfg = _tiny(tmp_path, kernels=("rbf",), nt_grid=(30,), n_v=10,
                    repeats=1, scale=10.0)
        local = run_regression_sweep(cfg, local=True)[0]["r2v"]
        cfg2 = _tiny(tmp_path / "g", kernels=("rbf",), nt_grid=(30,), n_v=10,
                     repeats=1)
        global_ = run_regression_sweep(cfg2, local=False)[0]["r2v"]
        assert local > global_


class TestBOSweep:
    def test_persists_traces_and_summary(self, tmp_path):
        cfg = _tiny(tmp_path, kind="bo", n_init=5, n_queries=3, repeats=2,
                    e_opt=-1.0)
        rows = run_bo_sweep(cfg)
        assert len(rows) == 2
        for repeat in range(2):
            path = tmp_path / f"trace_bo_state_{repeat}.jsonl"
            lines = path.read_text().splitlines()
            assert len(lines) == 8  # n_init + n_queries
            rec = json.loads(lines[-1])
            assert rec["schema_version"] == 1
            assert rec["error"] is not None
        assert (tmp_path / "bo_summary.csv").exists()

    def test_warns_without_reference_energy(self, tmp_path):
        cfg = _tiny(tmp_path, kind="bo", n_init=4, n_queries=1, repeats=1)
        with pytest.warns(UserWarning):
            run_bo_sweep(cfg)


class TestSPSASweep:
    def test_summary_and_trailing_metric(self, tmp_path):
        cfg = _tiny(tmp_path, kind="spsa", max_evaluations=60, repeats=2,
                    e_opt=-1.0)
        rows = run_spsa_sweep(cfg)
        assert len(rows) == 2
        assert all("trailing_mean_error" in r for r in rows)
        assert (tmp_path / "trace_spsa_0.jsonl").exists()


class TestFindOpt:
    def test_matches_exact_diagonalization(self, tmp_path):
        cfg = _tiny(tmp_path, kind="find-opt", n=2, depth=2, attempts=10)
        from qkvqe.features import dense_hamiltonian
        from qkvqe.pauli import build_tfim
        theta, e = find_opt(cfg)
        exact = float(np.linalg.eigvalsh(
            dense_hamiltonian(build_tfim(2, 0.5, -0.5, 0.5))).min())
        # a 2-layer circuit on 2 qubits reaches the ground state
        assert e == pytest.approx(exact, abs=1e-6)
        saved = json.loads((tmp_path / "opt.json").read_text())
        assert saved["e_opt"] == pytest.approx(e)


class TestMPSRegression:
    def test_rows_and_full_bond_agreement(self, tmp_path):
        cfg = _tiny(tmp_path, kind="mps-regress", n=4, depth=2,
                    chi_grid=(1, 4), nt_grid=(40,), n_v=10, repeats=1,
                    block_params=3)
        rows = run_mps_regression(cfg)
        assert len(rows) == 2
        by = {r["chi"]: r for r in rows}
        # full bond (chi=4 for n=4) reproduces the exact kernel: near-perfect
        # fit and no advantage to the full-kernel model
        assert by[4]["r2v_plain"] > 0.999
        assert abs(by[4]["log_bayes_vs_full"]) < 5.0
        assert by[1]["r2v_plain"] <= by[4]["r2v_plain"] + 1e-9


class TestFeatureDims:
    def test_table_contents(self, tmp_path):
        cfg = _tiny(tmp_path, kind="feature-dim", n=4, depth=4)
        rows = feature_dim_table(cfg)
        assert len(rows) == 16
        top = [r for r in rows if r["n"] == 4 and r["depth"] == 4][0]
        assert top["p"] == 16
        assert top["real_ansatz_dim"] == 136
        assert top["state_dim_bound"] <= 256


class TestCLI:
    def test_feature_dim_command(self, tmp_path, capsys):
        rc = cli_main(["feature-dim", "--out", str(tmp_path), "--seed", "1"])
        assert rc == 0
        assert (tmp_path / "feature_dims.csv").exists()
        assert "dimension rows" in capsys.readouterr().out

    def test_config_flag_and_overrides(self, tmp_path, capsys):
        ini = tmp_path / "c.ini"
        ini.write_text("[experiment]\nn = 2\ndepth = 1\nkernels = rbf\n"
                       "nt_grid = 5\nn_v = 4\nrepeats = 2\n")
        rc = cli_main(["regress", "--config", str(ini), "--repeats", "1",
                       "--out", str(tmp_path / "r")])
        assert rc == 0
        with open(tmp_path / "r" / "regression.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 1  # --repeats override applied

    def test_unknown_command_exits(self):
        with pytest.raises(SystemExit):
            cli_main(["frobnicate"])


class TestCrossCheck:
    def _run(self, tmp_path):
        run_bo_sweep(_tiny(tmp_path, kind="bo", n_init=5, n_queries=2,
                           repeats=2, e_opt=-1.0))
        run_spsa_sweep(_tiny(tmp_path, kind="spsa", max_evaluations=60,
                             repeats=1, e_opt=-1.0))

    def test_consistent_outputs_pass(self, tmp_path, capsys):
        self._run(tmp_path)
        assert experiments.verify_persisted_summaries(tmp_path) == []
        assert cli_main(["crosscheck", str(tmp_path)]) == 0
        assert "passed" in capsys.readouterr().out

    def test_tampered_summary_detected(self, tmp_path, capsys):
        self._run(tmp_path)
        summary = tmp_path / "bo_summary.csv"
        with open(summary, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows[0]["final_best"] = "-99.0"
        with open(summary, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=rows[0].keys())
            writer.writeheader()
            writer.writerows(rows)
        problems = experiments.verify_persisted_summaries(tmp_path)
        assert problems
        assert cli_main(["crosscheck", str(tmp_path)]) == 1
        assert "FAILED" in capsys.readouterr().out

    def test_missing_trace_detected(self, tmp_path):
        self._run(tmp_path)
        (tmp_path / "trace_spsa_0.jsonl").unlink()
        assert any("missing" in p
                   for p in experiments.verify_persisted_summaries(tmp_path))


class TestDeterminism:
    def test_identical_config_gives_identical_bytes(self, tmp_path):
        kw = dict(kind="bo", n_init=5, n_queries=2, repeats=1, e_opt=-1.0)
        run_bo_sweep(_tiny(tmp_path / "a", **kw))
        run_bo_sweep(_tiny(tmp_path / "b", **kw))
        a = (tmp_path / "a" / "bo_summary.csv").read_bytes()
        b = (tmp_path / "b" / "bo_summary.csv").read_bytes()
        assert a == b
        # trace records match exactly apart from wall-clock timestamps
        for la, lb in zip(
                (tmp_path / "a" / "trace_bo_state_0.jsonl").open(),
                (tmp_path / "b" / "trace_bo_state_0.jsonl").open()):
            ra, rb = json.loads(la), json.loads(lb)
            ra.pop("wall_time"), rb.pop("wall_time")
            assert ra == rb

    def test_reference_config_matches_defaults(self):
        ref = Path(__file__).resolve().parents[1] / "configs" / "reference.ini"
        assert load_config(ref) == ExperimentConfig()


class TestFindOptDegenerate:
    def test_zero_hamiltonian(self, tmp_path):
        cfg = _tiny(tmp_path, kind="find-opt", n=2, depth=1, attempts=3,
                    J=0.0, hx=0.0, hz=0.0)
        _, e = find_opt(cfg)
        assert e == pytest.approx(0.0, abs=1e-12)
