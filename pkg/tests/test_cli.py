import json

import numpy as np
import pytest

from stochint.cli import main


def run(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture
def synthetic_csv(tmp_path):
    path = tmp_path / "data.csv"
    assert run("generate", "--n", 240, "--seed", 3, "--out", path) == 0
    return path


class TestGenerate:
    def test_writes_expected_shape(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("generate", "--n", 50, "--seed", 7, "--out", out) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 51
        header = lines[0].split(",")
        for col in ("t", "y", "mu0", "mu1", "p_true"):
            assert col in header

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run("generate", "--n", 80, "--seed", 5, "--out", a)
        run("generate", "--n", 80, "--seed", 5, "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_too_few_units_exit_code(self, tmp_path):
        assert run("generate", "--n", 1, "--out", tmp_path / "x.csv") == 2

    def test_linear_dgp(self, tmp_path):
        out = tmp_path / "lin.csv"
        assert run("generate", "--n", 60, "--dgp", "linear", "--sigma", 0.0,
                   "--out", out) == 0
        assert out.exists()


class TestEstimate:
    def test_report_written(self, synthetic_csv, tmp_path):
        out_dir = tmp_path / "est"
        assert run("estimate", "--input", synthetic_csv, "--out-dir", out_dir,
                   "--k", 3, "--seed", 1, "--baselines", "all") == 0
        doc = json.loads((out_dir / "report.json").read_text())
        assert list(doc["sie"])[:4] == ["psi_hat", "tau_sie", "tau_ate_plugin", "tau_alg1"]
        assert set(doc["baselines"]) == {"ols", "ipw", "aipw"}
        assert set(doc["epsilon_ate"]) == {"sie", "ols", "ipw", "aipw"}

    def test_delta_grid_monotone_in_oracle_mode(self, tmp_path):
        data = tmp_path / "lin.csv"
        run("generate", "--n", 300, "--dgp", "linear", "--sigma", 0.0,
            "--seed", 2, "--out", data)
        out_dir = tmp_path / "grid"
        assert run("estimate", "--input", data, "--out-dir", out_dir,
                   "--oracle-nuisance", "--k", 2,
                   "--delta-grid", "0.25,0.5,1,2,4") == 0
        rows = (out_dir / "delta_grid.csv").read_text().splitlines()
        assert rows[0] == "delta,psi_hat"
        assert len(rows) == 6
        psis = [float(r.split(",")[1]) for r in rows[1:]]
        assert all(a <= b + 1e-12 for a, b in zip(psis, psis[1:]))

    def test_missing_column_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,t\n0.1,0\n0.2,1\n")
        assert run("estimate", "--input", bad, "--out-dir", tmp_path) == 2

    def test_oracle_mode_without_ground_truth_is_validation_error(self, tmp_path):
        bad = tmp_path / "nogt.csv"
        bad.write_text("x1,t,y\n0.1,0,1.0\n0.2,1,2.0\n0.3,0,1.5\n0.4,1,2.5\n")
        assert run("estimate", "--input", bad, "--out-dir", tmp_path,
                   "--oracle-nuisance", "--k", 2) == 2

    def test_byte_identical_reruns(self, synthetic_csv, tmp_path):
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        for d in (d1, d2):
            assert run("estimate", "--input", synthetic_csv, "--out-dir", d,
                       "--k", 2, "--seed", 4, "--baselines", "ipw",
                       "--delta-grid", "0.5,1,2") == 0
        assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
        assert (d1 / "delta_grid.csv").read_bytes() == (d2 / "delta_grid.csv").read_bytes()


class TestOptimize:
    def test_outputs(self, synthetic_csv, tmp_path):
        out_dir = tmp_path / "opt"
        assert run("optimize", "--input", synthetic_csv, "--out-dir", out_dir,
                   "--steps", 4, "--seed", 5, "--oracle-nuisance") == 0
        lam_lines = (out_dir / "lambda.csv").read_text().splitlines()
        assert lam_lines[0] == "unit,lambda"
        assert len(lam_lines) == 1 + 48  # 20% of 240
        log_lines = (out_dir / "log.jsonl").read_text().splitlines()
        assert len(log_lines) == 4
        record = json.loads(log_lines[0])
        assert set(record) == {"step", "best_reward", "mean_reward", "update_norm"}
        report = json.loads((out_dir / "policy_report.json").read_text())
        assert set(report["policy_value"]) == {
            "rs_sio", "sma_linear", "sma_gbstumps", "random"
        }

    def test_zero_steps_identity_policy(self, synthetic_csv, tmp_path):
        out_dir = tmp_path / "opt0"
        assert run("optimize", "--input", synthetic_csv, "--out-dir", out_dir,
                   "--steps", 0, "--seed", 6, "--oracle-nuisance") == 0
        lam_lines = (out_dir / "lambda.csv").read_text().splitlines()[1:]
        lams = np.array([float(line.split(",")[1]) for line in lam_lines])
        np.testing.assert_array_equal(lams, np.zeros(len(lams)))
        assert (out_dir / "log.jsonl").read_text() == ""

    def test_byte_identical_reruns(self, synthetic_csv, tmp_path):
        d1, d2 = tmp_path / "o1", tmp_path / "o2"
        for d in (d1, d2):
            assert run("optimize", "--input", synthetic_csv, "--out-dir", d,
                       "--steps", 5, "--seed", 7) == 0
        for name in ("lambda.csv", "log.jsonl", "policy_report.json"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


class TestBench:
    @pytest.fixture
    def replication_dir(self, tmp_path):
        rep_dir = tmp_path / "reps"
        rep_dir.mkdir()
        for i in range(3):
            run("generate", "--n", 200, "--seed", 100 + i,
                "--out", rep_dir / f"rep_{i:03d}.csv")
        return rep_dir

    def test_aggregate_table(self, replication_dir, tmp_path):
        out_dir = tmp_path / "bench"
        assert run("bench", "--input-dir", replication_dir, "--out-dir", out_dir,
                   "--k", 2, "--seed", 1) == 0
        rows = (out_dir / "bench_results.csv").read_text().splitlines()
        assert rows[0].startswith("estimator,n_reps,tau_mean,tau_std,eps_ate_mean")
        names = [r.split(",")[0] for r in rows[1:]]
        assert names == ["sie", "ols", "ipw", "aipw"]
        tidy = (out_dir / "tidy.csv").read_text().splitlines()
        assert tidy[0] == "replication,estimator,metric,value"
        assert len(tidy) > 3 * 4  # at least one metric per (rep, estimator)
        assert (out_dir / "bench_timings.csv").exists()

    def test_eps_columns_absent_without_ground_truth(self, replication_dir, tmp_path):
        # strip ground-truth columns from the replications
        plain_dir = tmp_path / "plain"
        plain_dir.mkdir()
        for path in replication_dir.glob("*.csv"):
            lines = path.read_text().splitlines()
            header = lines[0].split(",")
            keep = [i for i, c in enumerate(header)
                    if c not in ("mu0", "mu1", "p_true")]
            out = [",".join(line.split(",")[i] for i in keep) for line in lines]
            (plain_dir / path.name).write_text("\n".join(out) + "\n")
        out_dir = tmp_path / "bench2"
        assert run("bench", "--input-dir", plain_dir, "--out-dir", out_dir,
                   "--k", 2, "--seed", 1, "--estimators", "sie,ipw") == 0
        header = (out_dir / "bench_results.csv").read_text().splitlines()[0]
        assert "eps_ate" not in header
        assert "psi_hat_mean" in header

    def test_partial_failure_exit_code(self, replication_dir, tmp_path):
        (replication_dir / "rep_zzz.csv").write_text("x1,t,y\n0.1,2,1.0\n")
        out_dir = tmp_path / "bench3"
        assert run("bench", "--input-dir", replication_dir, "--out-dir", out_dir,
                   "--k", 2, "--seed", 1, "--estimators", "ols") == 4
        report = json.loads((out_dir / "bench_report.json").read_text())
        assert len(report["failures"]) == 1
        assert report["failures"][0]["file"] == "rep_zzz.csv"

    def test_jobs_parallel_matches_serial(self, replication_dir, tmp_path):
        d1, d2 = tmp_path / "serial", tmp_path / "par"
        run("bench", "--input-dir", replication_dir, "--out-dir", d1,
            "--k", 2, "--seed", 2, "--estimators", "ols,ipw")
        run("bench", "--input-dir", replication_dir, "--out-dir", d2,
            "--k", 2, "--seed", 2, "--estimators", "ols,ipw", "--jobs", 2)
        assert (d1 / "bench_results.csv").read_bytes() == (d2 / "bench_results.csv").read_bytes()
        assert (d1 / "tidy.csv").read_bytes() == (d2 / "tidy.csv").read_bytes()

    def test_unknown_estimator(self, replication_dir, tmp_path):
        assert run("bench", "--input-dir", replication_dir,
                   "--out-dir", tmp_path / "x", "--estimators", "bart") == 2


class TestFlagWiring:
    def test_within_fold_and_alternate_learners(self, synthetic_csv, tmp_path):
        out_dir = tmp_path / "alt"
        assert run("estimate", "--input", synthetic_csv, "--out-dir", out_dir,
                   "--k", 2, "--seed", 2, "--within-fold",
                   "--outcome", "linear") == 0
        doc = json.loads((out_dir / "report.json").read_text())
        assert doc["sie"]["n"] == 240

    def test_rbf_basis_flag(self, synthetic_csv, tmp_path):
        out_dir = tmp_path / "rbf"
        assert run("estimate", "--input", synthetic_csv, "--out-dir", out_dir,
                   "--k", 2, "--seed", 2, "--basis", "poly2rbf",
                   "--outcome", "linear") == 0
        assert (out_dir / "report.json").exists()

    def test_numerical_failure_exit_code(self, monkeypatch, tmp_path):
        from stochint import cli
        from stochint.errors import NonFiniteReward

        def explode(cfg):
            raise NonFiniteReward(3)

        monkeypatch.setitem(cli.COMMANDS, "generate", explode)
        assert run("generate", "--n", 10, "--out", tmp_path / "x.csv") == 3


class TestConfigFile:
    def test_config_supplies_defaults_and_flags_override(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('[generate]\nn = 99\nseed = 5\nout = "ignored.csv"\n')
        out = tmp_path / "cfg.csv"
        assert run("generate", "--config", cfg, "--out", out, "--n", 40) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 41  # flag --n overrides config n
        # config seed must match an explicit --seed 5 run
        out2 = tmp_path / "explicit.csv"
        run("generate", "--n", 40, "--seed", 5, "--out", out2)
        assert out.read_bytes() == out2.read_bytes()

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("[generate]\nbogus = 1\n")
        assert run("generate", "--config", cfg, "--out", tmp_path / "x.csv") == 2

    def test_top_level_keys(self, tmp_path):
        cfg = tmp_path / "flat.toml"
        cfg.write_text("seed = 9\nn = 30\n")
        out = tmp_path / "flat.csv"
        assert run("generate", "--config", cfg, "--out", out) == 0
        assert len(out.read_text().splitlines()) == 31
