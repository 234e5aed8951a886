import json

import pytest

from glmmdisp.cli import main


def run(args):
    return main([str(a) for a in args])


@pytest.fixture()
def sim_files(tmp_path):
    csv = tmp_path / "data.csv"
    truth = tmp_path / "truth.json"
    code = run(["simulate", "--setting", "B", "--m", "50", "--seed", "1",
                "--out-csv", csv, "--out-json", truth])
    assert code == 0
    return csv, truth


class TestSimulate:
    def test_outputs(self, sim_files, tmp_path):
        csv, truth = sim_files
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "group,y,x_b1,x_b2,x_b3"
        assert len(lines) == 501
        payload = json.loads(truth.read_text())
        assert payload["true_params"]["beta_a"] == [-4.06]
        assert payload["true_params"]["beta_b"] == [-2.41, 0.16, -3.93]
        assert payload["true_params"]["sigma"] == [[0.52]]
        assert payload["true_params"]["phi"] == 1.92
        assert payload["schema_version"] == 1

    def test_deterministic(self, sim_files, tmp_path):
        csv, truth = sim_files
        csv2 = tmp_path / "again.csv"
        run(["simulate", "--setting", "B", "--m", "50", "--seed", "1",
             "--out-csv", csv2, "--out-json", tmp_path / "t2.json"])
        assert csv.read_bytes() == csv2.read_bytes()


class TestFit:
    def test_fit_simulated_data(self, sim_files, tmp_path):
        csv, _ = sim_files
        out_json = tmp_path / "fit.json"
        out_csv = tmp_path / "ci.csv"
        code = run(["fit", "--csv", csv, "--family", "gamma",
                    "--group-col", "group", "--y-col", "y",
                    "--xa-intercept", "--xb-cols", "x_b1,x_b2,x_b3",
                    "--out-json", out_json, "--out-csv", out_csv])
        assert code == 0
        payload = json.loads(out_json.read_text())
        assert payload["schema_version"] == 1
        assert payload["converged"] is True
        assert len(payload["estimates"]["beta_b"]) == 3
        assert payload["asym_cov"]["beta_b"]["dims"] == [3, 3]
        assert len(payload["asym_cov"]["beta_b"]["data"]) == 9
        assert payload["asym_cov"]["phi_var"] > 0
        header = out_csv.read_text().splitlines()[0]
        assert header == "name,estimate,lower,upper,scale"

    def test_missing_column_exit_code(self, sim_files, tmp_path, capsys):
        csv, _ = sim_files
        code = run(["fit", "--csv", csv, "--family", "gamma",
                    "--group-col", "group", "--y-col", "score",
                    "--xa-intercept",
                    "--out-json", tmp_path / "f.json",
                    "--out-csv", tmp_path / "c.csv"])
        assert code == 1
        assert "score" in capsys.readouterr().err

    def test_missing_file_exit_code(self, tmp_path):
        code = run(["fit", "--csv", tmp_path / "nope.csv",
                    "--group-col", "g", "--y-col", "y", "--xa-intercept",
                    "--out-json", tmp_path / "f.json",
                    "--out-csv", tmp_path / "c.csv"])
        assert code == 1

    def test_support_violation_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("g,y\n1,1.0\n1,-3.0\n2,2.0\n2,0.5\n")
        code = run(["fit", "--csv", bad, "--family", "gamma",
                    "--group-col", "g", "--y-col", "y", "--xa-intercept",
                    "--out-json", tmp_path / "f.json",
                    "--out-csv", tmp_path / "c.csv"])
        assert code == 2

    def test_nonconvergence_exit_code_still_writes(self, sim_files,
                                                   tmp_path):
        csv, _ = sim_files
        out_json = tmp_path / "f.json"
        code = run(["fit", "--csv", csv, "--family", "gamma",
                    "--group-col", "group", "--y-col", "y",
                    "--xa-intercept", "--xb-cols", "x_b1,x_b2,x_b3",
                    "--max-iters", "1",
                    "--out-json", out_json, "--out-csv", tmp_path / "c.csv"])
        assert code == 3
        assert json.loads(out_json.read_text())["converged"] is False
        assert (tmp_path / "c.csv").exists()

    def test_config_file_with_flag_override(self, sim_files, tmp_path):
        csv, _ = sim_files
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({
            "csv": str(csv), "family": "gamma", "group_col": "group",
            "y_col": "y", "xa_intercept": True,
            "xb_cols": ["x_b1", "x_b2", "x_b3"],
            "max_iters": 1,
            "out_json": str(tmp_path / "f.json"),
            "out_csv": str(tmp_path / "c.csv")}))
        # config alone: max_iters 1 -> non-convergence
        assert run(["fit", "--csv", csv, "--config", config]) == 3
        # explicit flag wins over the config value
        assert run(["fit", "--csv", csv, "--config", config,
                    "--max-iters", "4000"]) == 0


class TestCoverage:
    def test_tiny_run_deterministic(self, tmp_path):
        args = ["coverage", "--setting", "A", "--m", "50", "--reps", "2",
                "--seed", "7", "--threads", "2"]
        out1, meta1 = tmp_path / "c1.csv", tmp_path / "m1.json"
        out2, meta2 = tmp_path / "c2.csv", tmp_path / "m2.json"
        assert run(args + ["--out-csv", out1, "--out-meta", meta1]) == 0
        assert run(args + ["--out-csv", out2, "--out-meta", meta2]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        lines = out1.read_text().strip().splitlines()
        assert len(lines) == 2
        meta = json.loads(meta1.read_text())
        assert meta["seed"] == 7 and meta["reps"] == 2


class TestValidate:
    def test_precondition_exit_code(self, tmp_path):
        code = run(["validate", "--setting", "A", "--m", "50", "--n", "10",
                    "--reps", "10", "--out-json", tmp_path / "v.json"])
        assert code == 2
        assert not (tmp_path / "v.json").exists()


class TestCoverageGridShape:
    def test_default_grid_emits_sixteen_rows(self, tmp_path):
        # settings A-D x m in {50,100,150,200}; one replication per cell
        # keeps this a structure check rather than a full study
        out = tmp_path / "grid.csv"
        code = run(["coverage", "--reps", "1", "--seed", "0",
                    "--out-csv", out, "--out-meta", tmp_path / "meta.json"])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 17
        assert [l.split(",")[0] for l in lines[1:]] == ["A"] * 4 + ["B"] * 4 \
            + ["C"] * 4 + ["D"] * 4
