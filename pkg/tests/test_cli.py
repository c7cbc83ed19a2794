import json

import pytest

from helmavg.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestPsiUniform:
    def test_default_range_truncates_to_known_value(self, capsys):
        code, out, err = run(capsys, "psi-uniform", "--lmin", "0", "--lmax", "60")
        assert code == 0
        assert out.startswith("0.0742")
        assert json.loads(err.splitlines()[0])["subcommand"] == "psi-uniform"

    def test_deterministic(self, capsys):
        _, out1, _ = run(capsys, "psi-uniform", "--lmax", "60")
        _, out2, _ = run(capsys, "psi-uniform", "--lmax", "60")
        assert out1 == out2

    def test_pole_is_numeric_error(self, capsys):
        code, out, err = run(capsys, "psi-uniform", "--lmax", "2.4674011")
        assert code == 2
        assert json.loads(err.splitlines()[-1])["error"] == "PoleAtEndpoint"

    def test_sweep(self, capsys, tmp_path):
        out_path = tmp_path / "sweep.csv"
        code, out, _ = run(capsys, "psi-uniform", "--lmax", "10",
                           "--sweep-lmax", "5", "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "lambda_max,psi,flagged"
        assert len(lines) == 6


class TestUsageErrors:
    def test_unknown_flag(self, capsys):
        assert main(["psi-uniform", "--bogus"]) == 1

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_bad_profile(self, capsys):
        code, _, err = run(capsys, "psi", "--profile", "0.9,0.9,0.9,0.9,0.9",
                           "--nx", "8", "--ny", "4")
        assert code == 1


class TestPsi:
    def test_deterministic(self, capsys):
        args = ("psi", "--profile", "0.1,0.5,0.1,0.5,0.1", "--lmax", "60",
                "--nx", "16", "--ny", "4")
        _, out1, _ = run(capsys, *args)
        _, out2, _ = run(capsys, *args)
        assert out1 == out2
        assert float(out1) != 0.0


class TestPipelineRoundTrip:
    @pytest.fixture(scope="class")
    def workdir(self, tmp_path_factory, capsysbinary=None):
        tmp = tmp_path_factory.mktemp("cli")
        code = main(["gen-data", "--seed", "5", "--count", "40", "--k", "5",
                     "--out", str(tmp / "train.csv"), "--workers", "1",
                     "--nx", "16", "--ny", "4"])
        assert code == 0
        code = main(["gen-data", "--seed", "6", "--count", "20", "--k", "5",
                     "--out", str(tmp / "test.csv"), "--workers", "1",
                     "--nx", "16", "--ny", "4"])
        assert code == 0
        return tmp

    def test_stats(self, workdir, capsys):
        code, out, _ = run(capsys, "stats", "--data", str(workdir / "train.csv"))
        assert code == 0
        s = json.loads(out)
        assert set(s) == {"mean", "variance", "min", "max"}

    def test_train_predict_eval(self, workdir, capsys):
        model_path = workdir / "model.mlp"
        code, out, _ = run(capsys, "train", "--data", str(workdir / "train.csv"),
                           "--out-model", str(model_path),
                           "--max-epochs", "3", "--hidden-units", "16",
                           "--history-csv", str(workdir / "hist.csv"))
        assert code == 0
        assert model_path.exists()
        assert (workdir / "hist.csv").read_text().startswith("epoch,train_mse,val_mse")
        assert (str(model_path) + ".run.json") not in ("",)

        code, out, _ = run(capsys, "predict", "--model", str(model_path),
                           "--profile", "0.3,0.3,0.3,0.3,0.3")
        assert code == 0
        float(out)

        code, out, _ = run(capsys, "eval", "--model", str(model_path),
                           "--data", str(workdir / "test.csv"))
        assert code == 0
        report = json.loads(out)
        assert report["n"] == 20
        assert 0 <= report["pct_abs_err_below_001"] <= 100

    def test_baseline(self, workdir, capsys):
        code, out, _ = run(capsys, "baseline", "--train-data", str(workdir / "train.csv"),
                           "--test-data", str(workdir / "test.csv"))
        assert code == 0
        report = json.loads(out)
        assert report["mse"] >= 0

    def test_provenance_sidecar(self, workdir):
        sidecar = workdir / "train.csv.run.json"
        record = json.loads(sidecar.read_text())
        assert record["subcommand"] == "gen-data"
        assert record["args"]["seed"] == 5


class TestStudies:
    def test_shape_deriv(self, capsys, tmp_path):
        out = tmp_path / "sd.csv"
        code, _, _ = run(capsys, "shape-deriv", "--profile", "0.4",
                         "--field", "affine a11=1", "--t-sweep", "1e-2",
                         "--nx", "16", "--ny", "8", "--out", str(out))
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "t,fd,analytic,abs_diff"
        assert len(lines) == 2

    def test_convergence(self, capsys):
        code, out, _ = run(capsys, "convergence", "--uniform-radius", "0.5",
                           "--levels", "2", "--base-nx", "8", "--base-ny", "4")
        assert code == 0
        result = json.loads(out.splitlines()[-1])
        assert result["reference_kind"] == "exact"

    def test_mesh_dump(self, capsys, tmp_path):
        code, _, _ = run(capsys, "mesh", "--profile", "0.3,0.4",
                         "--nx", "4", "--ny", "2",
                         "--out-vertices", str(tmp_path / "v.csv"),
                         "--out-triangles", str(tmp_path / "t.csv"))
        assert code == 0
        assert (tmp_path / "v.csv").exists()

    def test_eigen(self, capsys):
        code, out, _ = run(capsys, "eigen", "--profile", "0.5",
                           "--nx", "16", "--ny", "8", "--lmax", "3")
        assert code == 0
        assert out.splitlines()[0] == "kappa,mean"

    def test_affine_grid(self, capsys, tmp_path):
        out_path = tmp_path / "grid.csv"
        code, _, _ = run(capsys, "affine-grid", "--n", "10", "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert len(lines) == 101

    def test_psi_response_sweep(self, capsys, tmp_path):
        out_path = tmp_path / "resp.csv"
        code, _, _ = run(capsys, "psi", "--profile", "0.5", "--lmax", "10",
                         "--nx", "16", "--ny", "8", "--sweep-lambda", "8",
                         "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "lambda,mean_response,flagged"
        assert len(lines) == 9
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and float(first[1]) == 1.0

    def test_psi_objective_sweep(self, capsys, tmp_path):
        out_path = tmp_path / "objective.csv"
        code, _, _ = run(capsys, "psi", "--profile", "0.5", "--lmax", "10",
                         "--nx", "16", "--ny", "8", "--sweep-lmax", "6",
                         "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert lines[0] == "lambda_max,psi,flagged"
        assert len(lines) == 7

    def test_config_file_defaults(self, capsys, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"lmax": 10.0}))
        code, out, _ = run(capsys, "--config", str(cfg), "psi-uniform")
        assert code == 0
        code, out2, _ = run(capsys, "psi-uniform", "--lmax", "10")
        assert out == out2
