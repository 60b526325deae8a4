"""End-to-end tests of the command-line front end."""
import json
import subprocess
import sys

import numpy as np
import pytest

from sofrvem import io
from sofrvem.cli import main
from sofrvem.metrics import elbow_select
from sofrvem.pipeline import fit_dataset
from sofrvem.simulate import ScenarioSpec, default_fit_config, gen_sim1


def _simulate(tmp_path, study=1, n=100, sigma2=0.1, S=1, seed=0):
    out = tmp_path / "sim"
    code = main(["simulate", "--study", str(study), "--n", str(n), "--sigma2", str(sigma2),
                 "--S", str(S), "--seed", str(seed), "--out", str(out)])
    assert code == 0
    return out


def _tree_bytes(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file()}


class TestSimulate:
    def test_layout(self, tmp_path):
        out = _simulate(tmp_path, S=2)
        assert sorted(p.name for p in out.iterdir()) == ["rep_000", "rep_001"]
        names = sorted(p.name for p in (out / "rep_000").iterdir())
        assert names == ["X1.csv", "X2.csv", "config.json", "truth.json", "y.csv"]

    def test_files_match_generator(self, tmp_path):
        out = _simulate(tmp_path, seed=5)
        ds, _ = gen_sim1(100, 0.1, 5)
        np.testing.assert_array_equal(io.read_response(out / "rep_000" / "y.csv"), ds.y)
        cov = io.read_functional(out / "rep_000" / "X1.csv")
        np.testing.assert_array_equal(cov.values, ds.covariates[0].values)
        np.testing.assert_array_equal(cov.grid, ds.covariates[0].grid)

    def test_deterministic(self, tmp_path):
        a = _simulate(tmp_path / "a", study=3)
        b = _simulate(tmp_path / "b", study=3)
        assert _tree_bytes(a) == _tree_bytes(b)
        assert (a / "rep_000" / "scalars.csv").is_file()

    def test_off_grid_rejected(self, tmp_path, capsys):
        code = main(["simulate", "--study", "1", "--n", "123", "--sigma2", "0.1", "--out", str(tmp_path)])
        assert code == 2 and "custom" in capsys.readouterr().err


class TestFit:
    def test_round_trip_bitwise(self, tmp_path):
        sim = _simulate(tmp_path, seed=3)
        out = tmp_path / "fit"
        assert main(["fit", str(sim / "rep_000" / "config.json"), "--out", str(out)]) == 0
        got = json.loads((out / "fit.json").read_text())
        spec = ScenarioSpec(1, 100, 0.1, seed=3)
        ds, _ = spec.generate(0)
        ref = fit_dataset(ds, default_fit_config(spec, seed=3))
        assert got["pz"] == [float(v) for v in ref.pz]
        assert got["intercept"] == float(ref.intercept)
        assert got["elbo_trace"] == [float(v) for v in ref.elbo_trace.values]
        rows = (out / "curves.csv").read_text().splitlines()
        assert rows[0] == "covariate,t,estimate,lower,upper" and len(rows) == 1 + 2 * 100
        est = np.array([float(r.split(",")[2]) for r in rows[1:101]])
        np.testing.assert_array_equal(est, ref.beta_curves[0])
        assert (out / "summary.txt").is_file()

    def test_missing_covariate_file(self, tmp_path, capsys):
        sim = _simulate(tmp_path)
        (sim / "rep_000" / "X2.csv").unlink()
        code = main(["fit", str(sim / "rep_000" / "config.json"), "--out", str(tmp_path / "o")])
        assert code == 2 and "X2.csv" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        sim = _simulate(tmp_path)
        cfg_path = sim / "rep_000" / "config.json"
        cfg = json.loads(cfg_path.read_text())
        cfg["lambda"] = 1.0
        cfg_path.write_text(json.dumps(cfg))
        assert main(["fit", str(cfg_path), "--out", str(tmp_path / "o")]) == 2
        assert "unknown keys" in capsys.readouterr().err

    def test_partial(self, tmp_path):
        sim = _simulate(tmp_path, study=3)
        cfg_path = sim / "rep_000" / "config.json"
        cfg = json.loads(cfg_path.read_text())
        cfg["partial"] = False
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "fit"
        assert main(["fit", str(cfg_path), "--out", str(out), "--partial"]) == 0
        got = json.loads((out / "fit.json").read_text())
        assert len(got["selected_scalar"]) == 2 and got["selected_scalar"][1] == 1

    def test_console_entry_point(self, tmp_path):
        sim = _simulate(tmp_path)
        proc = subprocess.run([sys.executable, "-m", "sofrvem.cli", "fit",
                               str(sim / "rep_000" / "config.json"), "--out", str(tmp_path / "o")],
                              capture_output=True, text=True)
        assert proc.returncode == 0 and "final ELBO" in proc.stdout


class TestReplicate:
    def test_tables_and_determinism(self, tmp_path):
        args = ["replicate", "--study", "1", "--n", "100", "200", "--sigma2", "0.1", "--S", "2"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        assert main(args + ["--out", str(tmp_path / "b")]) == 0
        a, b = _tree_bytes(tmp_path / "a"), _tree_bytes(tmp_path / "b")
        assert a == b
        assert sorted(a) == ["summary.json", "table1_sim1_estimation.csv", "table2_sim1_selection.csv"]
        est = a["table1_sim1_estimation.csv"].decode().splitlines()
        assert est[0] == "metric,sigma2=0.1;n=100,sigma2=0.1;n=200"
        assert [r.split(",")[0] for r in est[1:]] == ["MSE", "EMISE_1", "EMISE_2"]
        sel = a["table2_sim1_selection.csv"].decode().splitlines()
        assert sel[0] == "covariate,sigma2=0.1;n=100,sigma2=0.1;n=200"
        assert sel[1] == "Covariate 1,1.00,1.00"

    def test_sim2_layout(self, tmp_path):
        out = tmp_path / "t"
        assert main(["replicate", "--study", "2", "--n", "100", "--sigma2", "0.01", "--S", "1",
                     "--out", str(out)]) == 0
        est = (out / "table3_sim2_estimation.csv").read_text().splitlines()
        assert est[0] == "n,sigma2,metric,VEM" and len(est) == 1 + 5
        sel = (out / "table4_sim2_selection.csv").read_text().splitlines()
        assert sel[0] == "n,sigma2,covariate,VEM" and len(sel) == 1 + 4

    def test_sim3_scalar_rows(self, tmp_path):
        out = tmp_path / "t"
        assert main(["replicate", "--study", "3", "--n", "100", "--sigma2", "0.1", "--S", "1",
                     "--out", str(out)]) == 0
        sel = (out / "table6_sim3_selection.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in sel[1:]] == [
            "Functional Covariate 1", "Functional Covariate 2", "Scalar Covariate 1", "Scalar Covariate 2"]


class TestSelectBasis:
    def test_single_K(self, tmp_path):
        sim = _simulate(tmp_path)
        out = tmp_path / "k"
        assert main(["select-basis", str(sim / "rep_000" / "config.json"), "--K-list", "5",
                     "--out", str(out)]) == 0
        assert json.loads((out / "selected_K.json").read_text())["K"] == 5

    def test_curve_file_and_elbow(self, tmp_path):
        sim = _simulate(tmp_path)
        out = tmp_path / "k"
        K_list = [4, 5, 6, 8, 10]
        assert main(["select-basis", str(sim / "rep_000" / "config.json"), "--K-list",
                     *map(str, K_list), "--out", str(out)]) == 0
        rows = (out / "gcv.csv").read_text().splitlines()
        assert rows[0] == "K,gcv" and len(rows) == 1 + len(K_list)
        K = [int(r.split(",")[0]) for r in rows[1:]]
        g = [float(r.split(",")[1]) for r in rows[1:]]
        assert K == K_list
        assert json.loads((out / "selected_K.json").read_text())["K"] == elbow_select(K, g)


@pytest.mark.parametrize("argv", [["fit"], ["simulate", "--study", "4", "--n", "1", "--sigma2", "1", "--out", "x"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
