import io
import json
import subprocess
import sys

import numpy as np
import pytest

from lcsm.basis import build_basis
from lcsm.cli import dumps, fmt_float, main
from lcsm.solver import build_stats_from_observations, empirical_risk, predict_sigma

PATH3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=float)


def run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(42)
    Y = rng.normal(size=(25, 3)) @ np.array([[1.0, 0.3, 0.0], [0.0, 1.0, 0.2], [0.0, 0.0, 0.8]])
    data = tmp_path / "y.csv"
    np.savetxt(data, Y, delimiter=",", fmt="%.17g")
    adj = tmp_path / "a.csv"
    np.savetxt(adj, PATH3, delimiter=",", fmt="%g")
    return tmp_path, Y, data, adj


def test_fit_identity_only_intercept(files):
    tmp, Y, data, _ = files
    code, out, err = run(["fit", "--data", data, "--q", 0])
    assert code == 0, err
    rep = json.loads(out)
    # least squares on I alone: mean of the diagonal second moments
    expected = np.mean(Y**2)
    assert rep["coef"]["intercept"] == pytest.approx(expected, rel=1e-12)
    assert rep["metadata"]["p"] == 1


def test_fit_huge_lambda_all_zero(files):
    tmp, Y, data, adj = files
    code, out, _ = run(["fit", "--data", data, "--adjacency", adj, "--lambda", "1e12", "--penalize-all"])
    assert code == 0
    rep = json.loads(out)
    assert all(v == 0 for v in rep["coef"]["theta"])
    assert rep["selected"]["active"] == []


def test_fit_report_byte_identical(files):
    tmp, Y, data, adj = files
    argv = ["fit", "--data", data, "--adjacency", adj, "--nlambda", 20, "--split", "--nu", 0.05, "--sigma-w", 1]
    assert run(argv)[1] == run(argv)[1]


def test_fit_round_trip_risk(files):
    tmp, Y, data, adj = files
    code, out, _ = run(["fit", "--data", data, "--adjacency", adj, "--order", 2, "--nlambda", 30, "--normalize"])
    assert code == 0
    rep = json.loads(out)
    bs = build_basis(adjacency=PATH3, s=2, normalize=True)
    stats = build_stats_from_observations(np.loadtxt(data, delimiter=","), bs)
    theta = np.array(rep["coef"]["theta"], dtype=float)
    risk = rep["selected"]["risk"]
    assert abs(empirical_risk(theta, stats) - risk) <= 1e-10 * max(1.0, risk)
    sigma = predict_sigma(theta, bs) + rep["pd_correction"]["omega"] * np.eye(3)
    np.testing.assert_allclose(np.array(rep["sigma_hat"]), sigma, rtol=0, atol=1e-12)
    for coefs, r in zip(rep["path"]["coef"], rep["path"]["risk"]):
        assert abs(empirical_risk(np.array(coefs, dtype=float), stats) - r) <= 1e-10 * max(1.0, r)


def test_fit_matrix_obs_and_center(files):
    tmp, Y, data, adj = files
    Z = np.einsum("ni,nj->nij", Y, Y).reshape(-1, 3)
    zpath = tmp / "z.csv"
    np.savetxt(zpath, Z, delimiter=",", fmt="%.17g")
    a = json.loads(run(["fit", "--data", data, "--adjacency", adj, "--nlambda", 10])[1])
    b = json.loads(run(["fit", "--data", zpath, "--matrix-obs", "--adjacency", adj, "--nlambda", 10])[1])
    np.testing.assert_allclose(a["coef"]["theta"], b["coef"]["theta"], rtol=1e-9, atol=1e-12)
    c = json.loads(run(["fit", "--data", data, "--center", "--q", 0])[1])
    assert c["coef"]["intercept"] == pytest.approx(np.mean((Y - Y.mean(0)) ** 2), rel=1e-12)


def test_fit_matrix_outputs(files):
    tmp, Y, data, adj = files
    prefix = tmp / "out_"
    code, out, _ = run(["fit", "--data", data, "--adjacency", adj, "--nlambda", 10, "--matrix-prefix", prefix, "--split"])
    assert code == 0
    rep = json.loads(out)
    S = np.loadtxt(f"{prefix}sigma_hat.csv", delimiter=",")
    SA = np.loadtxt(f"{prefix}sigma_A.csv", delimiter=",")
    SR = np.loadtxt(f"{prefix}sigma_R.csv", delimiter=",")
    np.testing.assert_array_equal(S, np.array(rep["sigma_hat"]))
    np.testing.assert_array_equal(SA, np.array(rep["sigma_A"]))
    np.testing.assert_allclose(SA + SR + rep["pd_correction"]["omega"] * np.eye(3), S, atol=1e-12)


def test_data_errors_name_line(tmp_path, files):
    _, _, data, adj = files
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2,3\n4,5,6\n7,x,9\n")
    code, out, err = run(["fit", "--data", bad])
    assert code == 3
    assert "line 3" in err and err.count("\n") == 1 and err.startswith("lcsm: error[data]:")
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("1,2,3\n4,5\n")
    code, _, err = run(["fit", "--data", ragged])
    assert code == 3 and "line 2" in err
    code, _, err = run(["fit", "--data", tmp_path / "missing.csv"])
    assert code == 3
    two = tmp_path / "a2.csv"
    two.write_text("0,1\n1,0\n")
    code, _, err = run(["fit", "--data", data, "--adjacency", two])
    assert code == 3 and "d=3" in err
    asym = tmp_path / "asym.csv"
    asym.write_text("1,2\n3,4\n1,2\n2,4\n")
    code, _, err = run(["fit", "--data", asym, "--matrix-obs"])
    assert code == 3 and "not symmetric" in err
    zero = tmp_path / "zero.csv"
    zero.write_text("0,0\n0,0\n")
    code, _, err = run(["fit", "--data", zero, "--penalize-all", "--q", 0])
    assert code == 3


def test_usage_errors(files):
    _, _, data, _ = files
    for argv in (
        ["simulate", "--type", 4, "--d", 20],
        ["fit"],
        ["fit", "--data", data, "--order", 2],
        ["fit", "--data", data, "--nlambda", 0],
        ["fit", "--data", data, "--penalize", "some"],
        ["fit", "--data", data, "--q", 99],
        ["basis"],
        [],
    ):
        code, _, err = run(argv)
        assert code == 2, argv
        assert err.count("\n") == 1 and err.startswith("lcsm: error[usage]:")


def test_numeric_errors(tmp_path, files):
    _, _, data, adj = files
    code, _, err = run(["basis", "--adjacency", adj, "--order", 3])
    assert code == 4 and "DependencyError" in err and err.count("\n") == 1
    code, _, err = run(["fit", "--data", data, "--adjacency", adj, "--order", 3])
    assert code == 4 and "DependencyError" in err
    code, _, err = run(["fit", "--data", data, "--adjacency", adj, "--max-iter", 1, "--lambda", "0.01"])
    assert code == 4 and "NonConvergenceError" in err


def test_basis_reports(tmp_path):
    code, out, _ = run(["basis", "--d", 3])
    rep = json.loads(out)
    assert code == 0 and rep["q"] == 5 and rep["p"] == 6
    rng = np.random.default_rng(4)
    from lcsm.simulate import gen_adjacency

    A = gen_adjacency(1, 20, rng)
    path = tmp_path / "t1.csv"
    np.savetxt(path, A, delimiter=",", fmt="%g")
    code, out, _ = run(["basis", "--adjacency", path, "--order", 2])
    rep = json.loads(out)
    assert code == 0 and rep["q"] == 210 - 3
    assert rep["residuals"]["orthonormality"] <= 1e-10 and rep["residuals"]["cross"] <= 1e-10
    assert rep["independence"]["ok"]


def test_simulate_csv_deterministic_across_threads(tmp_path):
    base = ["simulate", "--type", 3, "--d", 10, "--s", 1, "--n", 10, "--reps", 4, "--nlambda", 20, "--seed", 7, "--no-timing"]
    outs = []
    for threads in (1, 3, 1):
        path = tmp_path / f"sim{threads}_{len(outs)}.csv"
        code, summary, _ = run(base + ["--threads", threads, "--out", path])
        assert code == 0 and "FE" in summary
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    code, csv_text, summary = run(base[:9] + ["--reps", 1, "--nlambda", 20, "--seed", 7, "--no-timing"])
    assert csv_text.splitlines()[1] == outs[0].decode().splitlines()[1]


def test_simulate_failures_reported(tmp_path):
    code, out, err = run(["simulate", "--type", 3, "--d", 2, "--s", 2, "--n", 3, "--reps", 2, "--nlambda", 5])
    assert code == 4 and "DependencyError" in err


def test_dumps_formatting():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert float(fmt_float(0.1)) == 0.1
    assert fmt_float(float("nan")) == "null"
    text = dumps({"a": np.array([1.5, 2.0]), "b": {"c": [[1, 2], [3, 4]]}, "d": None, "e": True, "f": "x"})
    assert json.loads(text) == {"a": [1.5, 2.0], "b": {"c": [[1, 2], [3, 4]]}, "d": None, "e": True, "f": "x"}
    x = np.random.default_rng(0).normal(size=50)
    assert np.array_equal(np.array(json.loads(dumps(list(x)))), x)


def test_module_entry_point(files):
    _, _, data, _ = files
    proc = subprocess.run([sys.executable, "-m", "lcsm", "basis", "--d", "4"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["q"] == 9
    proc = subprocess.run([sys.executable, "-m", "lcsm", "fit", "--data", str(data), "--order", "1"], capture_output=True, text=True)
    assert proc.returncode == 2 and proc.stderr.count("\n") == 1
