import csv
import json

import numpy as np
import pytest

from clusbird import load_csv
from clusbird.bindata import load_labels, write_labels
from clusbird.cli import main
from clusbird.model import load_params


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--n", "100", "--d", "10", "--m", "1.0", "--c", "2.5",
                 "--k", "3", "--l", "2", "--seed", "7", "--out", str(out)]) == 0
    return out


def test_simulate_outputs(simulated, tmp_path, capsys):
    data = load_csv(simulated / "data.csv")
    assert (data.n_rows, data.n_cols) == (100, 10)
    assert load_labels(simulated / "labels.txt").size == 100
    doc = json.loads((simulated / "true_params.json").read_text())
    assert doc["format_version"] == 1
    code, _, _ = run(capsys, "simulate", "--n", 100, "--d", 10, "--m", 1.0, "--c", 2.5,
                     "--seed", 7, "--out", tmp_path)
    assert code == 0
    for name in ("data.csv", "labels.txt", "true_params.json"):
        assert (tmp_path / name).read_bytes() == (simulated / name).read_bytes()


def test_simulate_rejects_zero_m(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--n", 10, "--d", 10, "--m", 0, "--out", tmp_path)
    assert code == 2 and "m" in err


def test_fit_and_eval(simulated, tmp_path, capsys):
    out = tmp_path / "fit"
    code, text, _ = run(capsys, "fit", "--data", simulated / "data.csv", "--k", 3, "--l", 2,
                        "--lambda", 0.005, "--starts", 10, "--out", out)
    assert code == 0
    assert all(line.startswith("#") for line in text.strip().splitlines())
    assert "# bic" in text
    for name in ("model.json", "responsibilities.csv", "labels.txt", "plot_data.csv"):
        assert (out / name).exists()
    resp = np.loadtxt(out / "responsibilities.csv", delimiter=",")
    np.testing.assert_allclose(resp.sum(axis=1), 1.0, atol=1e-12)
    with open(out / "plot_data.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["kind", "index", "comp1", "comp2"]
    assert sum(r[0] == "centroid" for r in rows) == 3 and sum(r[0] == "loading" for r in rows) == 10

    code, text, _ = run(capsys, "eval", "--labels-a", simulated / "labels.txt", "--labels-b", out / "labels.txt",
                        "--true-model", simulated / "true_params.json", "--model", out / "model.json")
    assert code == 0
    assert 0.0 <= float(text.splitlines()[0]) <= 1.0
    assert "# zero_rate" in text


def test_fit_recovers_easy_clusters(tmp_path, capsys):
    aris = []
    for seed in range(1, 6):
        sim = tmp_path / f"sim{seed}"
        run(capsys, "simulate", "--n", 100, "--d", 10, "--m", 1.0, "--c", 2.5, "--seed", seed, "--out", sim)
        run(capsys, "fit", "--data", sim / "data.csv", "--k", 3, "--l", 2, "--starts", 10,
            "--seed", seed, "--out", sim / "fit")
        _, text, _ = run(capsys, "eval", "--labels-a", sim / "labels.txt", "--labels-b", sim / "fit" / "labels.txt")
        aris.append(float(text))
    assert np.median(aris) >= 0.8, aris


def test_fit_huge_lambda(simulated, tmp_path, capsys):
    code, _, _ = run(capsys, "fit", "--data", simulated / "data.csv", "--k", 3, "--l", 2,
                     "--lambda", 1e6, "--starts", 1, "--out", tmp_path)
    assert code == 0
    params, meta = load_params(tmp_path / "model.json")
    assert not params.a.any()
    assert meta["lambda"] == 1e6


def test_fit_rejects_l_above_k(simulated, tmp_path, capsys):
    code, _, err = run(capsys, "fit", "--data", simulated / "data.csv", "--k", 2, "--l", 3, "--out", tmp_path)
    assert code == 2 and "error" in err


def test_fit_bad_data(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("0,1\n1,5\n")
    code, _, err = run(capsys, "fit", "--data", tmp_path / "bad.csv", "--k", 2, "--l", 1, "--out", tmp_path)
    assert code == 2 and "line 2" in err
    code, _, _ = run(capsys, "fit", "--data", tmp_path / "missing.csv", "--k", 2, "--l", 1, "--out", tmp_path)
    assert code == 2


def test_select_tables(simulated, tmp_path, capsys):
    code, text, _ = run(capsys, "select", "--data", simulated / "data.csv", "--k", 3, "--l", 2,
                        "--grid", "0.01", "--starts", 2, "--out", tmp_path / "one")
    assert code == 0 and "# selected lambda 0.01" in text
    with open(tmp_path / "one" / "bic_table.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and set(rows[0]) == {"lambda", "loglik", "df", "bic", "nonzeros"}

    code, _, _ = run(capsys, "select", "--data", simulated / "data.csv", "--k", 3, "--l", 2,
                     "--starts", 1, "--max-iter", 30, "--out", tmp_path / "all")
    assert code == 0
    with open(tmp_path / "all" / "bic_table.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 20
    load_params(tmp_path / "all" / "model.json")


def test_scores(simulated, tmp_path, capsys):
    run(capsys, "fit", "--data", simulated / "data.csv", "--k", 3, "--l", 2, "--starts", 3, "--out", tmp_path)
    code, _, _ = run(capsys, "scores", "--data", simulated / "data.csv", "--model", tmp_path / "model.json",
                     "--labels", simulated / "labels.txt", "--out", tmp_path / "scores.csv")
    assert code == 0
    with open(tmp_path / "scores.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["score1", "score2", "label"]
    assert len(rows) == 101
    g = np.array([[float(v) for v in r[:2]] for r in rows[1:]])
    assert np.max(np.abs(g.T @ g - np.eye(2))) <= 1e-8


def test_scores_zero_loadings_warn(simulated, tmp_path, capsys):
    run(capsys, "fit", "--data", simulated / "data.csv", "--k", 3, "--l", 2, "--starts", 1,
        "--lambda", 1e6, "--out", tmp_path)
    with pytest.warns(RuntimeWarning, match="zero"):
        code, _, _ = run(capsys, "scores", "--data", simulated / "data.csv", "--model",
                         tmp_path / "model.json", "--out", tmp_path / "s.csv")
    assert code == 0


def test_scores_dimension_mismatch(simulated, tmp_path, capsys):
    (tmp_path / "narrow.csv").write_text("0,1\n1,0\n1,1\n")
    code, _, _ = run(capsys, "scores", "--data", tmp_path / "narrow.csv", "--model",
                     simulated / "true_params.json", "--out", tmp_path / "s.csv")
    assert code == 2


def test_eval_values(tmp_path, capsys):
    write_labels([1, 1, 2, 2], tmp_path / "a.txt")
    write_labels([1, 2, 1, 2], tmp_path / "b.txt")
    write_labels([1, 2, 1], tmp_path / "c.txt")
    assert run(capsys, "eval", "--labels-a", tmp_path / "a.txt", "--labels-b", tmp_path / "a.txt")[1] == "1.000000\n"
    assert run(capsys, "eval", "--labels-a", tmp_path / "a.txt", "--labels-b", tmp_path / "b.txt")[1] == "-0.500000\n"
    assert run(capsys, "eval", "--labels-a", tmp_path / "a.txt", "--labels-b", tmp_path / "c.txt")[0] == 2


def test_bench_small(tmp_path, capsys):
    code, text, _ = run(capsys, "bench", "--n", "50", "--d", "10", "--m", "1.0", "--reps", 2, "--starts", 1,
                        "--tune", "fixed", "--lambda", 0.01, "--out", tmp_path / "r.csv")
    assert code == 0
    assert "# n=50 d=10 m=1" in text
    with open(tmp_path / "r.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
