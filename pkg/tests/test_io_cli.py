import json

import numpy as np
import pytest

from mscs.cli import main
from mscs.errors import InvalidData
from mscs.io import read_csv_rows, read_dataset_csv, write_csv, write_dataset_csv, write_json
from mscs.likelihood import Dataset
from mscs.model_space import ModelIndex, ModelSpace
from mscs.simulate import ScenarioSpec, gen_dataset


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:
        return exc.code


@pytest.fixture
def strong_csv(tmp_path, rng):
    data = Dataset("normal-location", rng.normal(size=(400, 4)) + [5, 5, 0, 0])
    path = tmp_path / "strong.csv"
    write_dataset_csv(path, data)
    return path


@pytest.fixture
def logistic_csv(tmp_path):
    data, _ = gen_dataset(ScenarioSpec(3, "sampler", n=150, p=8, seed=21), 0)
    path = tmp_path / "logit.csv"
    write_dataset_csv(path, data)
    return path


# -- io ------------------------------------------------------------------------


def test_dataset_csv_roundtrip(tmp_path, rng):
    for data in (
        Dataset("normal-location", rng.normal(size=(7, 3))),
        Dataset("poisson", rng.poisson(2.0, 9), rng.normal(size=(9, 2))),
        Dataset("ising", rng.integers(0, 2, size=(6, 4))),
    ):
        path = tmp_path / f"{data.family.value}.csv"
        write_dataset_csv(path, data)
        back = read_dataset_csv(path, data.family)
        np.testing.assert_array_equal(back.y, data.y)
        if data.x is not None:
            np.testing.assert_array_equal(back.x, data.x)


@pytest.mark.parametrize(
    "text, msg",
    [
        ("", "no observations"),
        ("y1,y2\n", "no observations"),
        ("a,b\n1,2\n", "response"),
        ("y1,y2\n1,oops\n", "non-numeric"),
        ("y,x1\n1\n", "different lengths"),
    ],
)
def test_bad_csv(tmp_path, text, msg):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InvalidData, match=msg):
        read_dataset_csv(path, "normal-location" if "y1" in text or not text else "poisson")


def test_provenance_headers(tmp_path):
    write_json(tmp_path / "a.json", {"x": float("inf"), "v": np.arange(2)}, {"alpha": 0.05})
    payload = json.loads((tmp_path / "a.json").read_text())
    assert payload["meta"]["tool"] == "mscs" and payload["meta"]["config"] == {"alpha": 0.05}
    assert payload["x"] == "inf" and payload["v"] == [0, 1]
    write_csv(tmp_path / "b.csv", [{"a": 0.1, "b": 2}], {"k": 1})
    first = (tmp_path / "b.csv").read_text().splitlines()[0]
    assert first.startswith("# ") and json.loads(first[2:])["config"] == {"k": 1}
    assert read_csv_rows(tmp_path / "b.csv") == [{"a": "0.1", "b": "2"}]


# -- exhaustive ------------------------------------------------------------------


def test_exhaustive_strong_signal(tmp_path, strong_csv, capsys):
    out = tmp_path / "ex"
    code = run(["exhaustive", strong_csv, "--family", "normal-location", "--alpha", 0.05,
                "--out-dir", out, "--workers", 1])
    assert code == 0
    survivors = {ModelIndex.parse(r["model"], "subset") for r in read_csv_rows(out / "survivors.csv")}
    expected = {m for m in ModelSpace.subsets(4).enumerate() if {1, 2} <= set(m.items)}
    assert survivors == expected
    payload = json.loads((out / "mscs.json").read_text())
    assert payload["cardinality"] == 4 and payload["meta"]["config"]["alpha"] == 0.05
    ii = {r["feature"]: float(r["ii"]) for r in read_csv_rows(out / "importance.csv")}
    assert ii == {"1": 1.0, "2": 1.0, "3": 0.5, "4": 0.5}
    assert "4 of 16" in capsys.readouterr().out


def test_exhaustive_bootstrap_columns(tmp_path, strong_csv):
    out = tmp_path / "bs"
    code = run(["exhaustive", strong_csv, "--family", "normal-location", "--bootstrap", 3,
                "--out-dir", out, "--workers", 1])
    assert code == 0
    rows = read_csv_rows(out / "importance.csv")
    assert all(r["ci_lo"] != "" for r in rows)


def test_exhaustive_partition_space(tmp_path, rng):
    path = tmp_path / "cov.csv"
    write_dataset_csv(path, Dataset("normal-block-cov", rng.normal(size=(40, 3))))
    out = tmp_path / "cov"
    assert run(["exhaustive", path, "--family", "normal-block-cov", "--out-dir", out]) == 0
    rows = read_csv_rows(out / "importance.csv")
    assert [r["feature"] for r in rows] == ["1-2", "1-3", "2-3"]


def test_exhaustive_bad_alpha(strong_csv, capsys):
    assert run(["exhaustive", strong_csv, "--family", "normal-location", "--alpha", 1.5]) == 64
    assert "alpha" in capsys.readouterr().err


def test_exhaustive_empty_csv(tmp_path, capsys):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert run(["exhaustive", path, "--family", "normal-location", "--out-dir", tmp_path]) == 1
    assert "no observations" in capsys.readouterr().err


def test_exhaustive_missing_file(tmp_path):
    assert run(["exhaustive", tmp_path / "nope.csv", "--family", "normal-location"]) == 1


def test_forced_on_partition_space_is_usage_error(tmp_path, rng):
    path = tmp_path / "cov.csv"
    write_dataset_csv(path, Dataset("normal-block-cov", rng.normal(size=(40, 3))))
    assert run(["exhaustive", path, "--family", "normal-block-cov", "--forced", "1"]) == 64


def test_numeric_failure_exit_code(tmp_path, rng):
    path = tmp_path / "sing.csv"
    write_dataset_csv(path, Dataset("normal-block-cov", rng.normal(size=(2, 3))))
    assert run(["exhaustive", path, "--family", "normal-block-cov", "--out-dir", tmp_path]) == 2


# -- sample -----------------------------------------------------------------------

SAMPLE_ARGS = ["--family", "logistic", "--B", 60, "--fixed-iters", 6, "--final-draw", 2000,
               "--seed", 5, "--workers", 1]


def test_sample_trajectory_is_bit_identical(tmp_path, logistic_csv, capsys):
    out = tmp_path / "s"
    assert run(["sample", logistic_csv, *SAMPLE_ARGS, "--out-dir", out]) == 0
    first = (out / "trajectory.csv").read_bytes()
    result = json.loads((out / "as_result.json").read_text())
    assert run(["sample", logistic_csv, *SAMPLE_ARGS, "--out-dir", out]) == 0
    assert (out / "trajectory.csv").read_bytes() == first
    assert "hit_rate=" in capsys.readouterr().out
    assert 0 <= result["hit_rate"] <= 1
    assert len(read_csv_rows(out / "trajectory.csv")) == 6


def test_sample_members_reverify(tmp_path, logistic_csv):
    out = tmp_path / "s"
    assert run(["sample", logistic_csv, *SAMPLE_ARGS, "--out-dir", out]) == 0
    members = {ModelIndex.parse(r["model"], "subset")
               for r in json.loads((out / "as_result.json").read_text())["members"]}
    ex = tmp_path / "ex"
    assert run(["exhaustive", logistic_csv, "--family", "logistic", "--out-dir", ex,
                "--workers", 1]) == 0
    exhaustive = {ModelIndex.parse(r["model"], "subset") for r in read_csv_rows(ex / "survivors.csv")}
    assert members and members <= exhaustive


@pytest.mark.parametrize("bad", [["--zeta", 0], ["--zeta", 1], ["--xi", 0], ["--clamp-lo", 0]])
def test_sample_usage_errors(logistic_csv, bad):
    assert run(["sample", logistic_csv, "--family", "logistic", *bad]) == 64


def test_sample_needs_p_below_n(tmp_path, rng):
    path = tmp_path / "wide.csv"
    write_dataset_csv(path, Dataset("poisson", rng.poisson(1.0, 5), rng.normal(size=(5, 6))))
    assert run(["sample", path, "--family", "poisson", "--out-dir", tmp_path]) == 1


def test_sample_nonconvergence_exit(tmp_path, logistic_csv):
    out = tmp_path / "nc"
    code = run(["sample", logistic_csv, "--family", "logistic", "--B", 40, "--max-iters", 2,
                "--final-draw", 200, "--out-dir", out, "--workers", 1])
    assert code == 3
    assert json.loads((out / "as_result.json").read_text())["converged"] is False


# -- simulate ---------------------------------------------------------------------


def test_simulate_single_run(tmp_path):
    out = tmp_path / "sim"
    code = run(["simulate", "--model", 1, "--setting", 1, "--n", 100, "--p", 4, "--runs", 1,
                "--seed", 7, "--out-dir", out, "--workers", 1])
    assert code == 0
    payload = json.loads((out / "summary.json").read_text())
    assert all(c in (0.0, 1.0) for c in payload["coverage"])
    assert payload["completed"] == 1
    assert len(read_csv_rows(out / "summary.csv")) == 6


def test_simulate_with_null_bound(tmp_path):
    out = tmp_path / "sim"
    code = run(["simulate", "--model", 1, "--p", 4, "--runs", 5, "--ii-delta", 0.1667,
                "--out-dir", out, "--workers", 1])
    assert code == 0
    rows = json.loads((out / "summary.json").read_text())["ii_null_bound"]
    assert [r["feature"] for r in rows] == ["3", "4"]


@pytest.mark.parametrize(
    "bad",
    [["--model", 5], ["--model", 1, "--p", 7], ["--model", 2, "--setting", "sampler"],
     ["--model", 1, "--alphas", "0.05,1.5"]],
)
def test_simulate_usage_errors(tmp_path, bad):
    assert run(["simulate", *bad, "--runs", 1, "--out-dir", tmp_path]) == 64


def test_version(capsys):
    assert run(["--version"]) == 0
    assert capsys.readouterr().out.startswith("mscs ")
