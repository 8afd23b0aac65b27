import gzip

import pytest

from mbf import cli
from mbf.errors import InvalidParameterError
from mbf.experiments import COLUMNS, ExperimentSpec, read_csv, recompute_theory, run, write_csv


def small(exp, **params):
    return ExperimentSpec(exp, params, seed=0, trials=2)


SMALL = {
    "fpr-generic": dict(n=200, k=[1, 4], queries=500),
    "fpr-mam": dict(n1=32, n2=64, ratio=[1.0], k=[4], proportion=[0.5, 1.0], queries=500),
    "load-factor": dict(n1=32, n2=64, ratio=[0.5], k=[6], proportion=[0.2, 1.0]),
    "fpr-jmatrix": dict(n2=36, j=[1, 2], k=[2], queries=500),
    "batch-compare": dict(n1=30, values_per_key=[1, 3], proportion=[0.0, 1.0], queries=300),
    "double-side": dict(n1=30, n2=[10], queries=300),
    "multiset": dict(sets=4, set_size=10, k=2, k1=1),
}


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("nope")
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("fpr-generic", {"bogus": 1})
    with pytest.raises(InvalidParameterError):
        ExperimentSpec("fpr-generic", trials=0)
    assert ExperimentSpec("fpr-mam").trials == 50
    assert ExperimentSpec("fpr-generic", full_size=True).resolved()["queries"] == 100_000


@pytest.mark.parametrize("exp", sorted(SMALL))
def test_runs_are_reproducible_and_theory_recomputes(exp, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(ExperimentSpec(exp, SMALL[exp], seed=3, trials=2, out=str(a)))
    run(ExperimentSpec(exp, SMALL[exp], seed=3, trials=2, out=str(b)))
    assert a.read_bytes() == b.read_bytes()
    rows = read_csv(a)
    assert rows and list(rows[0]) == COLUMNS
    for row in rows:
        expect = recompute_theory(row)
        if expect is not None:
            assert float(row["theory"]) == pytest.approx(expect, rel=1e-12)


def test_single_hash_generic_theory_is_about_one_half():
    rows = run(small("fpr-generic", n=300, k=[1], queries=2000))
    assert rows[0].theory == pytest.approx(0.5, rel=0.02)
    assert rows[0].empirical == pytest.approx(0.5, abs=0.05)


def test_indivisible_split_gives_a_skipped_row():
    rows = run(small("fpr-generic", n=100, k=[3, 4], k1=2, queries=100))
    assert rows[0].status == "skipped" and rows[0].k == 3
    assert {r.variant for r in rows[1:]} == {"matrix", "standard"}


def test_batch_compare_matrix_cost_is_constant():
    rows = run(small("batch-compare", **SMALL["batch-compare"]))
    assert {r.empirical for r in rows if r.variant == "matrix"} == {4.0}
    assert all(r.empirical <= 4 for r in rows if r.variant == "matrix-short-circuit")


def test_write_csv_to_stream(capsys):
    import sys

    write_csv(run(small("multiset", **SMALL["multiset"])), sys.stdout)
    out = capsys.readouterr().out.splitlines()
    assert out[0].split(",") == COLUMNS and len(out) == 5


def test_cli_run_to_file(tmp_path):
    out = tmp_path / "r.csv"
    rc = cli.main(["run", "fpr-generic", "--n", "100", "--k", "2,4", "--trials", "2",
                   "--param", "queries=200", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out)
    assert {r["k"] for r in rows} == {"2", "4"}


def test_cli_k_maps_to_split_where_needed(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["run", "double-side", "--n1", "20", "--n2", "5,10", "--k", "6",
                     "--param", "queries=100", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert {(r["k1"], r["k2"]) for r in rows} == {("2", "3")}
    assert {r["n2"] for r in rows} == {"5", "10"}


def test_cli_stdout(capsys):
    assert cli.main(["run", "multiset", "--param", "sets=3", "--param", "set_size=5", "--k", "2",
                     "--param", "k1=1", "--trials", "2"]) == 0
    assert capsys.readouterr().out.startswith("experiment,")


def test_cli_missing_dataset(tmp_path, capsys):
    rc = cli.main(["run", "batch-compare", "--dataset", str(tmp_path / "docword.kos.txt.gz")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "not found" in err and "fetch-data" in err


def test_cli_bad_parameters(capsys):
    assert cli.main(["run", "fpr-generic", "--param", "oops"]) == 2
    assert cli.main(["run", "fpr-generic", "--param", "bogus=1"]) == 2
    assert cli.main(["run", "fpr-generic", "--trials", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_cli_dataset_file(tmp_path):
    path = tmp_path / "docword.tiny.txt.gz"
    with gzip.open(path, "wt") as fh:
        fh.write("3\n4\n6\n1 1 1\n1 2 1\n2 2 1\n2 3 1\n3 1 1\n3 4 1\n")
    out = tmp_path / "b.csv"
    assert cli.main(["run", "batch-compare", "--dataset", str(path), "--proportion", "0.5",
                     "--param", "queries=50", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert {r["variant"] for r in rows} == {"matrix", "matrix-short-circuit", "hashmap"}
    assert all(r["n"] == "6" for r in rows)


def test_cli_fetch(tmp_path, monkeypatch, capsys):
    src = tmp_path / "src.gz"
    src.write_bytes(gzip.compress(b"1\n1\n1\n1 1 1\n"))
    import mbf.datasets as ds

    monkeypatch.setattr(ds, "UCI_BASE", src.parent.as_uri() + "/")
    monkeypatch.setitem(ds.DOCWORD_FILES, "nips", "src.gz")
    assert cli.main(["fetch-data", "nips", "--out", str(tmp_path / "d")]) == 0
    assert capsys.readouterr().out.strip().endswith("src.gz")
    assert len((tmp_path / "d" / "src.gz.sha256").read_text().split()[0]) == 64


def test_cli_verify_passes_pytest_flags(capfd):
    assert cli.main(["verify", "-k", "c07"]) == 0
    assert "CRITERION 7 PASS" in capfd.readouterr().out
