"""Command-line front end: config merging, CSV output, exit codes."""

import csv
import io
import json

import pytest

from coopbeam import cli, simulation


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _run(argv):
    return cli.main(argv)


def test_validate_passes_on_defaults(capsys):
    assert _run(["validate"]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out
    assert "FAIL" not in out


def test_theory_table_grid(tmp_path):
    out = tmp_path / "table.csv"
    assert _run(["theory-table", "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 25
    by_point = {(float(r["k_s"]), float(r["c_sigma"])): r for r in rows}
    flat = by_point[(0.0, 2.0)]
    assert float(flat["closed_form"]) == pytest.approx(2.0, abs=1e-12)
    assert float(flat["abs_residual"]) < 1e-6
    assert all(float(r["abs_residual"]) < 1e-3 for r in rows)


def test_smallcell_sweep_schema_and_rows(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = _run(
        [
            "smallcell-sweep",
            "--trials", "4",
            "--seed", "9",
            "--set", "sweep.values=[15.0, 25.0]",
            "--out", str(out),
        ]
    )
    assert rc == 0
    with open(out) as fh:
        header = fh.readline().strip().split(",")
    assert header == cli.CSV_COLUMNS
    rows = _rows(out)
    assert len(rows) == 2
    assert [r["sweep_value"] for r in rows] == ["15.0", "25.0"]
    assert all(r["subcommand"] == "smallcell-sweep" for r in rows)
    assert all(r["sweep_param"] == "micro_cell_radius_m" for r in rows)
    assert all(float(r["avg_se_sim"]) > 0 for r in rows)
    # the config echo is json and can rebuild the cell
    cfg = json.loads(rows[0]["config"])
    assert cfg["scenario"]["micro_cell_radius_m"] == 15.0
    assert cfg["n_trials"] == 4


def test_compare_arch_covers_both_kinds(tmp_path):
    out = tmp_path / "arch.csv"
    rc = _run(
        [
            "compare-arch",
            "--trials", "2",
            "--seed", "3",
            "--set", "sweep.values=[0.0, 10.0]",
            "--out", str(out),
        ]
    )
    assert rc == 0
    rows = _rows(out)
    assert [r["scenario_kind"] for r in rows] == ["small_cell", "cell_free"] * 2
    assert {r["k_db"] for r in rows} == {"0.0", "10.0"}
    # the matched comparison must drive both kinds with the same user model
    for r in rows:
        assert json.loads(r["config"])["scenario"]["co_angle_interferer"] is False


def test_ber_subcommand_fills_ber_column(tmp_path):
    out = tmp_path / "ber.csv"
    rc = _run(
        [
            "ber",
            "--trials", "3",
            "--seed", "1",
            "--set", "sweep.values=[10.0]",
            "--out", str(out),
        ]
    )
    assert rc == 0
    rows = _rows(out)
    assert len(rows) == 2
    assert all(r["ber"] != "" for r in rows)
    assert all(0.0 <= float(r["ber"]) <= 1.0 for r in rows)


def test_precoder_compare_lists_every_kind(tmp_path):
    out = tmp_path / "pre.csv"
    rc = _run(
        [
            "precoder-compare",
            "--trials", "2",
            "--seed", "2",
            "--set", "sweep.values=[0.0]",
            "--out", str(out),
        ]
    )
    assert rc == 0
    rows = _rows(out)
    assert [r["precoder"] for r in rows] == ["zfp", "zfp-d", "mpdr"]


def test_same_seed_is_byte_identical(tmp_path):
    args = [
        "cellfree-sweep",
        "--trials", "3",
        "--seed", "12",
        "--set", "sweep.values=[4, 6]",
        "--no-runtime-col",
    ]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(args + ["--out", str(a)]) == 0
    assert _run(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "runtime_s" not in a.read_text()


def test_seed_changes_results(tmp_path):
    base = ["smallcell-sweep", "--trials", "3", "--set", "sweep.values=[20.0]"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(base + ["--seed", "1", "--out", str(a)]) == 0
    assert _run(base + ["--seed", "2", "--out", str(b)]) == 0
    assert _rows(a)[0]["avg_se_sim"] != _rows(b)[0]["avg_se_sim"]


def test_config_file_merges_with_defaults(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"scenario": {"nu": 3}, "n_trials": 2, "seed": 4}))
    out = tmp_path / "out.csv"
    rc = _run(["smallcell-sweep", "--config", str(cfg),
               "--set", "sweep.values=[20.0]", "--out", str(out)])
    assert rc == 0
    row = _rows(out)[0]
    echo = json.loads(row["config"])
    assert echo["scenario"]["nu"] == 3
    assert row["n_trials"] == "2"


def test_config_errors_exit_one(tmp_path, capsys):
    assert _run(["smallcell-sweep", "--config", str(tmp_path / "missing.json")]) == 1
    assert "config error" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    assert _run(["smallcell-sweep", "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "bad.json:1:" in err  # line-anchored message

    assert _run(["smallcell-sweep", "--set", "scenario.warp_factor=9"]) == 1
    assert "warp_factor" in capsys.readouterr().err

    assert _run(["smallcell-sweep", "--set", "sweep.param=\"not_a_field\"",
                 "--set", "sweep.values=[1]"]) == 1
    assert _run(["smallcell-sweep", "--trials", "0"]) == 1
    assert _run(["smallcell-sweep", "--seed", "-1"]) == 1
    assert _run(["smallcell-sweep", "--set", "precoders=[\"psychic\"]"]) == 1


def test_runtime_failures_exit_two(tmp_path, capsys, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("disk on fire")

    monkeypatch.setattr(simulation, "run_se_trials", boom)
    rc = _run(["smallcell-sweep", "--trials", "2", "--set", "sweep.values=[20.0]",
               "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "runtime failure" in capsys.readouterr().err


def test_infeasible_cells_keep_the_run_alive(tmp_path):
    out = tmp_path / "mixed.csv"
    rc = _run(
        [
            "smallcell-sweep",
            "--trials", "2",
            "--set", "scenario.aa_rows=2",
            "--set", "scenario.aa_cols=2",
            "--set", "scenario.co_angle_interferer=false",
            "--set", "sweep.values=[15.0, 35.0]",
            "--out", str(out),
        ]
    )
    assert rc == 0
    rows = _rows(out)
    assert len(rows) == 2
    assert rows[0]["error"] != ""  # 2x2 array cannot null the dense cell's users
    assert rows[0]["avg_se_sim"] == ""


def test_stdout_when_no_out_path(capsys):
    rc = _run(["smallcell-sweep", "--trials", "2", "--seed", "5",
               "--set", "sweep.values=[20.0]", "--no-runtime-col"])
    assert rc == 0
    out = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    assert rows[0]["seed"] != ""
