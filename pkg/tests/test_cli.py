"""End-to-end command runs, in process through main(argv)."""

import json
import os

import pytest

from gwicoal.cli import main

SECOND_MODEL = {"offspring": (0.25, 0.5, 0.25), "immigration": (0.5, 0.25, 0.25)}


def run(*argv):
    return main(list(argv))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_exact_command(tmp_path, capsys):
    out = tmp_path / "o"
    code = run("exact", "--n", "16", "--exact-n", "1", "--out", str(out))
    assert code == 0
    doc = read_json(out / "exact_report.json")
    assert doc["kind"] == "exact"
    assert len(doc["tables"]["survival"]) == 17
    assert doc["tables"]["enumeration"]["pairwise_finite_identity"] == pytest.approx(
        2.0 / 3.0, abs=1e-12
    )
    assert (out / "exact_survival.csv").exists()
    assert (out / "exact_curves.png").exists()
    assert "enumerated" in capsys.readouterr().out


def test_simulate_tiny(tmp_path):
    out = tmp_path / "o"
    code = run(
        "simulate", "--n", "6", "--replicates", "300", "--u", "0.5",
        "--draws", "800", "--seed", "4", "--out", str(out),
    )
    assert code in (0, 1)  # comparisons may fail honestly at this tiny size
    doc = read_json(out / "finite_report.json")
    assert doc["kind"] == "finite_n"
    assert doc["seed"] == 4
    assert doc["config"]["n"] == 6
    names = {t["name"] for t in doc["targets"]}
    assert "pairwise_window_ratio[u=0.5]" in names
    assert "population_ks" in names
    assert (out / "finite_windows.csv").exists()
    for png in ("pairwise_window.png", "oldest_clan.png", "population_law.png"):
        assert (out / png).exists(), png


def test_simulate_no_figures(tmp_path):
    out = tmp_path / "o"
    code = run(
        "simulate", "--n", "4", "--replicates", "150", "--u", "0.5",
        "--draws", "0", "--seed", "1", "--no-figures", "--out", str(out),
    )
    assert code in (0, 1)
    assert (out / "finite_report.json").exists()
    assert not list(out.glob("*.png"))


def test_simulate_population_only(tmp_path):
    out = tmp_path / "o"
    code = run(
        "simulate", "--population-only", "--n", "32", "--replicates", "500",
        "--u", "0.5", "--seed", "2", "--out", str(out),
    )
    assert code in (0, 1)
    doc = read_json(out / "population_report.json")
    assert doc["kind"] == "population"
    assert {t["name"] for t in doc["targets"]} >= {
        "oldest_clan_tail[u=0.5]", "total_coalescence_finite",
        "population_ks", "population_mean",
    }
    # no pairwise columns here, so only the clan and population figures appear
    assert not (out / "pairwise_window.png").exists()
    assert (out / "oldest_clan.png").exists()
    assert (out / "population_law.png").exists()


def test_simulate_baseline(tmp_path):
    out = tmp_path / "o"
    code = run(
        "simulate", "--baseline", "--n", "16", "--replicates", "800",
        "--u", "0.5", "--draws", "600", "--seed", "3", "--out", str(out),
    )
    assert code in (0, 1)
    doc = read_json(out / "plain_report.json")
    assert doc["kind"] == "plain_gw"
    assert {t["name"] for t in doc["targets"]} >= {
        "survival_rate", "total_tail[u=0.5]", "pairwise_window[u=0.5]",
    }
    assert (out / "plain_gw.png").exists()


def test_limit_command(tmp_path):
    out = tmp_path / "o"
    code = run(
        "limit", "--u", "0.25", "--u", "0.75", "--draws", "2000",
        "--seed", "5", "--out", str(out),
    )
    assert code == 0
    doc = read_json(out / "limit_report.json")
    assert doc["kind"] == "limit"
    rows = doc["tables"]["by_u"]
    assert [r["u"] for r in rows] == [0.25, 0.75]
    assert rows[0]["value"] > rows[1]["value"]
    assert rows[0]["tau_limit"] == 0.75
    assert (out / "limit_values.csv").exists()
    assert (out / "limit_window.png").exists()


def test_compare_happy_path(tmp_path):
    out = tmp_path / "o"
    assert run(
        "simulate", "--n", "64", "--replicates", "2000", "--u", "0.5",
        "--draws", "0", "--seed", "6", "--no-figures", "--out", str(out),
    ) in (0, 1)
    assert run(
        "limit", "--u", "0.5", "--draws", "30000", "--seed", "6",
        "--no-figures", "--out", str(out),
    ) == 0
    code = run(
        "compare", "--report", str(out / "finite_report.json"),
        "--limits", str(out / "limit_report.json"), "--out", str(out),
    )
    doc = read_json(out / "compare_report.json")
    assert doc["kind"] == "compare"
    verdicts = [r["verdict"] for r in doc["rows"]]
    assert code == (0 if all(v == "PASS" for v in verdicts) else 1)
    assert (out / "compare_windows.csv").exists()
    assert (out / "compare.png").exists()


def test_compare_rejects_model_mismatch(tmp_path):
    out = tmp_path / "o"
    assert run(
        "simulate", "--n", "8", "--replicates", "200", "--u", "0.5",
        "--draws", "0", "--seed", "7", "--no-figures", "--out", str(out),
    ) in (0, 1)
    other = tmp_path / "cfg.json"
    other.write_text(json.dumps({k: list(v) for k, v in SECOND_MODEL.items()}))
    assert run(
        "limit", "--config", str(other), "--u", "0.5", "--draws", "500",
        "--seed", "7", "--no-figures", "--out", str(out),
    ) == 0
    code = run(
        "compare", "--report", str(out / "finite_report.json"),
        "--limits", str(out / "limit_report.json"),
    )
    assert code == 2


def test_compare_rejects_malformed_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "finite_n", "params_hash": "x"}))
    good_enough = tmp_path / "lim.json"
    good_enough.write_text(json.dumps(
        {"kind": "limit", "params_hash": "x", "tables": {"by_u": []}}
    ))
    assert run("compare", "--report", str(bad), "--limits", str(good_enough)) == 2
    assert run("compare", "--report", str(tmp_path / "nope.json"),
               "--limits", str(good_enough)) == 2


def test_sweep_command(tmp_path):
    out = tmp_path / "o"
    code = run(
        "sweep", "--n-grid", "8", "16", "--u", "0.5", "--replicates", "400",
        "--seed", "8", "--out", str(out),
    )
    assert code in (0, 1)
    doc = read_json(out / "sweep_report.json")
    assert doc["kind"] == "sweep"
    assert [r["n"] for r in doc["tables"]["by_n"]] == [8, 16]
    assert (out / "sweep_by_n.csv").exists()
    assert (out / "total_coalescence.png").exists()


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"replicas": 500}))
    assert run("simulate", "--config", str(cfg), "--no-figures",
               "--out", str(tmp_path)) == 2


def test_too_few_replicates(tmp_path):
    assert run("simulate", "--n", "4", "--replicates", "10", "--u", "0.5",
               "--no-figures", "--out", str(tmp_path)) == 2


def test_bad_model_in_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"offspring": [0.3, 0.2, 0.5]}))  # mean 1.2
    assert run("simulate", "--config", str(cfg), "--n", "4",
               "--replicates", "150", "--no-figures", "--out", str(tmp_path)) == 2


def test_particle_cap_exhaustion(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"particle_cap": 1}))
    code = run(
        "simulate", "--config", str(cfg), "--n", "8", "--replicates", "150",
        "--u", "0.5", "--draws", "0", "--seed", "0", "--no-figures",
        "--out", str(tmp_path),
    )
    assert code == 3


def test_seed_sources(tmp_path, monkeypatch):
    out = tmp_path / "o"
    monkeypatch.setenv("GWICOAL_SEED", "123")
    assert run("simulate", "--n", "4", "--replicates", "150", "--u", "0.5",
               "--draws", "0", "--no-figures", "--out", str(out)) in (0, 1)
    assert read_json(out / "finite_report.json")["seed"] == 123

    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 5}))
    assert run("simulate", "--config", str(cfg), "--n", "4", "--replicates",
               "150", "--u", "0.5", "--draws", "0", "--no-figures",
               "--out", str(out)) in (0, 1)
    assert read_json(out / "finite_report.json")["seed"] == 5  # file beats env

    assert run("simulate", "--config", str(cfg), "--seed", "9", "--n", "4",
               "--replicates", "150", "--u", "0.5", "--draws", "0",
               "--no-figures", "--out", str(out)) in (0, 1)
    assert read_json(out / "finite_report.json")["seed"] == 9  # flag beats file


def test_reports_are_byte_identical_across_runs(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert run("simulate", "--n", "6", "--replicates", "200", "--u", "0.5",
                   "--draws", "400", "--seed", "11", "--no-figures",
                   "--out", str(out)) in (0, 1)
    assert (out_a / "finite_report.json").read_bytes() == (
        out_b / "finite_report.json"
    ).read_bytes()
    assert (out_a / "finite_windows.csv").read_bytes() == (
        out_b / "finite_windows.csv"
    ).read_bytes()
