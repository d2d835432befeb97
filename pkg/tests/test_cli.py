import csv
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from fock_lab import __version__
from fock_lab.cli import main, parse_complex
from fock_lab.products import ProductForm, eval_log_product_many
from fock_lab.sequences import PerturbationSpec


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_report(out):
    with open(os.path.join(out, "report.json")) as fh:
        return json.load(fh)


def test_parse_complex():
    assert parse_complex("1+1i") == 1 + 1j
    assert parse_complex("2-i") == 2 - 1j
    assert parse_complex("i") == 1j
    assert parse_complex("-3.5") == -3.5
    with pytest.raises(ValueError):
        parse_complex("abc")


def test_gen_small_lattice(tmp_path):
    out = str(tmp_path)
    assert main(["gen", "--family", "lattice", "--nu", "1", "--window", "1.5", "--out", out]) == 0
    rows = read_csv(os.path.join(out, "points.csv"))
    assert len(rows) == 8
    assert list(rows[0]) == ["index_m", "index_n", "re", "im", "delta", "theta"]
    assert all(complex(float(r["re"]), float(r["im"])) != 0 for r in rows)
    rep = read_report(out)
    assert rep["version"] == __version__
    assert rep["config"]["window"] == 1.5
    assert rep["summary"]["points"] == 8


def test_gen_axis_columns(tmp_path):
    assert main(["gen", "--family", "als", "--perturbation", "als_beta", "--beta", "0.5",
                 "--window", "4", "--out", str(tmp_path)]) == 0
    rows = read_csv(os.path.join(tmp_path, "points.csv"))
    assert list(rows[0])[:3] == ["axis", "sign", "n"]


def test_gen_eval_round_trip_is_bit_exact(tmp_path):
    g, e = str(tmp_path / "g"), str(tmp_path / "e")
    assert main(["gen", "--family", "als", "--perturbation", "als_beta", "--beta", "0.25",
                 "--window", "6", "--out", g]) == 0
    # evaluate at points slightly off the zeros, written with 17 digits
    pts = read_csv(os.path.join(g, "points.csv"))
    z = np.array([complex(float(r["re"]), float(r["im"])) for r in pts]) * (1 + 1e-3j) + 0.05
    with open(tmp_path / "z.csv", "w") as fh:
        fh.write("re,im\n" + "".join("%.17g,%.17g\n" % (c.real, c.imag) for c in z))
    assert main(["eval", "--form", "als", "--perturbation", "als_beta", "--beta", "0.25",
                 "--points", str(tmp_path / "z.csv"), "--out", e]) == 0
    rows = read_csv(os.path.join(e, "eval.csv"))
    lm, ph, tb, _ = eval_log_product_many(ProductForm.als(PerturbationSpec.als_beta(0.25)), z)
    for k, r in enumerate(rows):
        assert complex(float(r["re"]), float(r["im"])) == z[k]
        assert float(r["log_mod"]) == lm[k]
        assert float(r["phase"]) == ph[k]
        assert float(r["tail_bound"]) == tb[k]


def test_eval_gen_points_are_zeros(tmp_path):
    g, e = str(tmp_path / "g"), str(tmp_path / "e")
    main(["gen", "--family", "lattice", "--nu", "0.5", "--strip-height", "2", "--perturbation", "strip_beta",
          "--beta", "0.3", "--window", "4", "--out", g])
    assert main(["eval", "--form", "strip_genus2", "--nu", "0.5", "--strip-height", "2", "--perturbation",
                 "strip_beta", "--beta", "0.3", "--points", os.path.join(g, "points.csv"), "--out", e]) == 0
    rows = read_csv(os.path.join(e, "eval.csv"))
    assert all(r["log_mod"] == "-inf" and float(r["dist_perturbed"]) == 0 for r in rows)


def test_outputs_are_deterministic(tmp_path):
    args = ["eval", "--form", "als", "--z", "1+1i,2.5,-3i,0.3+4i"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "eval.csv").read_bytes() == (tmp_path / "b" / "eval.csv").read_bytes()
    ra, rb = read_report(str(tmp_path / "a")), read_report(str(tmp_path / "b"))
    ra["config"].pop("out"), rb["config"].pop("out")
    assert ra == rb


def test_report_lists_tolerances(tmp_path):
    main(["eval", "--form", "als", "--z", "1+1i", "--rel-tol", "1e-9", "--out", str(tmp_path)])
    rep = read_report(str(tmp_path))
    assert rep["tolerances"] == {"rel_tol": 1e-9}
    assert rep["command"] == "eval"
    assert rep["files"] == ["eval.csv"]


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "density", "perturbation": "als_beta", "beta": 0.5,
                               "cutoffs": [10, 100, 1000]}))
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = read_report(str(tmp_path))
    assert rep["config"]["beta"] == 0.5
    assert len(read_csv(os.path.join(tmp_path, "density.csv"))) == 3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "gen", "no_such_key": 1}))
    assert main(["--config", str(bad)]) == 2


def test_exit_codes(tmp_path, capsys):
    assert main(["bogus"]) == 2
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err
    # validation error: perturbation incompatible with the family
    assert main(["eval", "--form", "als", "--z", "1", "--perturbation", "full_beta", "--beta", "0.2",
                 "--out", str(tmp_path)]) == 2
    assert main(["eval", "--form", "als", "--out", str(tmp_path)]) == 2
    # numeric resource cap
    assert main(["eval", "--form", "full_plane_genus2", "--nu", "0.5", "--perturbation", "full_beta",
                 "--beta", "0.2", "--z", "30+30i", "--out", str(tmp_path)]) == 3


def test_check_bargmann(tmp_path):
    assert main(["check-bargmann", "--z", "1+1i", "--out", str(tmp_path)]) == 0
    rep = read_report(str(tmp_path))
    assert rep["summary"]["max_residual"] <= 1e-6
    assert rep["tolerances"]["T"] == 8.0


def test_estimate_and_optimality(tmp_path):
    assert main(["estimate", "--form", "als", "--perturbation", "als_beta", "--beta", "0.5",
                 "--count", "120", "--out", str(tmp_path / "s")]) == 0
    rep = read_report(str(tmp_path / "s"))
    assert rep["summary"]["fitted_exponent"] == pytest.approx(-1.0, abs=0.1)
    rows = read_csv(os.path.join(tmp_path / "s", "sweep.csv"))
    assert list(rows[0]) == ["beta", "r", "log_ratio"]
    assert main(["optimality", "--s", "0.7", "--out", str(tmp_path / "o")]) == 0
    assert abs(read_report(str(tmp_path / "o"))["summary"]["p"] - 0.3) <= 0.05


def test_membership_closed_form(tmp_path):
    assert main(["membership", "--closed-form", "--weight-beta", "0.75", "--radii", "5,10,20",
                 "--out", str(tmp_path)]) == 0
    rows = read_csv(os.path.join(tmp_path, "membership.csv"))
    vals = [float(r["I"]) for r in rows]
    assert vals == sorted(vals)


def test_transition_three_verdicts(tmp_path, monkeypatch):
    monkeypatch.setenv("FOCK_LAB_THREADS", "3")
    assert main(["transition", "--family", "als", "--beta=-0.3,0,0.5", "--radii", "10,20,40",
                 "--out", str(tmp_path)]) == 0
    rows = read_csv(os.path.join(tmp_path, "transition.csv"))
    assert [r["verdict"] for r in rows] == ["NotMinimal-consistent", "MinimalAndComplete-consistent",
                                            "NotComplete-consistent"]
    assert read_report(str(tmp_path))["summary"]["threads"] == 3


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("FOCK_LAB_THREADS", "zero")
    assert main(["transition", "--beta", "0.5", "--radii", "5,10", "--out", str(tmp_path)]) == 2


def test_console_script_runs(tmp_path):
    res = subprocess.run([sys.executable, "-m", "fock_lab.cli", "gen", "--family", "lattice", "--nu", "1",
                          "--window", "1.5", "--out", str(tmp_path)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "points.csv").exists()
    assert not any(p.name.startswith(".tmp-") for p in tmp_path.iterdir())
