import json
import subprocess
import sys

import pytest

from rmatch.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_match_beta(capsys):
    code, out, _ = run(capsys, "match", "--family", "beta", "--alpha", "29/20", "--p", "1/3")
    assert code == 0
    assert "M=3" in out
    line = [l for l in out.splitlines() if l.startswith("c=(-1/2)+(1/2)*sqrt(5)")][0]
    assert "M=7" in line and "strong" in line and "not strong" not in line


def test_match_markov_point_exits_two(capsys):
    code, out, _ = run(capsys, "match", "--family", "doubling", "--alpha", "6/5")
    assert code == 2
    assert "cycle" in out and "4/5" in out and "2/5" in out


def test_match_three_halves_strict_convention(capsys):
    code, out, _ = run(capsys, "match", "--family", "doubling", "--alpha", "3/2", "--p", "1/2")
    assert code == 2
    assert "cycle" in out


def test_match_seven_fifths_json(capsys):
    code, out, _ = run(capsys, "match", "--alpha", "7/5", "--c", "1/2", "--format", "json")
    assert code == 0
    (cert,) = json.loads(out)
    assert cert["M"] == 3 and cert["Y"] == ["-1/5"] and cert["strong"]


def test_match_cf_default_critical_point(capsys):
    code, out, _ = run(capsys, "match", "--family", "cf", "--alpha", "7/10", "--p", "3/10")
    assert code == 0 and "c=10/17: M=4" in out


def test_decimal_rejected_for_exact_commands(capsys):
    code, _, err = run(capsys, "match", "--alpha", "0.5")
    assert code == 1 and "canonical" in err


def test_bad_subcommand_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1


def test_density_alpha_one(capsys):
    code, out, err = run(capsys, "density", "--alpha", "1", "--p", "1/4")
    assert code == 0
    assert out.splitlines()[1:] == ["-1/1,0/1,3/4,0.75", "0/1,1/1,1/4,0.25"]
    assert "transfer_residual=0" in err


def test_density_plateau(capsys):
    code, out, _ = run(capsys, "density", "--alpha", "3/2", "--p", "1/2")
    assert "-1/2,1/2,2/3," in out


def test_density_residual_line(capsys):
    code, _, err = run(capsys, "density", "--alpha", "7/5", "--p", "1/2")
    assert code == 0 and "transfer_residual=0/1" in err


def test_density_failure_exits_two(capsys):
    code, _, err = run(capsys, "density", "--alpha", "6/5", "--route", "matching", "--depth-cap", "8")
    assert code == 2 and "failed" in err


def test_freq(capsys):
    code, out, _ = run(capsys, "freq", "--alpha", "7/5", "--p", "1/2")
    assert code == 0 and "7/5,1/2,33/70," in out


def test_surface_rows_and_svg(capsys, tmp_path):
    code, out, _ = run(capsys, "surface", "--alphas", "1,7/5,3/2,2", "--ps", "1/4,1/2,3/4")
    rows = [l.split(",") for l in out.splitlines()[1:]]
    assert code == 0 and len(rows) == 12
    for r in rows:
        if r[0] in ("3/2", "2/1"):
            assert r[2] == "1/2"
    assert ["1/1", "1/4", "5/16"] == rows[0][:3]
    code, _, _ = run(capsys, "surface", "--alphas", "1,3/2", "--ps", "1/2", "--format", "svg",
                     "--out", str(tmp_path))
    assert (tmp_path / "surface.svg").read_text().startswith("<svg")


def test_scan_rows(capsys):
    code, out, _ = run(capsys, "scan", "--depth-cap", "6")
    assert code == 0
    assert "3/2,2/1,0,1,matching,1," in out
    assert "5/4,3/2,0,0,matching,2," in out


def test_simulate_deterministic(capsys):
    args = ("simulate", "--alpha", "7/5", "--points", "60", "--iterations", "120",
            "--burn-in", "20", "--seed", "3")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b and a.startswith("left,right,mass,density_estimate,stderr")


def test_simulate_cf_accepts_decimals(capsys):
    code, out, _ = run(capsys, "simulate", "--family", "cf", "--alpha", "0.70315", "--p", "0.3",
                       "--points", "60", "--iterations", "60", "--burn-in", "10", "--format", "svg")
    assert code == 0 and out.count("stroke-dasharray") == 4


def test_config_file(capsys, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"subcommand": "freq", "alpha": "1", "p": "1/3"}))
    code, out, _ = run(capsys, "--config", str(cfg))
    assert code == 0 and "1/1,1/3,5/18," in out
    code, _, err = run(capsys, "--config", str(tmp_path / "missing.json"))
    assert code == 1


def test_custom_family_json(capsys, tmp_path):
    from fractions import Fraction
    from rmatch.sbfamily import make_system
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(make_system(Fraction(7, 5)).to_json()))
    code, out, _ = run(capsys, "match", "--family", str(path))
    assert code == 0 and out.count("M=3") == 4


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("RMATCH_THREADS", "2")
    code, out, _ = run(capsys, "surface", "--alphas", "1,7/5", "--ps", "1/2")
    monkeypatch.setenv("RMATCH_THREADS", "1")
    code2, out2, _ = run(capsys, "surface", "--alphas", "1,7/5", "--ps", "1/2")
    assert code == code2 == 0 and out == out2


def test_out_dir(capsys, tmp_path):
    run(capsys, "density", "--alpha", "7/5", "--out", str(tmp_path))
    assert (tmp_path / "density.csv").read_text().startswith("left,right,value")


def test_console_script():
    proc = subprocess.run([sys.executable, "-m", "rmatch.cli", "freq", "--alpha", "2", "--p", "1/4"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "2/1,1/4,1/2," in proc.stdout
