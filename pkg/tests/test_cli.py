import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml

from nmflow.channels import GeneralizedAmplitudeDamping, gad_g_closed_form
from nmflow.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, cmd_selftest, fmt, main, parse_panels, selftest_rows
from nmflow.config import CSV_COLUMNS

QUICK_SEARCH = {"bloch_grid": [3, 5, 4], "n_seeds": 1, "refine_maxiter": 40, "blp_grid": [6, 4], "blp_random_pairs": 50}


def write_config(tmp_path, name="s.yaml", **data):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def ad_config(tmp_path, lam, t_max, **extra):
    return write_config(tmp_path, channel="ad", ad={"gamma0": 1.0, "lam": lam}, grid={"t_max": t_max, "dt": 0.01}, **extra)


def gad_config(tmp_path, t_max=3.0, **extra):
    return write_config(tmp_path, channel="gad", gad={"omega": 5.0}, grid={"t_max": t_max, "dt": 0.01}, **extra)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def col(rows, name):
    return np.array([float(r[name]) for r in rows])


# -- formatting


def test_fmt():
    assert fmt(None) == "" and fmt(float("nan")) == "" and fmt(float("inf")) == ""
    assert fmt(-0.0) == "0"
    assert fmt(1 / 3) == "0.333333333333"
    assert fmt(2.0) == "2"


# -- sweep


def test_sweep_ad_markov(tmp_path):
    out = tmp_path / "ad.csv"
    assert main(["sweep", "--config", ad_config(tmp_path, 3.0, 10.0), "--out", str(out)]) == EXIT_OK
    raw = out.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = read_csv(out)
    assert len(rows) == 1001
    assert all(r["r"] == "" for r in rows)
    l_tilde = col(rows, "L_tilde")
    # 12 significant digits leave ~1e-12 of rounding
    assert np.min(np.diff(l_tilde)) >= -1e-11
    assert np.all(np.abs(col(rows, "g")) <= 1e-9)


def test_sweep_ad_nonmarkov_conservation(tmp_path):
    out = tmp_path / "ad.csv"
    assert main(["sweep", "--config", ad_config(tmp_path, 0.1, 50.0), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    total = col(rows, "L_tilde") + col(rows, "I_tilde")
    assert np.max(np.abs(total - 2.0)) <= 1e-9
    # gamma is empty exactly at the poles that are on the grid, if any, and negative somewhere
    gamma = np.array([float(r["gamma"]) for r in rows if r["gamma"] != ""])
    assert gamma.min() < 0


def test_sweep_gad_witness_column(tmp_path):
    out = tmp_path / "gad.csv"
    assert main(["sweep", "--config", gad_config(tmp_path), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert all(r["gamma"] == "" for r in rows)
    t = col(rows, "t")
    closed = gad_g_closed_form(t, GeneralizedAmplitudeDamping(5.0))
    assert np.max(np.abs(col(rows, "g") - closed)) <= 1e-4
    assert np.allclose(col(rows, "p_or_s"), np.cos(5 * t) ** 2, atol=1e-11)
    assert np.allclose(col(rows, "r"), np.exp(-t), atol=1e-11)


def test_sweep_outputs_subset_and_stdout(tmp_path, capsys):
    cfg = gad_config(tmp_path, t_max=0.5, outputs=["L_tilde", "I_tilde"])
    assert main(["sweep", "--config", cfg]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 51
    assert rows[3]["L_tilde"] != "" and rows[3]["I_tilde"] != ""
    assert all(rows[3][c] == "" for c in ("p_or_s", "r", "gamma", "J", "E_SA", "g"))


def test_sweep_is_byte_identical(tmp_path):
    cfg = ad_config(tmp_path, 0.1, 20.0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sweep", "--config", cfg, "--out", str(a)])
    main(["sweep", "--config", cfg, "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_config_errors_exit_1(tmp_path, capsys):
    bad = write_config(tmp_path, channel="ad", ad={"gamma0": 1.0}, grid={"t_max": 1.0, "dt": 0.1})
    assert main(["sweep", "--config", bad]) == EXIT_CONFIG
    assert "ad.lam" in capsys.readouterr().err
    assert main(["measure", "--config", bad]) == EXIT_CONFIG
    good = gad_config(tmp_path, t_max=0.5)
    assert main(["measure", "--config", good, "--which", "foo"]) == EXIT_CONFIG


def test_pole_on_grid_leaves_blank_cells(tmp_path):
    from nmflow.channels import AmplitudeDamping

    pole = float(AmplitudeDamping(1.0, 0.1).poles(10.0)[0])
    dt = pole / 400
    cfg = write_config(
        tmp_path,
        channel="ad",
        ad={"gamma0": 1.0, "lam": 0.1},
        grid={"t_max": 401 * dt, "dt": dt},
        witness={"scheme": "forward"},
    )
    out = tmp_path / "p.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert rows[400]["g"] == "" and rows[400]["gamma"] == ""
    assert rows[399]["g"] != "" and rows[400]["L_tilde"] != ""


def test_per_point_failure_exit_2(tmp_path, capsys, monkeypatch):
    from nmflow.channels import AmplitudeDamping

    original = AmplitudeDamping.kraus

    def broken(self, t):
        ops = np.array(original(self, t))
        if ops.ndim == 4:
            ops[7] *= 1.1  # no longer trace preserving at the eighth grid point
        elif np.isclose(t, 0.07):
            ops = ops * 1.1
        return ops

    monkeypatch.setattr(AmplitudeDamping, "kraus", broken)
    cfg = ad_config(tmp_path, 3.0, 1.0, outputs=["L_tilde"])
    assert main(["sweep", "--config", cfg]) == EXIT_NUMERICAL
    assert "t=0.07" in capsys.readouterr().err


# -- measure


def test_measure_markovian_json(tmp_path):
    out = tmp_path / "m.json"
    cfg = ad_config(tmp_path, 3.0, 10.0, search=QUICK_SEARCH)
    assert main(["measure", "--config", cfg, "--which", "all", "--out", str(out)]) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["time_unit"] == "gamma0*t"
    assert set(report["measures"]) == {"blp", "lfs", "rhp"}
    for m in report["measures"].values():
        assert m["value"] <= 1e-6
        assert m["grid_step"] == pytest.approx(0.01)
        assert m["convergence"]["halved_step"] == pytest.approx(0.005)
        assert "argmax_params" in m and "intervals" in m


def test_measure_nonmarkov_json(tmp_path):
    out = tmp_path / "m.json"
    cfg = ad_config(tmp_path, 0.1, 20.0, search=QUICK_SEARCH)
    assert main(["measure", "--config", cfg, "--which", "lfs,rhp", "--out", str(out)]) == EXIT_OK
    measures = json.loads(out.read_text())["measures"]
    assert list(measures) == ["lfs", "rhp"]
    for m in measures.values():
        assert m["value"] > 1e-3
        assert m["intervals"] and m["onset"] == m["intervals"][0][0]


def test_measure_gad_onsets(tmp_path, capsys):
    cfg = gad_config(tmp_path, search=QUICK_SEARCH)
    assert main(["measure", "--config", cfg, "--which", "lfs,rhp"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["time_unit"] == "t"
    for name in ("lfs", "rhp"):
        m = report["measures"][name]
        assert m["value"] > 0 and m["onset"] is not None


# -- selftest


def test_selftest_passes(capsys):
    assert cmd_selftest() == EXIT_OK
    text = capsys.readouterr().out
    for name in ("kraus_completeness", "conservation", "koashi_winter", "duality", "kraus_vs_integrator", "g_closed_form"):
        assert name in text
    assert "FAIL" not in text


def test_selftest_injected_violation():
    buf = io.StringIO()
    assert cmd_selftest("completeness", stream=buf) == EXIT_NUMERICAL
    assert "FAILED: kraus_completeness" in buf.getvalue()
    rows = dict((name, (res, tol)) for name, res, tol in selftest_rows("completeness"))
    assert rows["kraus_completeness"][0] > rows["kraus_completeness"][1]
    assert rows["conservation"][0] <= rows["conservation"][1]


# -- plotscript


def test_parse_panels():
    assert parse_panels("L,I;J,E;g") == [["L_tilde", "I_tilde"], ["J", "E_SA"], ["g"]]
    assert parse_panels("L, I") == [["L_tilde", "I_tilde"]]


@pytest.fixture
def sweep_csvs(tmp_path):
    ad, gad = tmp_path / "ad.csv", tmp_path / "gad.csv"
    main(["sweep", "--config", ad_config(tmp_path, 0.1, 20.0), "--out", str(ad)])
    main(["sweep", "--config", gad_config(tmp_path, outputs=["L_tilde", "I_tilde", "J", "E_SA"]), "--out", str(gad)])
    return ad, gad


@pytest.mark.parametrize("csv_key, quantities", [("ad", "L,I"), ("ad", "J,E"), ("gad", "L,I;J,E")])
def test_plotscript_runs_headless(sweep_csvs, tmp_path, csv_key, quantities):
    pytest.importorskip("matplotlib")
    src = sweep_csvs[0] if csv_key == "ad" else sweep_csvs[1]
    script = tmp_path / "plot.py"
    assert main(["plotscript", "--csv", str(src), "--quantities", quantities, "--out", str(script)]) == EXIT_OK
    text = script.read_text()
    assert ("AD_INSET = True" in text) == (csv_key == "ad")
    png = tmp_path / "fig.png"
    env = dict(os.environ, MPLBACKEND="Agg")
    subprocess.run([sys.executable, str(script), str(png)], check=True, env=env, capture_output=True)
    assert png.stat().st_size > 0


def test_plotscript_rejects_missing_columns(sweep_csvs, capsys):
    _, gad = sweep_csvs
    assert main(["plotscript", "--csv", str(gad), "--quantities", "L,I;J,E;g"]) == EXIT_CONFIG
    assert "g" in capsys.readouterr().err
    assert main(["plotscript", "--csv", str(gad), "--quantities", "L,bogus"]) == EXIT_CONFIG
    assert main(["plotscript", "--csv", "/nonexistent.csv", "--quantities", "L"]) == EXIT_CONFIG


def test_plotscript_three_panels(tmp_path, capsys):
    src = tmp_path / "gad.csv"
    main(["sweep", "--config", gad_config(tmp_path), "--out", str(src)])
    assert main(["plotscript", "--csv", str(src), "--quantities", "L,I;J,E;g"]) == EXIT_OK
    assert "PANELS = [['L_tilde', 'I_tilde'], ['J', 'E_SA'], ['g']]" in capsys.readouterr().out


# -- entry point


def test_console_entry_point(tmp_path):
    cfg = gad_config(tmp_path, t_max=0.1)
    done = subprocess.run([sys.executable, "-m", "nmflow", "sweep", "--config", cfg], capture_output=True, text=True)
    assert done.returncode == 0
    assert done.stdout.startswith("t,p_or_s,r,gamma")
    done = subprocess.run([sys.executable, "-m", "nmflow", "--version"], capture_output=True, text=True)
    assert done.returncode == 0 and "nmflow" in done.stdout
