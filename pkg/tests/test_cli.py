import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from oracles import maxwell_oracle
from phaseshock import cli
from phaseshock.cli import COMMANDS, main
from phaseshock.coexistence import coexistence_curve, maxwell_pressure, volume_entropy
from phaseshock.eos_core import REDUCED_VDW, critical_point, vdw_spec
from phaseshock.eos_fit import write_isotherm_csv
from phaseshock.pearcey_universal import pearcey_moments

EOS = vdw_spec(REDUCED_VDW)


def _rows(path):
    lines = [ln for ln in open(path).read().splitlines() if not ln.startswith("#")]
    r = list(csv.reader(lines))
    return r[0], np.array([[float(x) for x in row] for row in r[1:]])


def _run(tmp_path, *argv, name="out"):
    path = tmp_path / name
    rc = main([*argv, "--out", str(path)])
    return rc, path


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_help(command, capsys):
    with pytest.raises(SystemExit) as e:
        main([command, "--help"])
    assert e.value.code == 0
    assert "--config" in capsys.readouterr().out


def test_top_level_help_and_version(capsys):
    with pytest.raises(SystemExit) as e:
        main(["--help"])
    assert e.value.code == 0
    text = capsys.readouterr().out
    assert all(c in text for c in COMMANDS)
    with pytest.raises(SystemExit):
        main(["--version"])
    assert "phaseshock" in capsys.readouterr().out


def test_isotherm_hydrogen_reduced(tmp_path):
    rc, p = _run(tmp_path, "isotherm", "--eos", "vdw-hydrogen", "--T", "1.1,1.0,0.9", "--reduced")
    assert rc == 0
    cols, a = _rows(p)
    assert cols == ["T", "V", "P", "P_maxwell"]
    assert sorted(set(a[:, 0])) == [0.9, 1.0, 1.1]
    for T in (1.1, 1.0):
        c = a[a[:, 0] == T]
        assert np.array_equal(c[:, 2], c[:, 3])
    c = a[a[:, 0] == 0.9]
    P_sat, V_l, V_g = maxwell_oracle(0.9)[:3]
    diff = c[:, 2] != c[:, 3]
    inside = (c[:, 1] >= V_l * (1 + 1e-6)) & (c[:, 1] <= V_g * (1 - 1e-6))
    edge = (np.abs(c[:, 1] - V_l) <= 1e-6 * V_l) | (np.abs(c[:, 1] - V_g) <= 1e-6 * V_g)
    assert np.all(diff[inside]) and not np.any(diff[~inside & ~edge])
    assert np.allclose(c[diff, 3], P_sat, rtol=1e-8)


@pytest.mark.parametrize("value", ["0", "-1", "1.0,-0.5"])
def test_isotherm_invalid_temperature(value, capsys):
    assert main(["isotherm", "--T", value]) == 2
    assert "T must be positive" in capsys.readouterr().err


def test_exit_code_three_nonconvergence(tmp_path, capsys):
    # An ideal gas has no critical point.
    V = np.linspace(0.5, 5.0, 40)
    doc = {"kind": "tabulated", "V": V.tolist(), "alpha": V.tolist(), "f": [0.0] * 40}
    path = tmp_path / "ideal.json"
    path.write_text(json.dumps(doc))
    assert main(["critical-point", "--eos", str(path)]) == 3
    assert "critical point" in capsys.readouterr().err


def test_exit_code_four_infeasible(capsys):
    assert main(["maxwell", "--T", "1.2"]) == 4
    assert main(["universal", "--gamma0", "-1", "--nx", "2", "--ny", "2"]) == 4


def test_byte_determinism(tmp_path):
    args = ["coexistence", "--T-lo", "0.6", "--T-hi", "0.95", "--steps", "8"]
    _, a = _run(tmp_path, *args, name="a.csv")
    _, b = _run(tmp_path, *args, name="b.csv")
    assert a.read_bytes() == b.read_bytes()
    head = a.read_text().splitlines()[:3]
    assert head[0].startswith("# phaseshock ") and head[2].startswith("# config_sha256 ")


def test_config_precedence_and_unknown_keys(tmp_path, capsys):
    cfgfile = tmp_path / "c.toml"
    cfgfile.write_text('points = 20\n[isotherm]\nT = [0.9, 1.1]\n')
    rc, p = _run(tmp_path, "isotherm", "--config", str(cfgfile))
    assert rc == 0
    _, a = _rows(p)
    assert sorted(set(a[:, 0])) == [0.9, 1.1] and len(a) == 40
    rc, p = _run(tmp_path, "isotherm", "--config", str(cfgfile), "--T", "0.8")
    _, a = _rows(p)
    assert set(a[:, 0]) == {0.8} and len(a) == 20
    # The hash records the resolved configuration, so a flag override changes it.
    _, q = _run(tmp_path, "isotherm", "--config", str(cfgfile), name="q")
    assert p.read_text().splitlines()[2] != q.read_text().splitlines()[2]
    cfgfile.write_text("T = [0.9]\nbogus = 1\n")
    assert main(["isotherm", "--config", str(cfgfile)]) == 2
    assert "unknown config key 'bogus'" in capsys.readouterr().err
    cfgfile.write_text("T = [0.9\n")
    assert main(["isotherm", "--config", str(cfgfile)]) == 2
    assert main(["isotherm", "--config", str(tmp_path / "missing.toml")]) == 2


def test_missing_required(capsys):
    assert main(["maxwell"]) == 2
    assert "missing required parameter(s): T" in capsys.readouterr().err


def test_critical_point_and_maxwell(tmp_path):
    rc, p = _run(tmp_path, "critical-point", "--eos", "vdw-hydrogen")
    doc = json.loads(p.read_text())
    assert rc == 0 and doc["V_c"] == pytest.approx(0.07983, rel=1e-4)
    rc, p = _run(tmp_path, "maxwell", "--T", "0.7,0.9")
    _, a = _rows(p)
    for row in a:
        assert row[1] == pytest.approx(maxwell_oracle(row[0])[0], rel=1e-9)


def test_clapeyron(tmp_path):
    rc, p = _run(tmp_path, "clapeyron", "--T-lo", "0.5", "--T-hi", "0.98", "--steps", "7")
    _, a = _rows(p)
    assert rc == 0 and np.max(a[:, 4]) <= 1e-4


def test_pearcey(tmp_path):
    rc, p = _run(tmp_path, "pearcey", "--nx", "3", "--ny", "3", "--inviscid")
    cols, a = _rows(p)
    assert rc == 0 and cols[-2:] == ["u_cubic", "tie"]
    for row in a:
        assert row[4] == pytest.approx(pearcey_moments(row[0], row[1]).u, rel=1e-12, abs=1e-14)
    # (0, 10) lies on the shock line: flagged as a tie.
    assert a[(a[:, 0] == 0) & (a[:, 1] == 10), 6] == 1


def test_universal(tmp_path):
    rc, p = _run(tmp_path, "universal", "--gamma0", "1e-4", "--nx", "5", "--ny", "5",
                 "--X-min", "-8", "--X-max", "8", "--Y-min", "-10", "--Y-max", "-2")
    _, a = _rows(p)
    assert rc == 0
    assert np.max(np.abs(a[:, 4] / a[:, 5] - 1)) <= 1e-3


def test_exponents(tmp_path):
    dts = ",".join(repr(float(x)) for x in np.geomspace(1e-5, 1e-3, 6))
    rc, p = _run(tmp_path, "exponents", "--gamma0", "1e-4", "--points", "7", "--maxwell-dT", dts)
    assert rc == 0
    doc = json.loads(p.read_text())
    slopes = [e["value"] for e in doc["estimates"]]
    assert all(abs(s - 0.5) <= 0.02 for s in slopes)
    assert (tmp_path / "out_K_T.csv").exists() and (tmp_path / "out_maxwell_jump.csv").exists()


def test_pde(tmp_path):
    stem = tmp_path / "sol"
    rc, p = _run(tmp_path, "pde", "--T-min", "1.5", "--T-max", "3.0", "--N", "129", "--P0", "2.0",
                 "--P1", "1.9", "--nu", "1e-3", "--S1", "1", "--binary", str(stem))
    assert rc == 0
    _, a = _rows(p)
    assert set(a[:, 0]) == {2.0, 1.9}
    first = a[a[:, 0] == 2.0]
    assert np.allclose(first[:, 2], first[:, 3], rtol=1e-12)
    last = a[a[:, 0] == 1.9]
    inner = (last[:, 1] > 1.7) & (last[:, 1] < 2.8)
    assert np.max(np.abs(last[inner, 2] / last[inner, 3] - 1)) < 1e-2
    assert stem.with_suffix(".bin").exists()
    assert main(["pde", "--T-min", "1.5", "--T-max", "3", "--P0", "2", "--P1", "1.9", "--form", "odd"]) == 2


def test_shocks(tmp_path):
    rc, p = _run(tmp_path, "shocks", "--T0", "0.95", "--T-end", "0.7", "--step", "0.01")
    _, a = _rows(p)
    assert rc == 0 and np.max(a[:, 4]) <= 1e-5


def test_fit(tmp_path):
    V = np.linspace(0.6, 5.0, 200)
    for name, T in (("a.csv", 1.2), ("b.csv", 1.5)):
        write_isotherm_csv(tmp_path / name, V, (T - EOS.f(V)) / EOS.alpha(V), T)
    rc, p = _run(tmp_path, "fit", "--iso1", str(tmp_path / "a.csv"), "--iso2", str(tmp_path / "b.csv"),
                 "--predict-T", "1.35", "--predict-out", str(tmp_path / "pred.csv"))
    assert rc == 0
    doc = json.loads(p.read_text())
    assert doc["eos"]["kind"] == "tabulated"
    assert doc["critical_point"]["T_c"] == pytest.approx(1.0, rel=1e-4)
    _, a = _rows(tmp_path / "pred.csv")
    truth = (1.35 - EOS.f(a[:, 1])) / EOS.alpha(a[:, 1])
    assert np.max(np.abs(a[:, 2] / truth - 1)) <= 1e-5
    # The fitted EOS document is accepted back as an --eos source.
    rc, q = _run(tmp_path, "critical-point", "--eos", str(p), name="cp.json")
    assert rc == 0 and json.loads(q.read_text())["V_c"] == pytest.approx(1.0, rel=1e-3)


def _phase_args():
    sp = maxwell_pressure(0.98, EOS)
    S_l = float(volume_entropy(EOS).S0(sp.V_l))
    S_s = S_l - 8.0 * (sp.V_l - 0.4)
    return ["phase-diagram", "--T0", "0.98", "--T-end", "0.8", "--step", "0.005", "--solid-V", "0.4",
            "--solid-S", repr(S_s), "--fusion-T0", "0.98", "--fusion-P0", repr(sp.P_sat + 0.05)]


def test_phase_diagram(tmp_path):
    rc, p = _run(tmp_path, *_phase_args(), "--csv-stem", str(tmp_path / "pd"))
    assert rc == 0
    doc = json.loads(p.read_text())
    assert [c["name"] for c in doc["curves"]] == ["liquid-gas", "solid-liquid", "solid-gas"]
    (tp,) = doc["triple_points"]
    assert 0.8 < tp["T"] < 0.98 and tp["outgoing"] == "solid-gas"
    vapour = doc["curves"][0]
    ref = coexistence_curve(0.8, 0.98, 37, EOS)
    P_ref = np.interp(vapour["T"], [q.T for q in ref.points], [q.P_sat for q in ref.points])
    assert np.max(np.abs(np.asarray(vapour["P"]) / P_ref - 1)) <= 1e-3
    for T, P in zip(vapour["T"][::6], vapour["P"][::6]):
        assert P == pytest.approx(maxwell_pressure(T, EOS).P_sat, rel=1e-6)
    assert len(list(tmp_path.glob("pd*.csv"))) == 3


def test_phase_diagram_malformed(tmp_path, capsys):
    args = _phase_args()
    i = args.index("--solid-V")
    assert main(args[:i] + args[i + 2:]) == 2
    assert "solid-V" in capsys.readouterr().err
    args[i + 1] = "abc"
    assert main(args) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["critical-point", "--eos", str(bad)]) == 2
    assert main(["critical-point", "--eos", str(tmp_path / "nope.json")]) == 2


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "phaseshock.cli", "maxwell", "--T", "0.8"], capture_output=True,
                       text=True, check=False)
    assert r.returncode == 0 and "P_sat" in r.stdout
    r = subprocess.run([sys.executable, "-m", "phaseshock.cli", "maxwell", "--T", "-1"], capture_output=True,
                       text=True, check=False)
    assert r.returncode == 2 and "T must be positive" in r.stderr


def test_stdout_default(capsys):
    assert main(["critical-point"]) == 0
    doc = json.loads(capsys.readouterr().out)
    cp = critical_point(EOS)
    assert doc["V_c"] == cp.V_c and doc["c3"] == pytest.approx(0.375, rel=1e-12)
    assert cli.header_lines("x", {"a": 1}) == cli.header_lines("x", {"a": 1})
