"""Command line plumbing: config handling, files, exit codes."""

import csv
import json
import math
import re

import numpy as np
import pytest

from vibecho.cli import ConfigError, load_config, main, parse_config

SI_TYPICAL = {
    "units": "si",
    "mass": 1e-25,
    "ground_freq": 1e14,
    "force": 1e-8,
}


def _write_config(tmp_path, body, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(body))
    return str(path)


# ----------------------------------------------------------------------
# config parsing
# ----------------------------------------------------------------------

def test_defaults_and_overrides(tmp_path):
    path = _write_config(tmp_path, {"force": 2.0, "tau": 0.3})
    cfg = load_config(path, {"engine": "analytic", "out": "somewhere"})
    assert cfg.engine == "analytic"
    assert cfg.out == "somewhere"
    assert cfg.units == "natural"
    assert cfg.area2 == cfg.area1  # tied default
    sched = cfg.schedule_natural()
    assert sched.t0 == pytest.approx(0.6)  # default t0 = 2 tau


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys"):
        parse_config({"force": 1.0, "bogus": 1, "wat": 2})


def test_choice_keys_validated():
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "engine": "quantum"})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "units": "imperial"})


def test_si_requires_scales():
    with pytest.raises(ConfigError, match="mass"):
        parse_config({"units": "si", "force": 1e-8})


def test_natural_rejects_scales():
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "mass": 2e-25})


def test_value_validation():
    with pytest.raises(ConfigError):
        parse_config({"force": -1.0})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "tau": 0.0})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "tau_values": []})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "tau_values": [0.1, "x"]})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "n_points": 17})
    with pytest.raises(ConfigError):
        parse_config({"force": 1.0, "kinetic_enabled": "yes"})


def test_si_natural_force_round_trip():
    cfg = parse_config(dict(SI_TYPICAL))
    f = cfg.params().dimensionless_force
    back = parse_config({"units": "natural", "force": f})
    assert back.params().dimensionless_force == pytest.approx(f, rel=1e-12)


# ----------------------------------------------------------------------
# params command
# ----------------------------------------------------------------------

def test_params_si_report(tmp_path, capsys):
    path = _write_config(tmp_path, SI_TYPICAL)
    assert main(["params", "--config", path]) == 0
    out = capsys.readouterr().out
    t_dec = float(re.search(r"^    T + = (\S+) s$", out, re.M).group(1))
    ratio = float(re.search(r"T / t_phi + = (\S+)$", out, re.M).group(1))
    assert t_dec == pytest.approx(8.059053486201156e-15, rel=1e-9)
    assert ratio == pytest.approx(3.5096269426540836, rel=1e-9)
    assert "natural units" in out and "suggested tau range" in out


def test_params_zero_force(tmp_path, capsys):
    path = _write_config(tmp_path, {"force": 0.0})
    assert main(["params", "--config", path]) == 0
    out = capsys.readouterr().out
    assert "inf" in out
    assert "warning" in out
    assert "undefined" in out


# ----------------------------------------------------------------------
# run command
# ----------------------------------------------------------------------

def _read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_run_writes_trace_and_effective_config(tmp_path):
    path = _write_config(tmp_path, {
        "force": 3.079, "tau": 0.3, "engine": "analytic",
        "out": str(tmp_path / "out")})
    assert main(["run", "--config", path]) == 0
    header, data = _read_trace(tmp_path / "out" / "trace.csv")
    assert header == ["t", "re_d", "im_d", "abs_d",
                      "ground_pop", "excited_pop"]
    assert len(data) > 100
    # populations stay normalized in the file
    assert np.allclose(data[:, 4] + data[:, 5], 1.0, atol=1e-9)
    eff = json.loads((tmp_path / "out" / "effective_config.json").read_text())
    assert eff["engine"] == "analytic"
    assert eff["tau"] == 0.3


def test_run_zero_area_gives_zero_dipole(tmp_path):
    path = _write_config(tmp_path, {
        "force": 3.079, "tau": 0.3, "area1": 0.0, "engine": "numeric",
        "out": str(tmp_path / "out")})
    assert main(["run", "--config", path]) == 0
    _, data = _read_trace(tmp_path / "out" / "trace.csv")
    assert np.max(np.abs(data[:, 3])) == 0.0


def test_run_deterministic_and_round_trips(tmp_path):
    out = tmp_path / "out"
    path = _write_config(tmp_path, {
        "force": 3.079, "tau": 0.25, "engine": "numeric", "out": str(out)})
    assert main(["run", "--config", path]) == 0
    first = (out / "trace.csv").read_bytes()
    assert main(["run", "--config", path]) == 0
    assert (out / "trace.csv").read_bytes() == first
    # effective config reproduces the run byte for byte
    assert main(["run", "--config", str(out / "effective_config.json")]) == 0
    assert (out / "trace.csv").read_bytes() == first
    eff1 = (out / "effective_config.json").read_bytes()
    assert main(["run", "--config", str(out / "effective_config.json")]) == 0
    assert (out / "effective_config.json").read_bytes() == eff1


def test_run_si_times_in_seconds(tmp_path):
    body = dict(SI_TYPICAL)
    body.update({"tau": 3e-15, "engine": "analytic", "out": str(tmp_path / "o")})
    path = _write_config(tmp_path, body)
    assert main(["run", "--config", path]) == 0
    _, data = _read_trace(tmp_path / "o" / "trace.csv")
    t = data[:, 0]
    assert t[0] > 1e-16 and t[-1] < 1e-13  # femtosecond window, SI column
    assert np.max(data[:, 3]) == pytest.approx(0.5 * math.sin(math.pi / 3),
                                               abs=1e-6)


def test_run_echo_pathway(tmp_path):
    path = _write_config(tmp_path, {
        "force": 3.079, "tau": 0.4, "engine": "analytic", "pathway": "echo",
        "out": str(tmp_path / "out")})
    assert main(["run", "--config", path]) == 0
    _, data = _read_trace(tmp_path / "out" / "trace.csv")
    t, mag = data[:, 0], data[:, 3]
    t0 = 0.8
    assert np.max(mag[t < t0 - 1e-9]) == 0.0
    j = int(np.argmax(mag))
    assert t[j] == pytest.approx(t0 + 0.4, abs=2e-3)


# ----------------------------------------------------------------------
# scan-tau command
# ----------------------------------------------------------------------

def test_scan_tau_analytic(tmp_path):
    out = tmp_path / "scan"
    taus = list(np.linspace(0.25, 1.0, 8))
    path = _write_config(tmp_path, {
        "force": 3.079, "tau_values": taus, "engine": "analytic",
        "out": str(out)})
    assert main(["scan-tau", "--config", path]) == 0
    with open(out / "scan.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["tau", "peak", "xi", "xi_analytic"]
    for row in rows[1:]:
        assert row[2] == row[3]  # xi equals xi_analytic, byte for byte
    fit = json.loads((out / "fit.json").read_text())
    assert fit["exponent"] == pytest.approx(4.0, abs=1e-9)
    assert fit["failures"] == []
    assert fit["residual"] < 1e-10


def test_scan_tau_numeric_small(tmp_path):
    out = tmp_path / "scan"
    path = _write_config(tmp_path, {
        "force": 3.079, "tau_values": [0.35, 0.55, 0.75], "n_points": 2048,
        "engine": "numeric", "out": str(out)})
    assert main(["scan-tau", "--config", path]) == 0
    with open(out / "scan.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    xi = np.array([float(r[2]) for r in rows[1:]])
    xi_ref = np.array([float(r[3]) for r in rows[1:]])
    assert np.max(np.abs(xi - xi_ref) / xi_ref) < 1e-6
    fit = json.loads((out / "fit.json").read_text())
    assert fit["n_used"] == 0  # three points cannot support the fit
    assert "fit_error" in fit


def test_scan_tau_requires_tau_values(tmp_path):
    path = _write_config(tmp_path, {"force": 3.079})
    assert main(["scan-tau", "--config", path]) == 2


# ----------------------------------------------------------------------
# compare command
# ----------------------------------------------------------------------

def test_compare_report(tmp_path):
    out = tmp_path / "cmp"
    path = _write_config(tmp_path, {
        "force": 3.079, "tau": 0.05, "out": str(out)})
    assert main(["compare", "--config", path]) == 0
    rep = json.loads((out / "compare.json").read_text())
    assert rep["sup_norm_error"] < 0.01 * rep["max_amplitude"]
    assert rep["echo_peak_time_error"] < rep["dt"]
    assert rep["units"] == "natural"


# ----------------------------------------------------------------------
# exit codes
# ----------------------------------------------------------------------

def test_exit_codes(tmp_path, capsys):
    bad = _write_config(tmp_path, {"force": 1.0, "bogus": 1})
    assert main(["params", "--config", bad]) == 2
    assert "config error" in capsys.readouterr().err

    assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
    capsys.readouterr()

    narrow = _write_config(tmp_path, {
        "force": 1.0, "tau": 0.3, "n_points": 16, "out": str(tmp_path / "x")})
    assert main(["run", "--config", narrow]) == 3
    assert "numerical failure" in capsys.readouterr().err

    missing_force = _write_config(tmp_path, {"tau": 0.3}, name="nf.json")
    assert main(["run", "--config", missing_force]) == 2
    capsys.readouterr()
