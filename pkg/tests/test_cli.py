import json
import os
import subprocess
import sys

import pytest

from stochgeo.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigError,
    cmd_analyze,
    cmd_figure,
    main,
    parse_config,
)


def _write_config(tmp_path, **overrides):
    cfg = {
        "version": 1,
        "experiment": "moments_downlink",
        "params": {"alpha": 4.0, "density": 1.0},
        "theta_grid": {"kind": "db", "start": -10, "stop": 10, "num": 5},
        "sim": {"trials": 2000, "master_seed": 7},
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_parse_rejects_unknown_keys(tmp_path):
    with pytest.raises(ConfigError):
        parse_config({"version": 1, "experiment": "x", "bogus": 3})
    with pytest.raises(ConfigError):
        parse_config({"version": 1, "experiment": "x", "sim": {"threads": 2}})
    with pytest.raises(ConfigError):
        parse_config({"version": 2, "experiment": "x"})


def test_parse_grid_kinds():
    base = {"version": 1, "experiment": "x"}
    g = parse_config({**base, "theta_grid": {"kind": "db", "values": [0.0]}})
    assert g["theta_grid"][0] == pytest.approx(1.0)
    g = parse_config({**base, "theta_grid": {"kind": "mh", "values": [0.5]}})
    assert g["theta_grid"][0] == pytest.approx(1.0)
    g = parse_config({**base, "theta_grid": {"kind": "linear", "values": [2.0]}})
    assert g["theta_grid"][0] == pytest.approx(2.0)


def test_analyze_produces_outputs(tmp_path):
    cfg = _write_config(tmp_path)
    assert cmd_analyze(str(cfg)) == EXIT_OK
    out = tmp_path / "out"
    csv = out / "moments_downlink.csv"
    assert csv.exists()
    header = csv.read_text().splitlines()[0]
    assert header == "theta_linear,theta_db,theta_mh,analytic,mc_mean,mc_stderr"
    assert (out / "moments_downlink.gp").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert "moments_downlink.csv" in manifest["outputs"]


def test_analyze_unknown_experiment_exit2(tmp_path):
    cfg = _write_config(tmp_path, experiment="nonsense")
    assert cmd_analyze(str(cfg)) == EXIT_CONFIG


def test_analyze_bad_json_exit2(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert cmd_analyze(str(path)) == EXIT_CONFIG


def test_analyze_rerun_byte_identical(tmp_path):
    cfg = _write_config(tmp_path)
    assert cmd_analyze(str(cfg)) == EXIT_OK
    first = (tmp_path / "out" / "moments_downlink.csv").read_bytes()
    assert cmd_analyze(str(cfg)) == EXIT_OK
    second = (tmp_path / "out" / "moments_downlink.csv").read_bytes()
    assert first == second


def test_manifest_checksums_match(tmp_path):
    import hashlib

    cfg = _write_config(tmp_path)
    cmd_analyze(str(cfg))
    out = tmp_path / "out"
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["outputs"].items():
        data = (out / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest


def test_figure_registry_rejects_unknown(tmp_path):
    assert cmd_figure("fig999", 1, 100, str(tmp_path)) == EXIT_CONFIG


@pytest.mark.parametrize("key", ["fig10", "fig17", "fig18", "fig22", "fig28", "fig29", "fig33", "fig34"])
def test_analytic_figures_smoke(tmp_path, key):
    out = tmp_path / key
    assert cmd_figure(key, 3, 500, str(out)) == EXIT_OK
    files = os.listdir(out)
    assert any(f.endswith(".csv") for f in files)
    assert any(f.endswith(".gp") for f in files)
    assert "manifest.json" in files


def test_figure_fig24_overlap(tmp_path):
    out = tmp_path / "fig24"
    assert cmd_figure("fig24", 3, 500, str(out)) == EXIT_OK
    lines = (out / "queueing_bipolar.csv").read_text().splitlines()
    header = lines[0].split(",")
    i85 = header.index("analytic_xi0.85")
    i10 = header.index("analytic_xi1.0")
    last = lines[-1].split(",")  # 30 dB: saturated branch for both
    assert abs(float(last[i85]) - float(last[i10])) < 1e-9


def test_figure_fig35_ordering(tmp_path):
    out = tmp_path / "fig35"
    assert cmd_figure("fig35", 3, 500, str(out)) == EXIT_OK
    lines = (out / "harq.csv").read_text().splitlines()
    header = lines[0].split(",")
    t1 = header.index("type1_qsi")
    t2 = header.index("type2_qsi")
    for row in lines[1:]:
        vals = row.split(",")
        assert float(vals[t2]) >= float(vals[t1]) - 1e-9


def test_numerical_failure_exit3(tmp_path, monkeypatch):
    from stochgeo import cli
    from stochgeo.core import ToleranceError

    def boom(cfg, out_dir):
        raise ToleranceError("synthetic tolerance failure")

    monkeypatch.setitem(cli._EXPERIMENTS, "moments_downlink", boom)
    cfg = _write_config(tmp_path)
    assert cmd_analyze(str(cfg)) == cli.EXIT_NUMERICAL


def test_figure_fig24_emits_sim_estimates(tmp_path):
    out = tmp_path / "fig24"
    assert cmd_figure("fig24", 3, 400, str(out)) == EXIT_OK
    sim = out / "queueing_bipolar_sim.csv"
    assert sim.exists()
    header = sim.read_text().splitlines()[0]
    assert header == "param,mean,stderr,n,seed"


def test_validate_mutation_sanity(monkeypatch):
    # corrupting the retransmission constant (dropping one gamma factor) must
    # flip the corresponding validation check to FAIL
    import math

    from stochgeo import relay_retx, validate

    checks = dict(validate._checks(quick=True, seed=5))
    assert checks["retransmission_algebra_vs_mc"]()["pass"]

    def corrupted(delta):
        return math.pi * math.gamma(1.0 - delta)  # Gamma(1+delta) dropped

    monkeypatch.setattr(relay_retx, "_c_const", corrupted)
    checks = dict(validate._checks(quick=True, seed=5))
    assert not checks["retransmission_algebra_vs_mc"]()["pass"]


def test_cli_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "stochgeo.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "analyze" in proc.stdout and "validate" in proc.stdout


def test_main_argv_dispatch(tmp_path):
    cfg = _write_config(tmp_path)
    assert main(["analyze", str(cfg)]) == EXIT_OK
