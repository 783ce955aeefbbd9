import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from adsflow.cli import load_schema, main
from adsflow.flow import MonitorSeries

ODE = {"schema_version": 1, "flow": {"mode": "ode_umbilic", "n": 2, "kappa": 1.0, "initial": {"lambda0": 1.0}, "t_end": 5.0}}
RADIAL = {"schema_version": 1, "flow": {"mode": "graph_radial", "initial": {"resolution": 32}, "t_end": 0.5, "snapshot_every": 0.25}}
GEODESIC = {"schema_version": 1, "flow": {"mode": "mesh", "initial": {"kind": "geodesic_slice", "resolution": 16}, "t_end": 0.02, "monitor_every": 0.01}}
ABORTING = {"schema_version": 1, "flow": {"mode": "mesh", "initial": {"kind": "perturbed", "resolution": 16, "amplitude": 0.05}, "dt": 0.01, "t_end": 1.0}}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return str(p)


def run(tmp_path, command, doc, out="run", extra=()):
    code = main([command, "--config", write(tmp_path, doc), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def load_report(d):
    return json.loads((d / "report.json").read_text())


def test_ode_run(tmp_path):
    code, d = run(tmp_path, "ode", ODE)
    assert code == 0
    rep = load_report(d)
    jsonschema.validate(rep, load_schema("report"))
    assert rep["passed"] and rep["status"] == "completed"
    assert rep["final"]["envelope_error"] <= 1e-8
    t = np.array(rep["series"]["t"])
    env = np.array(rep["series"]["phi_env"])
    assert np.abs(env - rep["constants"]["phi0"]).max() <= 1e-8 and t[-1] == pytest.approx(5.0)
    assert rep["config"]["flow"]["integrator"] == "rk4" and rep["config"]["flow"]["dt"] == 1e-3


@pytest.mark.parametrize(
    "doc",
    [
        {"schema_version": 1, "flow": {"kappa": -1.0}},
        {"schema_version": 2, "flow": {}},
        {"flow": {}},
        {"schema_version": 1, "flow": {"mode": "mesh", "colour": "red"}},
        {"schema_version": 1, "flow": {"mode": "mesh", "initial": {"kind": "torus"}}},
        {"schema_version": 1, "flow": {"mode": "mesh", "initial": {"resolution": 24}}},
        {"schema_version": 1, "flow": {"mode": "mesh", "initial": {"kind": "umbilic_slice", "s": 0.5, "lambda0": 1.0}}},
        {"schema_version": 1, "flow": {"mode": "mesh", "n": 3}},
        {"schema_version": 1, "tolerances": {"ode": {"exact": 1e-3}}},
        {"schema_version": 1, "tolerances": {"bogus": {"x": 1.0}}},
        "{not json",
    ],
)
def test_invalid_input_exit_2(tmp_path, doc):
    code, d = run(tmp_path, "flow", doc)
    assert code == 2
    assert not d.exists()


def test_missing_config(tmp_path):
    assert main(["ode", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "r")]) == 2


def test_mode_mismatch(tmp_path):
    assert run(tmp_path, "flow", ODE)[0] == 2
    assert run(tmp_path, "ode", RADIAL)[0] == 2


def test_bad_arguments():
    assert main([]) == 2
    assert main(["verify"]) == 2
    assert main(["report", "--out", "x", "--format", "xml"]) == 2


def test_loose_override_needs_flag(tmp_path):
    doc = dict(ODE, tolerances={"ode": {"exact": 1e-3}})
    assert run(tmp_path, "ode", doc)[0] == 2
    code, d = run(tmp_path, "ode", doc, extra=["--allow-loose"])
    assert code == 0
    assert load_report(d)["config"]["tolerances"]["ode"]["exact"] == 1e-3


def test_tight_tolerance_fails_verdict(tmp_path):
    doc = dict(RADIAL, tolerances={"monitors": {"h2_identity": 0.0}})
    code, d = run(tmp_path, "flow", doc)
    assert code == 1
    rep = load_report(d)
    assert rep["status"] == "completed" and not rep["passed"] and not rep["verdicts"]["h2_identity"]


def test_radial_run_outputs(tmp_path):
    code, d = run(tmp_path, "flow", RADIAL)
    assert code == 0
    rep = load_report(d)
    jsonschema.validate(rep, load_schema("report"))
    # snapshots land on the first step at or after each requested time
    dx = 4.0 / 32
    dt = 0.5 * dx**2 / 4
    times = [s["t"] for s in rep["snapshots"]]
    assert len(times) == 3 and times[0] == 0.0 and times[-1] == pytest.approx(0.5)
    assert 0.25 <= times[1] < 0.25 + dt
    ic = rep["config"]["flow"]["initial"]
    assert ic["bc"] == ["neumann_ghost", "neumann_ghost"] and ic["theta_mode"] == "rotational"
    assert set(rep["config"]["tolerances"]) == {"pointwise", "orders", "monitors", "ode", "gaussmap"}
    for snap in rep["snapshots"]:
        rows = list(csv.reader(open(d / snap["file"])))
        assert len(rows[0]) == 13 and len(rows) == 1 + 32 * 4
        gm = np.loadtxt(d / snap["gauss_map"], delimiter=",", skiprows=1)
        assert gm.shape == (32 * 4, 8)
        for cols in (gm[:, 2:5], gm[:, 5:8]):
            q = cols[:, 0] ** 2 + cols[:, 1] ** 2 - cols[:, 2] ** 2
            assert np.abs(q + 0.5).max() <= 1e-12


def test_report_csv(tmp_path, capsys):
    code, d = run(tmp_path, "flow", RADIAL)
    assert main(["report", "--out", str(d), "--format", "csv"]) == 0
    rows = list(csv.reader(open(d / "report.csv")))
    assert tuple(rows[0]) == MonitorSeries.CSV_COLUMNS
    assert all(len(r) == 11 for r in rows)
    assert len(rows) == 1 + len(load_report(d)["series"]["t"])


def test_report_json_verbatim(tmp_path, capsys):
    _, d = run(tmp_path, "flow", RADIAL)
    capsys.readouterr()
    assert main(["report", "--out", str(d), "--format", "json"]) == 0
    assert capsys.readouterr().out == (d / "report.json").read_text()


def test_report_missing_run(tmp_path):
    assert main(["report", "--out", str(tmp_path / "none"), "--format", "csv"]) == 2


def test_geodesic_run_zero_columns(tmp_path):
    code, d = run(tmp_path, "flow", GEODESIC)
    assert code == 0
    main(["report", "--out", str(d), "--format", "csv"])
    rows = list(csv.DictReader(open(d / "report.csv")))
    for r in rows:
        for col in ("sup_phi_env", "inf_phi_env", "sup_H"):
            assert abs(float(r[col])) <= 1e-12


def test_abort_exit_1_with_partial_report(tmp_path):
    code, d = run(tmp_path, "flow", ABORTING)
    assert code == 1
    rep = load_report(d)
    jsonschema.validate(rep, load_schema("report"))
    assert rep["status"] == "aborted" and "non-spacelike" in rep["aborted"] and not rep["passed"]
    assert len(rep["series"]["t"]) >= 1


def test_config_echo_roundtrip(tmp_path):
    _, d1 = run(tmp_path, "flow", RADIAL, out="a")
    echo = load_report(d1)["config"]
    _, d2 = run(tmp_path, "flow", echo, out="b")
    assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
    for snap in load_report(d1)["snapshots"]:
        assert (d1 / snap["file"]).read_bytes() == (d2 / snap["file"]).read_bytes()


def test_studies_add_orders(tmp_path):
    doc = dict(GEODESIC, studies=["gaussmap"])
    code, d = run(tmp_path, "flow", doc)
    assert code == 0
    orders = load_report(d)["residual_orders"]
    assert {"gaussmap_lagrangian", "gaussmap_flow_evolution"} <= set(orders)


def test_verify_unknown_suite(capsys):
    assert main(["verify", "--suite", "bogus"]) == 2


def test_verify_writes_summary(tmp_path, capsys):
    assert main(["verify", "--suite", "mesh", "--seed", "42", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr()
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert out.out == (tmp_path / "summary.json").read_text()
    assert "wall time" in out.err
    jsonschema.validate(summary, load_schema("summary"))
    assert summary["fail_count"] == 0


def test_verify_tolerance_config(tmp_path):
    cfg = write(tmp_path, {"schema_version": 1, "tolerances": {"orders": {"codazzi": 2.5}}})
    assert main(["verify", "--suite", "mesh", "--config", cfg]) == 1


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, ODE)
    res = subprocess.run([sys.executable, "-m", "adsflow.cli", "ode", "--config", cfg, "--out", str(tmp_path / "r")], capture_output=True, text=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "adsflow.cli", "verify", "--suite", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2 and "unknown suite" in res.stderr
