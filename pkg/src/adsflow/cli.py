"""Command-line front end: ``adsflow {ode,flow,verify,report}``.

Exit codes: 0 success, 1 a tolerance or runtime-abort failure, 2 invalid
input (unreadable or schema-invalid config, unknown suite, missing run).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .flow import FlowConfig, MonitorSeries, build_initial_mesh, monitor_verdicts, run_flow, umbilic_exact
from .pseudo_euclidean import ContractError
from .surface import assemble_node_geometry, write_snapshot
from .tolerances import TOLERANCE_TABLE_VERSION, resolve

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


def load_schema(name: str) -> dict:
    return json.loads(resources.files("adsflow").joinpath("schemas", f"{name}.schema.json").read_text())


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _finite(x):
    """Floats that JSON can carry; non-finite values become None."""
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite(v) for v in x]
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def read_config(path: str, allow_loose: bool = False) -> tuple[dict, FlowConfig, dict]:
    """Parse and validate a config file; returns (document, FlowConfig, tolerance table)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, load_schema("config"))
    except jsonschema.ValidationError as exc:
        raise InputError(f"config violates schema: {exc.message}") from exc
    flow_doc = dict(doc.get("flow", {}))
    if flow_doc.get("mode") == "ode_umbilic":
        flow_doc.setdefault("integrator", "rk4")
    try:
        cfg = FlowConfig(**flow_doc)
        cfg.validate()
        tol = resolve(doc.get("tolerances"), allow_loose)
    except (TypeError, ContractError) as exc:
        raise InputError(str(exc)) from exc
    return doc, cfg, tol


def resolved_config(doc: dict, cfg: FlowConfig, tol: dict) -> dict:
    """The config with every default written out; re-running it reproduces the run."""
    flow = dataclasses.asdict(cfg)
    initial = dict(flow["initial"])
    if cfg.mode == "ode_umbilic":
        initial.setdefault("lambda0", 1.0)
        flow["dt"] = flow["dt"] or 1e-3
    else:
        mesh = build_initial_mesh(cfg)
        initial.setdefault("kind", "graph_radial" if cfg.mode == "graph_radial" else "geodesic_slice")
        initial.setdefault("resolution", mesh.shape[0])
        initial.setdefault("seed", cfg.seed)
        initial.setdefault("chi_range", [mesh.chi_lo, mesh.chi_hi])
        initial.setdefault("n_theta", mesh.shape[1])
        initial.setdefault("bc", [mesh.bc_lo, mesh.bc_hi])
        initial.setdefault("theta_mode", mesh.theta_mode)
        for key in ("chi_range", "bc"):
            initial[key] = list(initial[key])
    flow["initial"] = initial
    out = {"schema_version": SCHEMA_VERSION, "flow": flow, "tolerances": tol, "studies": list(doc.get("studies", []))}
    return out


# ---------------------------------------------------------------------------
# run commands
# ---------------------------------------------------------------------------


def _ode_report(cfg: FlowConfig, tol: dict) -> dict:
    run = run_flow(cfg)
    traj = run.ode
    stride = max(1, int(round(cfg.monitor_every / run.dt)))
    idx = np.arange(0, len(traj.t), stride)
    if idx[-1] != len(traj.t) - 1:
        idx = np.append(idx, len(traj.t) - 1)
    t = traj.t[idx]
    lam = traj.lam[idx]
    phi = traj.phi[idx]
    lam_ex, phi_ex = umbilic_exact(cfg.n, cfg.kappa, traj.lam0, traj.t)
    env = traj.phi * np.exp(cfg.n * traj.t)
    err_env = float(np.abs(env - traj.phi[0]).max())
    err_exact = float(max(np.abs(traj.lam - lam_ex).max(), np.abs(traj.phi - phi_ex).max()))
    verdicts = {"envelope": err_env <= tol["ode"]["exact"], "exact": err_exact <= tol["ode"]["exact"]}
    return {
        "status": "completed",
        "aborted": None,
        "dt": run.dt,
        "steps": len(traj.t) - 1,
        "constants": {"phi0": float(traj.phi[0]), "lambda0": float(traj.lam0), "n": cfg.n, "kappa": cfg.kappa},
        "series": {"t": t.tolist(), "lambda": lam.tolist(), "phi": phi.tolist(), "phi_env": (phi * np.exp(cfg.n * t)).tolist()},
        "verdicts": verdicts,
        "final": {"lambda": float(traj.lam[-1]), "phi": float(traj.phi[-1]), "envelope_error": err_env, "exact_error": err_exact},
        "snapshots": [],
    }


def _write_gauss_map(path: Path, fields) -> None:
    from .gauss_map import gauss_map_eval

    gm = gauss_map_eval(fields)
    n, m = fields.mesh.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "Gp1", "Gp2", "Gp3", "Gm1", "Gm2", "Gm3"])
        for i in range(n):
            for j in range(m):
                w.writerow([i, j] + [f"{float(v):.17g}" for v in (*gm.plus[i, j], *gm.minus[i, j])])


def _flow_report(cfg: FlowConfig, tol: dict, out: Path, studies) -> dict:
    run = run_flow(cfg)
    snaps = []
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    (out / "gauss_map").mkdir(parents=True, exist_ok=True)
    fields = None
    for index, (t, mesh) in enumerate(run.snapshots):
        try:
            fields = assemble_node_geometry(mesh)
        except ContractError:
            break
        write_snapshot(out / "snapshots" / f"{index}.csv", fields)
        gm_file = f"gauss_map/{index}.csv"
        try:
            _write_gauss_map(out / gm_file, fields)
        except ContractError:
            gm_file = None
        snaps.append({"index": index, "t": float(t), "file": f"snapshots/{index}.csv", "gauss_map": gm_file})
    series = run.monitor.series.as_dict()
    verdicts = monitor_verdicts(series, run.monitor.constants(), tol["monitors"])
    t_last = series["t"][-1]
    decay = math.exp(-cfg.n * t_last)
    final = {
        "t": t_last,
        "sup_H": series["sup_H"][-1],
        "sup_abs_phi": max(abs(series["sup_phi_env"][-1]), abs(series["inf_phi_env"][-1])) * decay,
        "min_kappa_minus_K": series["min_kappa_minus_K"][-1],
    }
    orders = {}
    if "evolution" in studies:
        from .evolution import evolution_refinement
        from .suites import EVOLUTION_KINDS

        orders.update({f"evolution_{k}": v for k, v in evolution_refinement(EVOLUTION_KINDS).items()})
    if "gaussmap" in studies:
        from .gauss_map import gaussmap_flow_refinement, gaussmap_refinement

        orders.update({f"gaussmap_{k}": v for k, v in gaussmap_refinement().items()})
        flow = gaussmap_flow_refinement()
        orders.update({f"gaussmap_flow_{k}": flow[k] for k in ("evolution", "tangent_relation", "complex_relation")})
    return {
        "status": "aborted" if run.aborted else "completed",
        "aborted": run.aborted,
        "dt": run.dt,
        "steps": int(round(run.times[-1] / run.dt)),
        "constants": run.monitor.constants(),
        "series": series,
        "verdicts": verdicts,
        "final": final,
        "residual_orders": {k: {"residuals": v["residuals"], "orders": v["orders"]} for k, v in orders.items()},
        "snapshots": snaps,
    }


def run_experiment(config_path: str, out_dir: str | None, command: str, allow_loose: bool = False) -> tuple[int, Path | None]:
    doc, cfg, tol = read_config(config_path, allow_loose)
    if command == "ode" and cfg.mode != "ode_umbilic":
        if "flow" in doc and "mode" in doc["flow"]:
            raise InputError(f"ode command needs mode ode_umbilic, config has {cfg.mode!r}")
        cfg = dataclasses.replace(cfg, mode="ode_umbilic", integrator=doc.get("flow", {}).get("integrator", "rk4"))
        cfg.validate()
    if command == "flow" and cfg.mode == "ode_umbilic":
        raise InputError("flow command needs a mesh mode; use the ode command")
    out = Path(out_dir or doc.get("out") or "run")
    try:
        echo = resolved_config(doc, cfg, tol)
    except (TypeError, ContractError) as exc:
        raise InputError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    body = _ode_report(cfg, tol) if command == "ode" else _flow_report(cfg, tol, out, set(echo["studies"]))
    report = {
        "schema_version": SCHEMA_VERSION,
        "tolerance_table_version": TOLERANCE_TABLE_VERSION,
        "command": command,
        "config": echo,
        **body,
    }
    gate = tol["orders"]
    orders_ok = all(
        min(v["orders"]) >= gate["gaussmap_flow" if k.startswith("gaussmap_flow") else "gaussmap_static" if k.startswith("gaussmap") else "evolution"]
        for k, v in report.get("residual_orders", {}).items()
    )
    report["passed"] = bool(report["status"] == "completed" and all(report["verdicts"].values()) and orders_ok)
    report = _finite(report)
    (out / "report.json").write_text(_dump(report))
    return (EXIT_OK if report["passed"] else EXIT_FAIL), out


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def emit_report(run_dir: str, fmt: str, stream=None) -> Path:
    """Write report.csv (monitor series, 11 columns) or echo report.json."""
    stream = sys.stdout if stream is None else stream
    path = Path(run_dir) / "report.json"
    if not path.is_file():
        raise InputError(f"no report.json in {run_dir}")
    text = path.read_text()
    report = json.loads(text)
    if fmt == "json":
        jsonschema.validate(report, load_schema("report"))
        stream.write(text)
        return path
    series = report.get("series", {})
    if report["command"] == "ode":
        cols = ("t", "lambda", "phi", "phi_env")
    else:
        cols = MonitorSeries.CSV_COLUMNS
    missing = [c for c in cols if c not in series]
    if missing:
        raise InputError(f"report lacks series {missing}")
    out = Path(run_dir) / "report.csv"
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(series[c] for c in cols)):
            w.writerow([f"{float(v):.17g}" for v in row])
    stream.write(f"{out}\n")
    return out


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adsflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("ode", "integrate the umbilic ODE"), ("flow", "run a mesh or radial flow")):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--allow-loose", action="store_true")
    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("--suite", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--config", help="config file whose tolerances override the defaults")
    sp.add_argument("--out", help="directory for summary.json")
    sp.add_argument("--allow-loose", action="store_true")
    sp = sub.add_parser("report", help="emit a run report")
    sp.add_argument("--out", required=True, help="run directory")
    sp.add_argument("--format", choices=("csv", "json"), default="json")
    return p


def _verify(args) -> int:
    from .suites import SUITES, verify_suite

    if args.suite != "all" and args.suite not in SUITES:
        raise InputError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES + ('all',))}")
    tol = resolve(None)
    if args.config:
        _, _, tol = read_config(args.config, args.allow_loose)
    summary = verify_suite(args.suite, args.seed, tol)
    payload = _dump(_finite(summary.as_dict()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "summary.json").write_text(payload)
    sys.stdout.write(payload)
    print(f"wall time {summary.wall_time:.1f} s; {summary.pass_count} passed, {summary.fail_count} failed", file=sys.stderr)
    return EXIT_OK if summary.passed else EXIT_FAIL


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        if args.command in ("ode", "flow"):
            code, out = run_experiment(args.config, args.out, args.command, args.allow_loose)
            print(out / "report.json")
            return code
        if args.command == "verify":
            return _verify(args)
        emit_report(args.out, args.format)
        return EXIT_OK
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
