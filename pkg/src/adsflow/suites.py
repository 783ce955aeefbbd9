"""Verification suites aggregating the module-level checks.

Every check gets its own generator keyed by (seed, check name), so results
do not depend on which checks run or in which order. Mesh and flow studies
run on canned surfaces and do not consume randomness.
"""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import checks
from .evolution import evolution_refinement
from .flow import FlowConfig, run_flow, umbilic_crosscheck, umbilic_exact, umbilic_ode
from .gauss_map import (
    complex_structure,
    frozen_check,
    gauss_map_eval,
    gaussmap_flow_refinement,
    gaussmap_refinement,
    gaussmap_residual,
    orientation_dets,
)
from .pseudo_euclidean import ContractError, inner
from .structure import convergence_orders, structure_refinement
from .surface import assemble_node_geometry, seed_surface
from .tolerances import resolve

SUITES = ("pointwise", "mesh", "flow", "gaussmap")
EVOLUTION_KINDS = ("metric", "shape", "shape_full", "angle", "scalar2d", "gauss_curv", "lemma_g", "hypf")


def check_rng(seed: int, name: str) -> np.random.Generator:
    """Counter-based generator for one named check."""
    ss = np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class VerdictSummary:
    suite: str
    seed: int
    checks: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def case_count(self) -> int:
        return sum(c["cases"] for c in self.checks)

    @property
    def fail_count(self) -> int:
        return sum(not c["passed"] for c in self.checks)

    @property
    def pass_count(self) -> int:
        return len(self.checks) - self.fail_count

    @property
    def passed(self) -> bool:
        return self.fail_count == 0

    def as_dict(self, timing: bool = False) -> dict:
        """Deterministic payload; wall time only on request."""
        out = {
            "suite": self.suite,
            "seed": self.seed,
            "case_count": self.case_count,
            "check_count": len(self.checks),
            "pass_count": self.pass_count,
            "fail_count": self.fail_count,
            "worst_residuals": {c["name"]: c["worst"] for c in self.checks if c.get("worst") is not None},
            "orders": {c["name"]: c["orders"] for c in self.checks if c.get("orders")},
            "checks": self.checks,
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _entry(name, cases, worst, tol, passed, orders=None, residuals=None, note=""):
    return {
        "name": name,
        "cases": int(cases),
        "worst": None if worst is None else float(worst),
        "tol": tol,
        "passed": bool(passed),
        "orders": [float(o) for o in orders] if orders else [],
        "residuals": [float(r) for r in residuals] if residuals else [],
        "note": note,
    }


def _order_entry(name, study, gate, cases=None, note=""):
    orders = study["orders"]
    res = study["residuals"]
    return _entry(name, cases or len(res), res[-1], gate, min(orders) >= gate, orders, res, note)


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def pointwise_suite(seed: int, tol: dict) -> list:
    out = []
    for fn, name in (
        (checks.angle_ensemble, "angle"),
        (checks.derivative_ensemble, "derivatives"),
        (checks.kato_pointwise, "kato"),
        (checks.weingarten_ensemble, "weingarten"),
    ):
        for r in fn(check_rng(seed, name)):
            t = tol["pointwise"].get(r.name, r.tol)
            out.append(_entry(r.name, r.cases, r.worst, t, r.worst <= t, note=r.note))
    w = checks.winding_ensemble(check_rng(seed, "winding"))
    out.append(_entry(w.name, w.cases, w.worst, w.tol, w.passed, note=w.note))
    return out


def mesh_suite(seed: int, tol: dict) -> list:
    out = []
    for kind in ("codazzi", "gauss", "simons"):
        out.append(_order_entry(f"structure_{kind}", structure_refinement(kind), tol["orders"][kind], note="perturbed slice N = 16, 32, 64"))
    f = assemble_node_geometry(seed_surface("geodesic_slice", 32))
    worst = max(float(np.abs(f.h).max()), float(np.abs(f.phi).max()))
    out.append(_entry("geodesic_slice_exact", f.H.size, worst, 1e-12, worst <= 1e-12, note="h and phi vanish"))
    return out


def ode_grid(tol: float) -> dict:
    """Criterion grid n x kappa x lambda0 with RK4 at dt = 1e-3 over [0, 5]."""
    n, k, l0 = np.meshgrid([1, 2, 3], [0.5, 1.0, 2.0], [-3.0, 0.1, 1.0], indexing="ij")
    traj = umbilic_ode(n.ravel(), k.ravel(), l0.ravel(), 5.0, 1e-3)
    lam_ex, phi_ex = umbilic_exact(traj.n, traj.kappa, traj.lam0, traj.t[:, None])
    err_phi = float(np.abs(traj.phi - phi_ex).max())
    err_lam = float(np.abs(traj.lam - lam_ex).max())
    env = np.abs(traj.phi * np.exp(traj.n * traj.t[:, None]) - traj.phi[0]).max()
    worst = max(err_phi, err_lam, float(env))
    return {"cases": traj.lam.shape[1], "worst": worst, "passed": worst <= tol}


def flow_suite(seed: int, tol: dict, umbilic_levels=(16, 32)) -> list:
    out = []
    ode = ode_grid(tol["ode"]["exact"])
    out.append(_entry("ode_exact", ode["cases"], ode["worst"], tol["ode"]["exact"], ode["passed"], note="27-point grid, RK4 dt = 1e-3"))
    gate = tol["orders"]["evolution"]
    study = evolution_refinement(EVOLUTION_KINDS)
    for key, v in study.items():
        out.append(_order_entry(f"evolution_{key}", v, gate, note="N = 64, 128, 256, spacing 2 dt"))
    for speed in ("one", "H"):
        s2 = evolution_refinement(("metric", "shape"), speed=speed)
        for key, v in s2.items():
            out.append(_order_entry(f"evolution_{key}_speed_{speed}", v, gate))
    # umbilic slice against the ODE
    res = [umbilic_crosscheck(n) for n in umbilic_levels]
    errs = [r.worst for r in res]
    orders = convergence_orders(errs)
    C = errs[0] / res[0].dx**2
    within = all(e <= 1e-6 + C * r.dx**2 * (1 + 1e-9) for e, r in zip(errs, res))
    out.append(_entry("umbilic_vs_ode", len(res), errs[-1], gate, within and min(orders) >= gate, orders, errs, "err <= 1e-6 + C dx^2"))
    umb = [float(r.umbilicity.max()) for r in res]
    uo = convergence_orders(umb)
    out.append(_entry("umbilic_persistence", len(res), umb[-1], gate, min(uo) >= gate, uo, umb, "sup|l1 - l2| = O(dx^2)"))
    # canned radial run
    run = run_flow(FlowConfig(mode="graph_radial", initial={"resolution": 64}, t_end=2.0, monitor_every=0.05))
    verdicts = run.verdicts()
    for key, ok in verdicts.items():
        out.append(_entry(f"radial_{key}", len(run.times), None, None, ok and run.aborted is None, note="graph_radial N = 64, t_end = 2"))
    # geodesic slice is stationary
    geo = run_flow(FlowConfig(mode="mesh", initial={"kind": "geodesic_slice", "resolution": 16}, t_end=0.05, monitor_every=0.01))
    sup_phi = max(geo.monitor.series.sup_phi_env + [-v for v in geo.monitor.series.inf_phi_env])
    out.append(_entry("geodesic_stationary", len(geo.times), sup_phi, 1e-12, sup_phi <= 1e-12))
    return out


def gaussmap_suite(seed: int, tol: dict) -> list:
    out = []
    r = gaussmap_residual("endo_algebra")
    out.append(_entry("endo_algebra", 30, r.sup, 0.0, r.sup == 0.0, note="products and squares on the basis"))
    r = gaussmap_residual("decomp", rng=check_rng(seed, "decomp"), count=10_000)
    out.append(_entry("decomp", 10_000, r.sup, tol["pointwise"]["decomp"], r.sup <= tol["pointwise"]["decomp"]))
    rng = check_rng(seed, "orientation")
    V = rng.standard_normal((1000, 4))
    d = orientation_dets(V)
    ok = bool(np.all(d["+"] > 0) and np.all(d["-"] < 0))
    out.append(_entry("orientation", 1000, None, None, ok, note="{V, E1 V, E2 V, E3 V}"))
    # hyperboloid constraint and J^2 = -Id on random perturbed meshes
    worst_c = worst_j = 0.0
    cases = 0
    rng = check_rng(seed, "hyperboloid")
    for _ in range(4):
        mesh = seed_surface("perturbed", 32, amplitude=float(rng.uniform(0.02, 0.08)), mode=int(rng.integers(1, 4)), seed=int(rng.integers(2**31)))
        gm = gauss_map_eval(assemble_node_geometry(mesh))
        worst_c = max(worst_c, gm.constraint_residual())
        for G, dname in ((gm.plus, "+"), (gm.minus, "-")):
            X = rng.standard_normal(G.shape)
            X = X + 2 * inner(X, G)[..., None] * G  # project onto T_G: <G, G> = -1/2
            JJ = complex_structure(G, complex_structure(G, X, dname), dname)
            worst_j = max(worst_j, float((np.abs(JJ + X).max(axis=-1) / np.abs(X).max(axis=-1)).max()))
        cases += gm.plus.shape[0] * gm.plus.shape[1]
    h_tol = tol["gaussmap"]["hyperboloid"]
    out.append(_entry("hyperboloid", cases, worst_c, h_tol, worst_c <= h_tol, note="<G, G> = -1/2, both factors"))
    out.append(_entry("J_squared", cases, worst_j, 1e-12, worst_j <= 1e-12))
    static = gaussmap_refinement()
    for kind, v in static.items():
        out.append(_order_entry(f"gaussmap_{kind}", v, tol["orders"]["gaussmap_static"], note="N = 32, 64, 128"))
    flow = gaussmap_flow_refinement()
    for key in ("evolution", "tangent_relation", "complex_relation"):
        out.append(_order_entry(f"gaussmap_flow_{key}", flow[key], tol["orders"]["gaussmap_flow"], note="N = 32, 64, 128, spacing 2 dt"))
    fr = frozen_check(floor=tol["gaussmap"]["frozen_floor"])
    out.append(_entry("gaussmap_frozen_umbilic", len(fr["residuals"]), max(fr["residuals"]), fr["floor"], fr["passed"], fr["orders"], fr["residuals"]))
    return out


_RUNNERS = {"pointwise": pointwise_suite, "mesh": mesh_suite, "flow": flow_suite, "gaussmap": gaussmap_suite}


def verify_suite(name: str, seed: int = 0, tolerances: dict | None = None) -> VerdictSummary:
    """Run a named suite (or ``all``) and summarise."""
    if name != "all" and name not in _RUNNERS:
        raise ContractError(f"unknown suite {name!r}")
    tol = resolve(None) if tolerances is None else tolerances
    names = SUITES if name == "all" else (name,)
    t0 = time.perf_counter()
    entries = []
    for s in names:
        for e in _RUNNERS[s](seed, tol):
            e["suite"] = s
            entries.append(e)
    return VerdictSummary(name, seed, entries, time.perf_counter() - t0)
