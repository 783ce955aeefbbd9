"""Time integration of F' = f nu and the monitor suite for angle-flow runs.

Three modes: the exact umbilic ODE, a general mesh, and a radial graph (a
rotation-invariant mesh). The default speed is the Lagrangian angle phi;
other speeds (constant 1, mean curvature H, or a callable) are only used to
test identities that hold for any speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as kern
from .angle import two_positive_margin
from .pseudo_euclidean import ContractError, inner, quadric_project
from .surface import (
    BC_CODES,
    SpacelikeError,
    SurfaceFields,
    SurfaceMesh,
    assemble_node_geometry,
    interior_band,
    physical_spacing,
    seed_surface,
)
from .tolerances import TOLERANCES

# ---------------------------------------------------------------------------
# umbilic ODE
# ---------------------------------------------------------------------------


def umbilic_angle(n, kappa, lam):
    """phi = (n / sqrt k) arctan(lam / sqrt k) for h = lam g in dimension n."""
    rk = np.sqrt(kappa)
    return n / rk * np.arctan(lam / rk)


def umbilic_exact(n, kappa, lam0, t):
    """Closed form (lambda(t), phi(t)) of the umbilic reduction.

    phi(t) = phi0 e^{-n t} and lambda = sqrt(k) tan(sqrt(k) phi / n).
    """
    if np.any(np.asarray(kappa) <= 0) or np.any(np.asarray(n) < 1):
        raise ContractError("need n >= 1 and kappa > 0")
    rk = np.sqrt(kappa)
    phi = umbilic_angle(n, kappa, lam0) * np.exp(-n * np.asarray(t, dtype=float))
    return rk * np.tan(rk * phi / n), phi


def umbilic_rhs(lam, n, kappa):
    """lambda' = -(kappa + lambda^2) phi(lambda)."""
    return -(kappa + lam**2) * umbilic_angle(n, kappa, lam)


@dataclass
class OdeTrajectory:
    t: np.ndarray
    lam: np.ndarray  # (steps + 1, *batch)
    phi: np.ndarray
    n: np.ndarray
    kappa: np.ndarray
    lam0: np.ndarray


def umbilic_ode(n, kappa, lam0, t_end: float = 5.0, dt: float = 1e-3, integrator: str = "rk4") -> OdeTrajectory:
    """Integrate the umbilic reduction for a batch of (n, kappa, lam0).

    Arguments broadcast against each other; each trajectory is advanced
    with the same fixed step.
    """
    n, kappa, lam0 = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(n, kappa, lam0))
    if np.any(kappa <= 0) or np.any(n < 1):
        raise ContractError("need n >= 1 and kappa > 0")
    steps = int(round(t_end / dt))
    if steps <= 0 or not math.isclose(steps * dt, t_end, rel_tol=1e-9, abs_tol=1e-12):
        raise ContractError("t_end must be a positive multiple of dt")
    lam = np.empty((steps + 1,) + lam0.shape)
    lam[0] = lam0
    x = lam0.copy()
    for k in range(steps):
        if integrator == "rk4":
            k1 = umbilic_rhs(x, n, kappa)
            k2 = umbilic_rhs(x + 0.5 * dt * k1, n, kappa)
            k3 = umbilic_rhs(x + 0.5 * dt * k2, n, kappa)
            k4 = umbilic_rhs(x + dt * k3, n, kappa)
            x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        elif integrator == "euler":
            x = x + dt * umbilic_rhs(x, n, kappa)
        else:
            raise ContractError(f"unknown integrator {integrator!r}")
        lam[k + 1] = x
    t = np.arange(steps + 1) * dt
    return OdeTrajectory(t, lam, umbilic_angle(n, kappa, lam), n, kappa, lam0)


# ---------------------------------------------------------------------------
# mesh stepping
# ---------------------------------------------------------------------------


def speed_field(fields: SurfaceFields, speed=None) -> np.ndarray:
    if speed is None or speed == "phi":
        return fields.phi
    if speed == "one":
        return np.ones_like(fields.phi)
    if speed == "H":
        return fields.H
    if callable(speed):
        return np.asarray(speed(fields), dtype=float)
    raise ContractError(f"unknown speed {speed!r}")


def velocity(mesh: SurfaceMesh, speed=None) -> tuple[np.ndarray, SurfaceFields]:
    """f nu at every node, zero on pinned end rows."""
    fields = assemble_node_geometry(mesh)
    v = speed_field(fields, speed)[..., None] * fields.nu
    if mesh.bc_lo == "pinned":
        v[0] = 0.0
    if mesh.bc_hi == "pinned":
        v[-1] = 0.0
    return v, fields


def _project(mesh: SurfaceMesh, V: np.ndarray, dt: float) -> SurfaceMesh:
    vv = inner(V, V)
    if np.any(vv >= 0):
        i, j = (int(a) for a in np.argwhere(vv >= 0)[0])
        raise SpacelikeError(f"step left the quadric's timelike cone at node ({i}, {j}), dt={dt:g}", node=(i, j))
    F = quadric_project(V, mesh.kappa)
    # pinned rows stay bitwise fixed, as in the compiled kernel
    if mesh.bc_lo == "pinned":
        F[0] = mesh.F[0]
    if mesh.bc_hi == "pinned":
        F[-1] = mesh.F[-1]
    return mesh.copy(F=F)


def mesh_step(mesh: SurfaceMesh, dt: float, integrator: str = "euler", speed=None) -> SurfaceMesh:
    """One step of F' = f nu followed by projection onto the quadric."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    try:
        if integrator == "euler":
            k1, _ = velocity(mesh, speed)
            return _project(mesh, mesh.F + dt * k1, dt)
        if integrator == "rk4":
            k1, _ = velocity(mesh, speed)
            m2 = _project(mesh, mesh.F + 0.5 * dt * k1, dt)
            k2, _ = velocity(m2, speed)
            m3 = _project(mesh, mesh.F + 0.5 * dt * k2, dt)
            k3, _ = velocity(m3, speed)
            m4 = _project(mesh, mesh.F + dt * k3, dt)
            k4, _ = velocity(m4, speed)
            return _project(mesh, mesh.F + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), dt)
    except SpacelikeError as exc:
        node = exc.node
        lam = None
        if node is not None:
            try:
                lam = assemble_node_geometry(mesh).lam[node].tolist()
            except SpacelikeError:
                pass
        raise SpacelikeError(f"{exc} (lambda at start of step: {lam}, dt={dt:g})", node=node) from exc
    raise ContractError(f"unknown integrator {integrator!r}")


def advance_fast(mesh: SurfaceMesh, nsteps: int, dt: float) -> SurfaceMesh:
    """``nsteps`` Euler steps with speed phi inside the compiled kernel."""
    Fp = mesh.padded()
    done, status, i, j = kern.advance(
        Fp,
        int(nsteps),
        float(dt),
        mesh.kappa,
        mesh.dchi,
        mesh.dtheta,
        BC_CODES[mesh.bc_lo],
        BC_CODES[mesh.bc_hi],
        mesh.chi_lo,
        mesh.chi_hi,
        mesh.rotational,
    )
    if status:
        raise SpacelikeError(f"non-spacelike node ({i}, {j}) after {done} steps, dt={dt:g}", node=(int(i), int(j)))
    return mesh.copy(F=Fp[1:-1].copy())


def cfl_dt(mesh: SurfaceMesh, c: float = 0.5, fields: SurfaceFields | None = None) -> float:
    """dt = c kappa dx^2 / 4 with dx the smallest physical spacing."""
    if not 0 < c <= 1:
        raise ContractError("CFL factor must lie in (0, 1]")
    dx = physical_spacing(mesh, fields)
    return c * mesh.kappa * dx**2 / 4.0


# ---------------------------------------------------------------------------
# configuration and runs
# ---------------------------------------------------------------------------


@dataclass
class FlowConfig:
    mode: str = "graph_radial"  # ode_umbilic | mesh | graph_radial
    kappa: float = 1.0
    n: int = 2
    initial: dict = field(default_factory=dict)
    integrator: str = "euler"
    dt: float | None = None
    cfl: float = 0.5
    t_end: float = 1.0
    monitor_every: float = 0.05
    snapshot_every: float | None = None
    seed: int = 0
    speed: str = "phi"

    def validate(self) -> None:
        if self.mode not in ("ode_umbilic", "mesh", "graph_radial"):
            raise ContractError(f"unknown mode {self.mode!r}")
        if self.kappa <= 0:
            raise ContractError("kappa must be positive")
        if self.integrator not in ("euler", "rk4"):
            raise ContractError(f"unknown integrator {self.integrator!r}")
        if self.t_end < 0:
            raise ContractError("t_end must be non-negative")
        if self.mode == "ode_umbilic" and not 1 <= self.n <= 3:
            raise ContractError("ode mode supports n in 1..3")
        if self.mode != "ode_umbilic" and self.n != 2:
            raise ContractError("mesh modes are two-dimensional")
        if not 0 < self.cfl <= 1:
            raise ContractError("CFL factor must lie in (0, 1]")


def build_initial_mesh(cfg: FlowConfig) -> SurfaceMesh:
    ic = dict(cfg.initial)
    kind = ic.pop("kind", "graph_radial" if cfg.mode == "graph_radial" else "geodesic_slice")
    resolution = ic.pop("resolution", 32)
    profile = ic.pop("profile", None)
    if isinstance(profile, dict):
        from .surface import gaussian_profile

        profile = gaussian_profile(profile.get("amplitude", 0.1), profile.get("center", 1.0), profile.get("width", 0.5))
    if "chi_range" in ic:
        ic["chi_range"] = tuple(ic["chi_range"])
    if "bc" in ic:
        ic["bc"] = tuple(ic["bc"])
    ic.setdefault("seed", cfg.seed)
    return seed_surface(kind, resolution, kappa=cfg.kappa, profile=profile, **ic)


@dataclass
class MonitorSeries:
    t: list = field(default_factory=list)
    sup_phi_env: list = field(default_factory=list)
    inf_phi_env: list = field(default_factory=list)
    sup_K: list = field(default_factory=list)
    inf_K: list = field(default_factory=list)
    kK_margin: list = field(default_factory=list)
    min_kappa_minus_K: list = field(default_factory=list)
    sup_H: list = field(default_factory=list)
    sup_h2: list = field(default_factory=list)
    h2_identity_residual: list = field(default_factory=list)
    arctan_form_residual: list = field(default_factory=list)
    metric_ratio_max: list = field(default_factory=list)
    metric_ratio_min: list = field(default_factory=list)
    metric_ratio_bound: list = field(default_factory=list)
    displacement_bound_slack: list = field(default_factory=list)
    two_pos_margin: list = field(default_factory=list)
    sup_lambda: list = field(default_factory=list)
    sup_nu: list = field(default_factory=list)

    CSV_COLUMNS = (
        "t",
        "sup_phi_env",
        "inf_phi_env",
        "sup_K",
        "inf_K",
        "kK_margin",
        "sup_H",
        "metric_ratio_max",
        "metric_ratio_min",
        "displacement_bound_slack",
        "two_pos_margin",
    )

    def as_dict(self) -> dict:
        return {k: [float(v) for v in getattr(self, k)] for k in self.__dataclass_fields__}


class Monitor:
    """Accumulates monitor series along a run.

    Constants fixed from the initial surface: phi0 bounds and C = sqrt(k)
    sup|phi0|. Running constants: sup|lambda| (for the metric-ratio constant
    C' = 2 sup|lambda| sup|phi0|) and sup|nu|_E (for the displacement
    constant C'' = sup|phi0| sup|nu|_E / 2).
    """

    def __init__(self, fields0: SurfaceFields, n: int = 2, band: np.ndarray | None = None):
        self.kappa = fields0.kappa
        self.n = n
        self.band = np.ones(fields0.phi.shape, dtype=bool) if band is None else band
        self.phi0_sup = float(fields0.phi[self.band].max())
        self.phi0_inf = float(fields0.phi[self.band].min())
        self.phi0_abs = max(abs(self.phi0_sup), abs(self.phi0_inf))
        self.C = math.sqrt(self.kappa) * self.phi0_abs
        self.g0inv = np.linalg.inv(fields0.g)
        self.F0 = fields0.F.copy()
        self.prev_F = fields0.F.copy()
        self.prev_t = 0.0
        self.lam_run = 0.0
        self.nu_run = 0.0
        self.K0_inside = bool(np.all(np.abs(fields0.K[self.band]) < self.kappa))
        self.series = MonitorSeries()

    def record(self, t: float, f: SurfaceFields) -> None:
        k = self.kappa
        b = self.band
        s = self.series
        env = f.phi * math.exp(self.n * t)
        s.t.append(t)
        s.sup_phi_env.append(float(env[b].max()))
        s.inf_phi_env.append(float(env[b].min()))
        s.sup_K.append(float(f.K[b].max()))
        s.inf_K.append(float(f.K[b].min()))
        kmk = float((k - f.K[b]).min())
        s.min_kappa_minus_K.append(kmk)
        s.kK_margin.append(kmk - k * math.cos(self.C * math.exp(-2 * t)))
        s.sup_H.append(float(np.abs(f.H[b]).max()))
        h2 = f.lam[..., 0] ** 2 + f.lam[..., 1] ** 2
        s.sup_h2.append(float(h2[b].max()))
        rk = math.sqrt(k)
        ident = (k - f.K) ** 2 * np.tan(rk * f.phi) ** 2 - 2 * k * f.K
        s.h2_identity_residual.append(float(np.abs(k * h2 - ident)[b].max()))
        ok = (k - f.K > 1e-6) & b
        phi_eig = np.arctan(f.lam / rk).sum(axis=-1) / rk
        closed = np.arctan(rk * f.H / np.where(ok, k - f.K, 1.0)) / rk
        s.arctan_form_residual.append(float(np.abs(phi_eig - closed)[ok].max()) if np.any(ok) else 0.0)
        # metric ratio: log-eigenvalues of g(0)^{-1} g(t)
        ev = np.linalg.eigvals(self.g0inv @ f.g).real
        logs = np.log(ev)
        self.lam_run = max(self.lam_run, float(np.abs(f.lam[b]).max()))
        Cp = 2 * self.lam_run * self.phi0_abs
        s.metric_ratio_max.append(float(logs[b].max()))
        s.metric_ratio_min.append(float(logs[b].min()))
        s.metric_ratio_bound.append(Cp * (1 - math.exp(-t)))
        # displacement: consecutive pair and pair from t = 0
        self.nu_run = max(self.nu_run, float(np.linalg.norm(f.nu[b], axis=-1).max()))
        Cpp = 0.5 * self.phi0_abs * self.nu_run
        d_step = np.linalg.norm(f.F - self.prev_F, axis=-1)[b].max()
        d_all = np.linalg.norm(f.F - self.F0, axis=-1)[b].max()
        slack = min(
            Cpp * (math.exp(-2 * self.prev_t) - math.exp(-2 * t)) - d_step,
            Cpp * (1 - math.exp(-2 * t)) - d_all,
        )
        s.displacement_bound_slack.append(float(slack))
        s.sup_lambda.append(float(np.abs(f.lam[b]).max()))
        s.sup_nu.append(float(np.linalg.norm(f.nu[b], axis=-1).max()))
        self.prev_F = f.F.copy()
        self.prev_t = t
        s.two_pos_margin.append(float(np.min(two_positive_margin(f.g[b], f.h[b], k))))

    def constants(self) -> dict:
        return {
            "phi0_sup": self.phi0_sup,
            "phi0_inf": self.phi0_inf,
            "C": self.C,
            "C_metric": 2 * self.lam_run * self.phi0_abs,
            "C_displacement": 0.5 * self.phi0_abs * self.nu_run,
            "K0_inside": self.K0_inside,
            "n": self.n,
            "kappa": self.kappa,
        }


def monitor_verdicts(series: dict, constants: dict, tol: dict | None = None) -> dict:
    """Pass/fail per monitor, recomputed from stored series and tolerances only."""
    tol = dict(TOLERANCES["monitors"]) if tol is None else tol
    t = np.asarray(series["t"])
    if t.size == 0:
        return {}
    n = constants["n"]
    k = constants["kappa"]
    decay = np.exp(-n * t)
    sup_phi = np.asarray(series["sup_phi_env"]) * decay
    inf_phi = np.asarray(series["inf_phi_env"]) * decay
    env_tol = tol["phi_envelope"]
    out = {}
    out["phi_envelope"] = bool(
        np.all(sup_phi <= constants["phi0_sup"] * decay + env_tol) and np.all(inf_phi >= constants["phi0_inf"] * decay - env_tol)
    )
    out["kappa_minus_K"] = bool(np.all(np.asarray(series["kK_margin"]) >= -tol["kappa_minus_K"]))
    out["kappa_minus_K_uniform"] = bool(
        np.all(np.asarray(series["min_kappa_minus_K"]) >= k * math.cos(constants["C"]) - tol["kappa_minus_K"])
    )
    out["h2_identity"] = bool(np.all(np.asarray(series["h2_identity_residual"]) <= tol["h2_identity"]))
    out["arctan_form"] = bool(np.all(np.asarray(series["arctan_form_residual"]) <= tol["arctan_form"]))
    bound = np.asarray(series["metric_ratio_bound"])
    out["metric_ratio"] = bool(
        np.all(np.asarray(series["metric_ratio_max"]) <= bound + tol["metric_ratio"])
        and np.all(np.asarray(series["metric_ratio_min"]) >= -bound - tol["metric_ratio"])
    )
    out["displacement"] = bool(np.all(np.asarray(series["displacement_bound_slack"]) >= -tol["displacement"]))
    if constants.get("K0_inside", False):
        out["two_positivity"] = bool(np.all(np.asarray(series["two_pos_margin"]) > 0))
    return out


@dataclass
class FlowRun:
    config: FlowConfig
    times: list
    snapshots: list  # list of (t, SurfaceMesh)
    monitor: Monitor | None
    final: SurfaceMesh | None
    dt: float
    aborted: str | None = None
    ode: OdeTrajectory | None = None

    def verdicts(self) -> dict:
        if self.monitor is None:
            return {}
        return monitor_verdicts(self.monitor.series.as_dict(), self.monitor.constants())


def run_flow(cfg: FlowConfig, store_every: int | None = None, band: np.ndarray | None = None) -> FlowRun:
    """Advance a configured flow to t_end, recording monitors and snapshots.

    Runtime aborts (non-spacelike node) are caught and reported in
    ``FlowRun.aborted`` together with the partial record.
    """
    cfg.validate()
    if cfg.mode == "ode_umbilic":
        ic = cfg.initial
        lam0 = ic.get("lambda0", 1.0)
        dt = cfg.dt or 1e-3
        traj = umbilic_ode(cfg.n, cfg.kappa, lam0, cfg.t_end, dt, cfg.integrator)
        return FlowRun(cfg, list(traj.t), [], None, None, dt, ode=traj)

    mesh = build_initial_mesh(cfg)
    f0 = assemble_node_geometry(mesh)
    dt = cfg.dt or cfl_dt(mesh, cfg.cfl, f0)
    steps_total = int(math.ceil(cfg.t_end / dt - 1e-9))
    if steps_total > 0:
        dt = cfg.t_end / steps_total
    mon_stride = max(1, int(round(cfg.monitor_every / dt)))
    snap_stride = None if cfg.snapshot_every is None else max(1, int(round(cfg.snapshot_every / dt)))
    monitor = Monitor(f0, cfg.n, band)
    monitor.record(0.0, f0)
    snapshots = [(0.0, mesh)]
    times = [0.0]
    fast = cfg.integrator == "euler" and cfg.speed == "phi"
    step = 0
    aborted = None
    try:
        while step < steps_total:
            stops = [steps_total, (step // mon_stride + 1) * mon_stride]
            if snap_stride:
                stops.append((step // snap_stride + 1) * snap_stride)
            nxt = min(stops)
            if fast:
                mesh = advance_fast(mesh, nxt - step, dt)
            else:
                for _ in range(nxt - step):
                    mesh = mesh_step(mesh, dt, cfg.integrator, cfg.speed)
            step = nxt
            t = step * dt
            if step % mon_stride == 0 or step == steps_total:
                fields = assemble_node_geometry(mesh)
                monitor.record(t, fields)
                times.append(t)
            if snap_stride and (step % snap_stride == 0 or step == steps_total):
                snapshots.append((t, mesh))
    except SpacelikeError as exc:
        aborted = str(exc)
    if not snap_stride and (not snapshots or snapshots[-1][1] is not mesh):
        snapshots.append((step * dt, mesh))
    return FlowRun(cfg, times, snapshots, monitor, mesh, dt, aborted)


def snapshot_sequence(mesh: SurfaceMesh, dt: float, count: int = 3, spacing: int = 10, integrator: str = "rk4", speed=None):
    """``count`` meshes separated by ``spacing`` steps of size ``dt``."""
    out = [mesh]
    for _ in range(count - 1):
        for _ in range(spacing):
            mesh = mesh_step(mesh, dt, integrator, speed)
        out.append(mesh)
    return out


@dataclass
class UmbilicCrossCheck:
    resolution: int
    dx: float
    times: np.ndarray
    phi_error: np.ndarray  # sup over interior nodes of |phi_mesh - phi_ode| per time
    lambda_error: np.ndarray
    umbilicity: np.ndarray  # sup |lambda1 - lambda2|

    @property
    def worst(self) -> float:
        return float(max(self.phi_error.max(), self.lambda_error.max()))


def umbilic_crosscheck(
    resolution: int,
    s: float = 0.3,
    kappa: float = 1.0,
    t_end: float = 1.0,
    sample_every: float = 0.1,
    n_theta: int | None = None,
    bc: tuple[str, str] = ("neumann_ghost", "neumann_ghost"),
) -> UmbilicCrossCheck:
    """Mesh flow of an umbilic slice against the umbilic ODE.

    The ODE runs with RK4 at dt = 1e-3 from the slice's exact principal
    curvature; the mesh run uses the default Euler step.
    """
    cfg = FlowConfig(
        mode="mesh",
        kappa=kappa,
        initial=dict(kind="umbilic_slice", resolution=resolution, s=s, bc=bc, n_theta=n_theta),
        t_end=t_end,
        monitor_every=sample_every,
        snapshot_every=sample_every,
    )
    run = run_flow(cfg)
    if run.aborted:
        raise SpacelikeError(run.aborted)
    lam0 = -s * math.sqrt(kappa) / math.sqrt(1 - s * s)
    ode = umbilic_ode(2, kappa, lam0, t_end, 1e-3)
    times, e_phi, e_lam, umb = [], [], [], []
    for t, m in run.snapshots:
        f = assemble_node_geometry(m)
        b = interior_band(m)
        k = int(round(t / 1e-3))
        lam_ref, phi_ref = float(ode.lam[k]), float(ode.phi[k])
        times.append(t)
        e_phi.append(float(np.abs(f.phi - phi_ref)[b].max()))
        e_lam.append(float(np.abs(f.lam - lam_ref)[b].max()))
        umb.append(float(np.abs(f.lam[..., 0] - f.lam[..., 1])[b].max()))
    mesh0 = run.snapshots[0][1]
    return UmbilicCrossCheck(resolution, mesh0.dchi, np.array(times), np.array(e_phi), np.array(e_lam), np.array(umb))
