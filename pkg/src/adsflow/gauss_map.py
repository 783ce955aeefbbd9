"""Gauss maps of spacelike surfaces in AdS_3 into H_{1/sqrt2} x H_{1/sqrt2}.

The self-dual and anti-self-dual components are built from six symplectic
forms on R^4_2. This module also checks the Lagrangian structure of the
pair map and its evolution under a normal flow. Everything is stated for
curvature -1; meshes with another kappa are rescaled by sqrt(kappa) first,
which leaves the Gauss map itself unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pseudo_euclidean import SIGNATURES, ContractError, inner, lorentz_cross
from .structure import convergence_orders
from .surface import SurfaceFields, assemble_node_geometry, grad, interior_band, seed_surface

SQRT2 = math.sqrt(2.0)
DUALITIES = ("+", "-")

# columns are the images of e1..e4
_IMAGES = {
    (1, "+"): [(4, 1), (3, -1), (2, -1), (1, 1)],
    (2, "+"): [(3, -1), (4, -1), (1, -1), (2, -1)],
    (3, "+"): [(2, 1), (1, -1), (4, -1), (3, 1)],
    (1, "-"): [(4, -1), (3, -1), (2, -1), (1, -1)],
    (2, "-"): [(3, -1), (4, 1), (1, -1), (2, 1)],
    (3, "-"): [(2, 1), (1, -1), (4, 1), (3, -1)],
}

# the same forms written as sums of c * e_a ^ e_b
_WEDGES = {
    (1, "+"): [(1, 2, 3), (1, 4, 1)],
    (2, "+"): [(1, 1, 3), (1, 2, 4)],
    (3, "+"): [(1, 1, 2), (1, 3, 4)],
    (1, "-"): [(1, 2, 3), (-1, 4, 1)],
    (2, "-"): [(1, 1, 3), (-1, 2, 4)],
    (3, "-"): [(1, 1, 2), (-1, 3, 4)],
}

# Relative sign of the per-factor complex structure X -> s sqrt2 (p x X).
# Of the four choices only these make the pulled-back Kaehler form vanish
# and the two evolution relations hold with the stated signs.
FACTOR_SIGNS = {"+": 1.0, "-": -1.0}


def _check_id(A: int, duality: str) -> None:
    if A not in (1, 2, 3) or duality not in DUALITIES:
        raise ContractError(f"no symplectic form ({A}, {duality!r})")


def endomorphism(A: int, duality: str) -> np.ndarray:
    """Matrix of E^A_{duality}; column i is the image of e_{i+1}."""
    _check_id(A, duality)
    E = np.zeros((4, 4))
    for col, (row, sign) in enumerate(_IMAGES[(A, duality)]):
        E[row - 1, col] = sign
    return E


def form_matrix(A: int, duality: str) -> np.ndarray:
    """Omega with omega(u, v) = u^T Omega v = <E u, v>."""
    return endomorphism(A, duality).T * SIGNATURES[4]


def symplectic_eval(A: int, duality: str, u, v, route: str = "wedge") -> np.ndarray:
    """omega^A_{duality}(u, v), from the wedge expansion or from <E u, v>."""
    _check_id(A, duality)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if route == "endo":
        return inner(u @ endomorphism(A, duality).T, v)
    if route != "wedge":
        raise ContractError(f"unknown route {route!r}")
    out = 0.0
    for c, a, b in _WEDGES[(A, duality)]:
        out = out + c * (u[..., a - 1] * v[..., b - 1] - u[..., b - 1] * v[..., a - 1])
    return out


def endo_algebra_residual() -> float:
    """Largest entry error over the displayed products and squares, both dualities."""
    I = np.eye(4)
    worst = 0.0
    for d in DUALITIES:
        E1, E2, E3 = (endomorphism(A, d) for A in (1, 2, 3))
        checks = [E1 @ E2 - E3, E2 @ E1 + E3, E1 @ E1 - I, E2 @ E2 - I, E3 @ E3 + I]
        worst = max(worst, max(float(np.abs(c).max()) for c in checks))
    return worst


def orientation_dets(V) -> dict:
    """det{V, E1 V, E2 V, E3 V} for each duality (positive for +, negative for -)."""
    V = np.asarray(V, dtype=float)
    out = {}
    for d in DUALITIES:
        cols = [V] + [V @ endomorphism(A, d).T for A in (1, 2, 3)]
        out[d] = np.linalg.det(np.stack(cols, axis=-1))
    return out


def decomp_residual(e, V, W) -> np.ndarray:
    """Largest deviation of either expansion from <V, W>, relative to |V| |W|.

    ``e`` must be a spacelike unit vector.
    """
    e, V, W = (np.asarray(x, dtype=float) for x in (e, V, W))
    ref = inner(V, W)
    ee = inner(e, V) * inner(e, W)
    # max-abs norms: squaring would underflow for tiny vectors
    scale = np.maximum(np.abs(V).max(axis=-1) * np.abs(W).max(axis=-1), 1e-300)
    worst = np.zeros_like(np.asarray(ref, dtype=float))
    for d in DUALITIES:
        w = [symplectic_eval(A, d, e, V) * symplectic_eval(A, d, e, W) for A in (1, 2, 3)]
        worst = np.maximum(worst, np.abs(-w[0] - w[1] + w[2] + ee - ref) / scale)
    return worst


def random_unit_spacelike(rng: np.random.Generator, size: int) -> np.ndarray:
    """Random vectors with <e, e> = 1, by rejection from Gaussian draws."""
    out = np.empty((0, 4))
    while len(out) < size:
        e = rng.standard_normal((2 * size, 4))
        q = inner(e, e)
        keep = q > 1e-2
        out = np.concatenate([out, e[keep] / np.sqrt(q[keep])[:, None]])
    return out[:size]


# ---------------------------------------------------------------------------
# Gauss map evaluation
# ---------------------------------------------------------------------------


@dataclass
class GaussMapField:
    """Both components at every node, shapes (N, M, 3)."""

    plus: np.ndarray
    minus: np.ndarray
    orientation: np.ndarray  # +1 where the coordinate frame (d_chi, d_theta) is used as is

    @property
    def stacked(self) -> np.ndarray:
        """(N, M, 2, 3) with factor index 0 = plus, 1 = minus."""
        return np.stack([self.plus, self.minus], axis=-2)

    def constraint_residual(self) -> float:
        return float(max(np.abs(inner(G, G) + 0.5).max() for G in (self.plus, self.minus)))


def _orthonormal_frame(T1, T2, tol: float = 1e-12):
    n1 = np.asarray(inner(T1, T1))
    if np.any(n1 <= tol):
        raise ContractError("degenerate tangent frame")
    e1 = T1 / np.sqrt(n1)[..., None]
    r = T2 - np.asarray(inner(T2, e1))[..., None] * e1
    n2 = np.asarray(inner(r, r))
    if np.any(n2 <= tol * np.maximum(inner(T2, T2), 1.0)):
        raise ContractError("degenerate tangent frame")
    return e1, r / np.sqrt(n2)[..., None]


def gauss_map_from_frame(T1, T2) -> GaussMapField:
    """Gauss maps of the planes spanned by (T1, T2), oriented so G^3 > 0."""
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    e1, e2 = _orthonormal_frame(T1, T2)
    comps = {d: np.stack([symplectic_eval(A, d, e1, e2) for A in (1, 2, 3)], axis=-1) / SQRT2 for d in DUALITIES}
    sign = np.where(comps["+"][..., 2] >= 0, 1.0, -1.0)
    plus = comps["+"] * sign[..., None]
    minus = comps["-"] * sign[..., None]
    if np.any(minus[..., 2] <= 0):
        raise ContractError("Gauss map components lie on opposite sheets; tangent plane not spacelike")
    return GaussMapField(plus, minus, sign)


def gauss_map_eval(fields: SurfaceFields) -> GaussMapField:
    """Gauss maps at every node of an assembled surface.

    The frame is scaled by sqrt(kappa) to land on the unit quadric; the
    orthonormalised frame makes this a no-op for G, but keeps the
    convention explicit.
    """
    rk = math.sqrt(fields.kappa)
    T1, T2 = fields.tangents
    return gauss_map_from_frame(rk * T1, rk * T2)


def gauss_map_area_form(T1, T2) -> GaussMapField:
    """Second route: omega(T1, T2) / (sqrt2 sqrt det g) without orthonormalising."""
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    det = np.asarray(inner(T1, T1) * inner(T2, T2) - inner(T1, T2) ** 2)
    if np.any(det <= 0):
        raise ContractError("degenerate tangent frame")
    root = np.sqrt(det)
    comps = {d: np.stack([symplectic_eval(A, d, T1, T2, route="endo") for A in (1, 2, 3)], axis=-1) / (SQRT2 * root[..., None]) for d in DUALITIES}
    sign = np.sign(comps["+"][..., 2])
    return GaussMapField(comps["+"] * sign[..., None], comps["-"] * sign[..., None], sign)


# ---------------------------------------------------------------------------
# product structure on H x H
# ---------------------------------------------------------------------------


def complex_structure(p, X, duality: str = "+") -> np.ndarray:
    """Per-factor J_p X = s sqrt2 (p x X) on T_p H_{1/sqrt2}."""
    return FACTOR_SIGNS[duality] * SQRT2 * lorentz_cross(p, X)


def product_J(G, X) -> np.ndarray:
    """J on the product; G and X carry a factor axis of length 2 before the last."""
    return np.stack([complex_structure(G[..., i, :], X[..., i, :], d) for i, d in enumerate(DUALITIES)], axis=-2)


def product_inner(X, Y) -> np.ndarray:
    """Product metric: Minkowski inner product summed over both factors."""
    return inner(X, Y).sum(axis=-1)


# ---------------------------------------------------------------------------
# static residuals
# ---------------------------------------------------------------------------

STATIC_KINDS = ("endo_algebra", "decomp", "induced_metric", "tau_equals_dphi", "lagrangian")
MESH_KINDS = ("induced_metric", "tau_equals_dphi", "lagrangian")


@dataclass
class GaussmapResidual:
    kind: str
    sup: float
    field: np.ndarray | None = None


def induced_metric(fields: SurfaceFields, gm: GaussMapField | None = None) -> np.ndarray:
    """Pullback of the product metric by finite differences of G, shape (N, M, 2, 2)."""
    gm = gauss_map_eval(fields) if gm is None else gm
    dG = grad(fields.mesh, gm.stacked)  # [..., k, factor, comp]
    return np.einsum("...ifa,...jfa,a->...ij", dG, dG, SIGNATURES[3])


def tau_form(fields: SurfaceFields) -> np.ndarray:
    """tau_k = sigma^{ij} nabla_k h_ij."""
    return np.einsum("...ij,...kij->...k", fields.sigma_inv, fields.nabla_h)


def kaehler_pullback(fields: SurfaceFields, gm: GaussMapField | None = None) -> np.ndarray:
    """<J d_chi G, d_theta G> / sqrt(det g) at every node."""
    gm = gauss_map_eval(fields) if gm is None else gm
    dG = grad(fields.mesh, gm.stacked)
    w = product_inner(product_J(gm.stacked, dG[:, :, 0]), dG[:, :, 1])
    return w / np.sqrt(np.linalg.det(fields.g))


def gaussmap_residual(
    kind: str,
    fields: SurfaceFields | None = None,
    gm: GaussMapField | None = None,
    band: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
    count: int = 10_000,
) -> GaussmapResidual:
    """Residual of one Gauss-map identity.

    ``endo_algebra`` and ``decomp`` are algebraic (``decomp`` draws ``count``
    random triples from ``rng``); the mesh kinds need assembled fields and
    measure sup norms over the interior band, normalised to kappa = 1.
    """
    if kind == "endo_algebra":
        return GaussmapResidual(kind, endo_algebra_residual())
    if kind == "decomp":
        rng = np.random.default_rng(0) if rng is None else rng
        e = random_unit_spacelike(rng, count)
        V = rng.standard_normal((count, 4))
        W = rng.standard_normal((count, 4))
        r = decomp_residual(e, V, W)
        return GaussmapResidual(kind, float(r.max()), r)
    if kind not in MESH_KINDS:
        raise ContractError(f"unknown Gauss-map residual kind {kind!r}")
    if fields is None:
        raise ContractError(f"{kind} needs assembled fields")
    k = fields.kappa
    band = interior_band(fields.mesh) if band is None else band
    if kind == "induced_metric":
        # rescaled to kappa = 1: g -> k g, h -> sqrt(k) h, so sigma -> kg + h g^-1 h
        diff = induced_metric(fields, gm) - fields.sigma
        r = np.abs(diff).reshape(diff.shape[:2] + (-1,)).max(axis=-1)
    elif kind == "tau_equals_dphi":
        diff = tau_form(fields) - grad(fields.mesh, fields.phi)
        r = np.abs(diff).max(axis=-1) * math.sqrt(k)
    else:
        r = np.abs(kaehler_pullback(fields, gm)) * k
    return GaussmapResidual(kind, float(r[band].max()), r)


def gaussmap_refinement(kinds=MESH_KINDS, levels=(32, 64, 128), seed_kind: str = "perturbed", **seed_kw) -> dict:
    """Sup residuals and orders of the mesh kinds on a refinement sequence."""
    kw = dict(amplitude=0.05, mode=2, seed=0)
    kw.update(seed_kw)
    out = {kind: {"residuals": []} for kind in kinds}
    for n in levels:
        f = assemble_node_geometry(seed_surface(seed_kind, n, **kw))
        gm = gauss_map_eval(f)
        for kind in kinds:
            out[kind]["residuals"].append(gaussmap_residual(kind, f, gm).sup)
    for v in out.values():
        v["orders"] = convergence_orders(v["residuals"])
    return out


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------


@dataclass
class GaussmapFlowCheck:
    evolution: float  # sup |G_t - (J dG + dG W) grad^sigma f|
    tangent_relation: float  # sup |<G_t, D_k G> - g^{ml} h_lk d_m f|
    complex_relation: float  # sup |<G_t, J D_k G> - d_k f|
    sup_dGdt: float
    sup_tangential: float  # sup |dG(W grad^sigma f)|, observed only


def gaussmap_flow_residual(fields_seq, delta: float, speed=None, band: np.ndarray | None = None) -> GaussmapFlowCheck:
    """Central time difference of G at the middle snapshot against the evolution law."""
    from .flow import speed_field

    if len(fields_seq) < 3:
        raise ContractError("Gauss-map flow residual needs at least 3 snapshots")
    mid = len(fields_seq) // 2
    fa, fm, fb = fields_seq[mid - 1], fields_seq[mid], fields_seq[mid + 1]
    if not math.isclose(fm.kappa, 1.0):
        raise ContractError("Gauss-map evolution is checked at kappa = 1")
    Ga, Gm, Gb = (gauss_map_eval(f).stacked for f in (fa, fm, fb))
    Gt = (Gb - Ga) / (2 * delta)
    band = interior_band(fm.mesh) if band is None else band
    dG = grad(fm.mesh, Gm)  # [..., k, factor, comp]
    u = speed_field(fm, speed)
    du = grad(fm.mesh, u)
    X = np.einsum("...kl,...l->...k", fm.sigma_inv, du)
    WX = np.einsum("...kl,...l->...k", fm.W, X)
    dGX = np.einsum("...k,...kfa->...fa", X, dG)
    tang = np.einsum("...k,...kfa->...fa", WX, dG)
    rhs = product_J(Gm, dGX) + tang
    ev = np.abs(Gt - rhs).reshape(Gt.shape[:2] + (-1,)).max(axis=-1)
    r1 = np.abs(product_inner(Gt[:, :, None], dG) - np.einsum("...lk,...ml,...m->...k", fm.h, fm.ginv, du)).max(axis=-1)
    JdG = product_J(np.broadcast_to(Gm[:, :, None], dG.shape), dG)
    r2 = np.abs(product_inner(Gt[:, :, None], JdG) - du).max(axis=-1)
    tn = np.linalg.norm(tang.reshape(tang.shape[:2] + (-1,)), axis=-1)
    gt = np.abs(Gt).reshape(Gt.shape[:2] + (-1,)).max(axis=-1)
    return GaussmapFlowCheck(
        float(ev[band].max()),
        float(r1[band].max()),
        float(r2[band].max()),
        float(gt[band].max()),
        float(tn[band].max()),
    )


def gaussmap_flow_refinement(levels=(32, 64, 128), spacing: int = 2, speed=None, seed_kind: str = "perturbed", **seed_kw) -> dict:
    """Residuals and orders of the evolution law and both relations."""
    from .evolution import run_snapshots

    kw = dict(amplitude=0.05, mode=2, seed=0) if seed_kind == "perturbed" else {}
    kw.update(seed_kw)
    keys = ("evolution", "tangent_relation", "complex_relation", "sup_dGdt", "sup_tangential")
    out = {k: {"residuals": []} for k in keys}
    for n in levels:
        seq, delta = run_snapshots(seed_surface(seed_kind, n, **kw), spacing=spacing, speed=speed)
        chk = gaussmap_flow_residual(seq, delta, speed)
        for k in keys:
            out[k]["residuals"].append(getattr(chk, k))
    for v in out.values():
        v["orders"] = convergence_orders(v["residuals"])
    return out


def frozen_check(levels=(16, 32, 64), s: float = 0.3, spacing: int = 2, floor: float | None = None) -> dict:
    """Time derivative of G along an umbilic-slice run.

    The equidistant family has a constant Gauss map, and with mirrored ends
    the discrete flow keeps the slice exactly equidistant, so sup|G_t| sits
    at the rounding floor. Passes if every level is below the floor or the
    sequence decays at the gating order.
    """
    from .tolerances import TOLERANCES

    floor = TOLERANCES["gaussmap"]["frozen_floor"] if floor is None else floor
    r = gaussmap_flow_refinement(levels, spacing, None, "umbilic_slice", s=s, bc=("neumann_ghost", "neumann_ghost"))
    sups = r["sup_dGdt"]["residuals"]
    orders = r["sup_dGdt"]["orders"]
    ok = all(v <= floor for v in sups) or min(orders) >= TOLERANCES["orders"]["gaussmap_flow"]
    return {"residuals": sups, "orders": orders, "floor": floor, "passed": bool(ok)}
