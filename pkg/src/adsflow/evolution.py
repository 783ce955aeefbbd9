"""Evolution identities checked by time differencing of short runs.

Each check advances a surface by a few RK4 steps, takes the central time
difference of a field at the middle snapshot and compares it with the
right-hand side of its evolution equation evaluated on that snapshot alone.
Residuals are sup norms over an interior band; a dyadic refinement of
(dx, dt_snapshot) measures the convergence order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angle import (
    angle_gradient_ginv,
    angle_hessian,
    curvature_function_derivs,
    curvature_function_hessian,
    curvature_spec,
    symmetrize_hessian,
)
from .flow import cfl_dt, snapshot_sequence, speed_field
from .pseudo_euclidean import ContractError
from .structure import convergence_orders
from .surface import SurfaceFields, assemble_node_geometry, grad, interior_band, seed_surface

KINDS = ("metric", "shape", "shape_full", "angle", "scalar2d", "gauss_curv", "lemma_g", "hypf")


def _hh(f: SurfaceFields):
    """h_i^k h_kj as a covariant tensor."""
    return f.h @ f.ginv @ f.h


def _phi_hessian(f: SurfaceFields):
    return symmetrize_hessian(angle_hessian(f.g, f.h, f.kappa))


def _quadratic(f: SurfaceFields, A, B4):
    """A^{ij} B^{pq,kl} nabla_i h_kl nabla_j h_pq."""
    T = f.nabla_h
    return np.einsum("...ij,...pqkl,...ikl,...jpq->...", A, B4, T, T)


def _gradient_term(f: SurfaceFields, Gup, G4):
    """(G^{ij} phi^{pq,kl} - sigma^{ij} G^{pq,kl}) nabla_i h_kl nabla_j h_pq."""
    return _quadratic(f, Gup, _phi_hessian(f)) - _quadratic(f, f.sigma_inv, G4)


def _sigma_lap(f: SurfaceFields, u):
    return np.einsum("...ij,...ij->...", f.sigma_inv, f.hessian(u))


def _G_value(spec, f):
    return np.asarray(spec.G(f.H, f.K), dtype=float) * np.ones_like(f.H)


def _field_value(kind: str, f: SurfaceFields, G: str) -> np.ndarray:
    if kind == "metric":
        return f.g
    if kind in ("shape", "shape_full"):
        return f.h
    if kind in ("angle", "hypf"):
        return f.phi
    if kind in ("scalar2d", "lemma_g"):
        return _G_value(curvature_spec(G, f.kappa), f)
    if kind == "gauss_curv":
        return f.K
    raise ContractError(f"unknown evolution kind {kind!r}")


def gauss_curvature_gradient_terms(f: SurfaceFields, literal: bool = False) -> np.ndarray:
    """Explicit expansion of the quadratic gradient terms in the K equation.

    The first coefficient is (kappa^2 - K^2)(H^2 + 2(kappa - K)) / 2; the
    factor 1/2 follows from substituting the (H, K) form of the Kato
    identity. ``literal=True`` uses coefficient 1 instead, which disagrees
    with the general formula and is kept only to document that.
    """
    k = f.kappa
    H, K = f.H, f.K
    D = k * H**2 + (k - K) ** 2
    gi = f.ginv
    A = H[..., None, None] * gi - gi @ f.h @ gi
    dH = grad(f.mesh, H)
    dK = grad(f.mesh, K)
    T = f.nabla_h
    grad_h2 = np.einsum("...ia,...jb,...kc,...ijk,...abc->...", gi, gi, gi, T, T)
    dH2 = np.einsum("...ij,...i,...j->...", gi, dH, dH)
    dHK = np.einsum("...ij,...i,...j->...", gi, dH, dK)
    dK2 = np.einsum("...ij,...i,...j->...", gi, dK, dK)

    def Aq(a, b):
        return np.einsum("...ij,...i,...j->...", A, a, b)

    c1 = 1.0 if literal else 0.5
    E = (
        c1 * (k**2 - K**2) * (H**2 + 2 * (k - K)) * (grad_h2 - dH2)
        - (k**2 - K**2) * H * Aq(dH, dH)
        - 2 * k * H**2 * Aq(dH, dK)
        + 2 * H * (k - K) * Aq(dK, dK)
        - (k - K) ** 2 * (H * dHK - 2 * dK2)
    )
    return E / D**2


def evolution_rhs(kind: str, f: SurfaceFields, speed=None, G: str = "H", literal: bool = False) -> np.ndarray:
    """Right-hand side of the named evolution equation on one snapshot."""
    k = f.kappa
    if kind == "metric":
        return 2 * speed_field(f, speed)[..., None, None] * f.h
    if kind == "shape":
        u = speed_field(f, speed)
        return f.hessian(u) + u[..., None, None] * (_hh(f) - k * f.g)
    if kind not in ("metric", "shape") and speed not in (None, "phi"):
        raise ContractError(f"kind {kind!r} is specific to the angle speed")
    if kind == "angle":
        return _sigma_lap(f, f.phi) - 2 * f.phi
    if kind == "hypf":
        dphi_dg = angle_gradient_ginv(f.g, f.h, k)
        hup = f.ginv @ f.h @ f.ginv
        react = np.einsum("...ij,...ij->...", f.sigma_inv, _hh(f) - k * f.g) - 2 * np.einsum(
            "...kl,...kl->...", dphi_dg, hup
        )
        return _sigma_lap(f, f.phi) + f.phi * react
    if kind == "shape_full":
        s = f.sigma_inv
        g, h, gi = f.g, f.h, f.ginv
        hm = gi @ h  # h^m_i as [m, i]
        N2 = f.nabla2_h
        lap = np.einsum("...kl,...klij->...ij", s, N2)
        quad = np.einsum("...klpq,...ipq,...jkl->...ij", _phi_hessian(f), f.nabla_h, f.nabla_h)
        kap = np.einsum("...kl,...jk,...il->...ij", s, h, g) - np.einsum("...kl,...ij,...kl->...ij", s, h, g)
        kap = kap + np.einsum("...kl,...kl,...ij->...ij", s, h, g) - np.einsum("...kl,...il,...jk->...ij", s, h, g)
        hh = _hh(f)  # h_i^m h_mj
        cub = (
            -np.einsum("...kl,...jk,...il->...ij", s, hh, h)
            + np.einsum("...kl,...ij,...kl->...ij", s, hh, h)
            - np.einsum("...kl,...kl,...ij->...ij", s, hh, h)
            + np.einsum("...kl,...il,...jk->...ij", s, hh, h)
        )
        del hm
        phi = f.phi[..., None, None]
        return lap + quad - k * kap + cub + phi * hh - k * phi * g
    if kind in ("scalar2d", "lemma_g"):
        spec = curvature_spec(G, k)
        GH, GK, Gup, Gdg = curvature_function_derivs(spec, f.g, f.h)
        G4 = curvature_function_hessian(spec, f.g, f.h)
        Gval = _G_value(spec, f)
        grad_terms = _gradient_term(f, Gup, G4)
        if kind == "scalar2d":
            H, K = f.H, f.K
            D = k * H**2 + (k - K) ** 2
            return (
                _sigma_lap(f, Gval)
                + grad_terms
                + (k + K) * (H**2 - 4 * K) / D * (H * GH - (k - K) * GK)
                - f.phi * ((H**2 + 2 * (k - K)) * GH + H * (k + K) * GK)
            )
        N2 = f.nabla2_h
        swap = np.einsum("...ijkl->...klij", N2)
        commutator = np.einsum("...ij,...kl,...ijkl->...", Gup, f.sigma_inv, N2 - swap)
        hup = f.ginv @ f.h @ f.ginv
        react = np.einsum("...ij,...ij->...", Gup, _hh(f) - k * f.g) - 2 * np.einsum("...kl,...kl->...", Gdg, hup)
        return _sigma_lap(f, Gval) + commutator + grad_terms + f.phi * react
    if kind == "gauss_curv":
        H, K = f.H, f.K
        D = k * H**2 + (k - K) ** 2
        return (
            _sigma_lap(f, K)
            + gauss_curvature_gradient_terms(f, literal=literal)
            - (k + K) * (H**2 - 4 * K) * (k - K) / D
            - (k + K) * H * f.phi
        )
    raise ContractError(f"unknown evolution kind {kind!r}")


@dataclass
class EvolutionCheck:
    kind: str
    lhs: np.ndarray
    rhs: np.ndarray
    residual: float
    band: np.ndarray


def residual_from_snapshots(kind, fields_seq, delta, speed=None, G="H", literal=False, band=None) -> EvolutionCheck:
    """Central time difference at the middle of three snapshots vs the RHS."""
    if len(fields_seq) < 3:
        raise ContractError("evolution residual needs at least 3 snapshots")
    mid = len(fields_seq) // 2
    fa, fm, fb = fields_seq[mid - 1], fields_seq[mid], fields_seq[mid + 1]
    lhs = (_field_value(kind, fb, G) - _field_value(kind, fa, G)) / (2 * delta)
    rhs = evolution_rhs(kind, fm, speed, G, literal)
    if band is None:
        band = interior_band(fm.mesh)
    diff = np.abs(lhs - rhs)
    diff = diff.reshape(diff.shape[:2] + (-1,)).max(axis=-1)
    return EvolutionCheck(kind, lhs, rhs, float(diff[band].max()), band)


def run_snapshots(mesh, spacing: int = 10, count: int = 3, cfl: float = 0.5, speed=None):
    """Snapshots for a residual study; returns (fields list, delta)."""
    f0 = assemble_node_geometry(mesh)
    dt = cfl_dt(mesh, cfl, f0)
    meshes = snapshot_sequence(mesh, dt, count, spacing, "rk4", speed)
    return [f0] + [assemble_node_geometry(m) for m in meshes[1:]], spacing * dt


def evolution_refinement(
    kinds,
    levels=(64, 128, 256),
    speed=None,
    G_list=("H", "K"),
    literal: bool = False,
    seed_kind: str = "perturbed",
    spacing: int = 2,
    band_fraction: float = 0.3,
    **seed_kw,
) -> dict:
    """Residuals and orders for several kinds sharing one set of runs per level.

    ``kinds`` may contain ``scalar2d`` / ``lemma_g`` which expand over
    ``G_list``. Returns {label: {"residuals": [...], "orders": [...]}}.
    """
    kw = dict(amplitude=0.05, mode=2, seed=0)
    kw.update(seed_kw)
    labels = []
    for kind in kinds:
        if kind in ("scalar2d", "lemma_g"):
            labels += [(kind, G) for G in G_list]
        else:
            labels.append((kind, "H"))
    out = {f"{k}({G})" if k in ("scalar2d", "lemma_g") else k: {"residuals": []} for k, G in labels}
    for n in levels:
        mesh = seed_surface(seed_kind, n, **kw)
        seq, delta = run_snapshots(mesh, spacing=spacing, speed=speed)
        band = interior_band(seq[1].mesh, band_fraction)
        for kind, G in labels:
            key = f"{kind}({G})" if kind in ("scalar2d", "lemma_g") else kind
            out[key]["residuals"].append(residual_from_snapshots(kind, seq, delta, speed, G, literal, band).residual)
    for v in out.values():
        v["orders"] = convergence_orders(v["residuals"])
    return out
