"""Residuals of the structural identities of a spacelike surface.

Mesh residuals (Codazzi, Gauss, Simons) are measured on an interior band and
converge to zero under refinement. The Kato identities are pointwise algebra
on (g, h, T) with T a totally symmetric 3-tensor standing in for nabla h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pseudo_euclidean import ContractError
from .surface import SurfaceFields, assemble_node_geometry, interior_band, seed_surface

MIN_INTERIOR = 16


@dataclass
class Residual:
    field: np.ndarray
    sup: float


def _require_resolution(fields: SurfaceFields) -> None:
    n, m = fields.mesh.shape
    if n < MIN_INTERIOR or (not fields.mesh.rotational and m < MIN_INTERIOR):
        raise ContractError(f"mesh too coarse for residuals: need >= {MIN_INTERIOR} nodes per direction, got {n}x{m}")


def gauss_equation_curvature(g, h, kappa: float) -> np.ndarray:
    """R_ijkl = -kappa(g_ik g_jl - g_il g_jk) - h_ik h_jl + h_il h_jk."""

    def wedge(a, b):
        return np.einsum("...ik,...jl->...ijkl", a, b) - np.einsum("...il,...jk->...ijkl", a, b)

    return -kappa * wedge(g, g) - wedge(h, h)


def structure_residual(fields: SurfaceFields, kind: str, band: np.ndarray | None = None) -> Residual:
    _require_resolution(fields)
    if band is None:
        band = interior_band(fields.mesh)
    if kind == "codazzi":
        T = fields.nabla_h
        r = np.abs(T - np.swapaxes(T, -3, -2)).max(axis=(-3, -2, -1))
    elif kind == "gauss":
        R = fields.riemann
        r = np.abs(R - gauss_equation_curvature(fields.g, fields.h, fields.kappa)).max(axis=(-4, -3, -2, -1))
    elif kind == "simons":
        r = np.abs(simons_residual_field(fields)).max(axis=(-4, -3, -2, -1))
    else:
        raise ContractError(f"unknown structure residual {kind!r}")
    r = np.where(band, r, 0.0)
    return Residual(r, float(r.max()))


def simons_residual_field(fields: SurfaceFields) -> np.ndarray:
    """nabla_i nabla_j h_kl - nabla_k nabla_l h_ij - R^m_lki h_mj - R^m_jki h_lm."""
    N2 = fields.nabla2_h
    Rup = np.einsum("...mp,...plki->...mlki", fields.ginv, fields.riemann)
    return (
        N2
        - np.einsum("...klij->...ijkl", N2)
        - np.einsum("...mlki,...mj->...ijkl", Rup, fields.h)
        - np.einsum("...mjki,...lm->...ijkl", Rup, fields.h)
    )


def convergence_orders(errors, ratio: float = 2.0) -> list[float]:
    """Observed orders log(e_k / e_{k+1}) / log(ratio) between successive levels."""
    e = np.asarray(errors, dtype=float)
    return [float(math.log(e[k] / e[k + 1]) / math.log(ratio)) for k in range(len(e) - 1)]


def structure_refinement(kind: str, levels=(16, 32, 64), **seed_kw) -> dict:
    """Refinement study of one structural residual on perturbed slices."""
    kw = dict(amplitude=0.05, mode=2, seed=0)
    kw.update(seed_kw)
    errs = []
    for n in levels:
        mesh = seed_surface("perturbed", n, **kw)
        errs.append(structure_residual(assemble_node_geometry(mesh), kind).sup)
    orders = convergence_orders(errs)
    return {"kind": kind, "levels": list(levels), "residuals": errs, "orders": orders}


# ---------------------------------------------------------------------------
# Kato identities
# ---------------------------------------------------------------------------


@dataclass
class KatoTerms:
    H: np.ndarray
    K: np.ndarray
    dH: np.ndarray  # covector
    dK: np.ndarray
    grad_h2: np.ndarray  # |nabla h|^2
    hc: np.ndarray  # tracefree part
    hc2: np.ndarray  # |hc|^2
    d_hc2: np.ndarray  # nabla |hc|^2
    scale: np.ndarray


def _kato_terms(g, h, T) -> KatoTerms:
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    T = np.asarray(T, dtype=float)
    if g.shape[-1] != 2:
        raise ContractError("Kato identities are two-dimensional")
    sym_err = max(
        np.max(np.abs(T - np.swapaxes(T, -1, -2))),
        np.max(np.abs(T - np.swapaxes(T, -2, -3))),
    )
    if sym_err > 1e-12 * max(1.0, np.max(np.abs(T))):
        raise ContractError("T must be totally symmetric")
    gi = np.linalg.inv(g)
    H = np.einsum("...ij,...ij->...", gi, h)
    hup = gi @ h @ gi
    K = np.linalg.det(h) / np.linalg.det(g)
    dH = np.einsum("...jk,...ijk->...i", gi, T)
    dK = np.einsum("...jk,...ijk->...i", H[..., None, None] * gi - hup, T)
    grad_h2 = np.einsum("...ia,...jb,...kc,...ijk,...abc->...", gi, gi, gi, T, T)
    hc = h - 0.5 * H[..., None, None] * g
    hcup = gi @ hc @ gi
    hc2 = np.einsum("...ij,...ij->...", hc, hcup)
    d_hc2 = 2 * np.einsum("...jk,...ijk->...i", hcup, T - 0.5 * dH[..., :, None, None] * g[..., None, :, :])
    hn = 1.0 + np.einsum("...ij,...ij->...", h, hup)
    scale = hn**2 * (1.0 + grad_h2)
    return KatoTerms(H, K, dH, dK, grad_h2, hc, hc2, d_hc2, scale)


def _norm2(gi, a, b=None):
    b = a if b is None else b
    return np.einsum("...ij,...i,...j->...", gi, a, b)


def kato_check(g, h, T) -> tuple[np.ndarray, np.ndarray]:
    """Residuals of the two-dimensional Kato identity and its (H, K) form.

    Returns ``(r_kato, r_hk)`` divided by the natural scale
    (1 + |h|^2)^2 (1 + |T|^2).
    """
    t = _kato_terms(g, h, T)
    gi = np.linalg.inv(np.asarray(g, dtype=float))
    dH2 = _norm2(gi, t.dH)
    lhs = 2 * t.hc2 * (t.grad_h2 - dH2)
    up_dhc2 = np.einsum("...ij,...j->...i", gi, t.d_hc2)
    up_dH = np.einsum("...ij,...j->...i", gi, t.dH)
    rhs = _norm2(gi, t.d_hc2) - 2 * np.einsum("...ij,...i,...j->...", t.hc, up_dhc2, up_dH)
    r1 = np.abs(lhs - rhs) / t.scale

    hup = gi @ np.asarray(h, dtype=float) @ gi
    A = t.H[..., None, None] * gi - hup
    lhs2 = (t.H**2 - 4 * t.K) * (t.grad_h2 - dH2)
    rhs2 = (
        2 * np.einsum("...ij,...ij->...", A, t.H[..., None, None] * np.einsum("...i,...j->...ij", t.dH, t.dH) - 2 * np.einsum("...i,...j->...ij", t.dH, t.dK))
        - 2 * t.H * _norm2(gi, t.dH, t.dK)
        + 4 * _norm2(gi, t.dK)
    )
    r2 = np.abs(lhs2 - rhs2) / t.scale
    return r1, r2


def kato_tracefree_residual(g, h, T, literal: bool = False) -> np.ndarray:
    """Tracefree form of the Kato identity, scaled.

    In two dimensions a tracefree symmetric hc satisfies
    hc_ik hc^k_j = (|hc|^2 / 2) g_ij, which gives

        2|hc|^2 |nabla hc|^2 = |nabla_i |hc|^2 - hc_ij nabla^j H|^2 + |hc|^2 |nabla H|^2 / 2.

    ``literal=True`` drops the last term (the form that assumes
    hc_ik hc^k_j = |hc|^2 g_ij); it is kept to show that it does not hold.
    """
    t = _kato_terms(g, h, T)
    gi = np.linalg.inv(np.asarray(g, dtype=float))
    dH2 = _norm2(gi, t.dH)
    grad_hc2 = t.grad_h2 - 0.5 * dH2
    v = t.d_hc2 - np.einsum("...ij,...jk,...k->...i", t.hc, gi, t.dH)
    rhs = _norm2(gi, v)
    if not literal:
        rhs = rhs + 0.5 * t.hc2 * dH2
    return np.abs(2 * t.hc2 * grad_hc2 - rhs) / t.scale


def kato_optimal_residual(g, h, T) -> np.ndarray:
    """(2|h|^2 - H^2)|nabla h|^2 = |nabla |h|^2|^2 for T with vanishing trace."""
    t = _kato_terms(g, h, T)
    gi = np.linalg.inv(np.asarray(g, dtype=float))
    hup = gi @ np.asarray(h, dtype=float) @ gi
    h2 = np.einsum("...ij,...ij->...", np.asarray(h, dtype=float), hup)
    d_h2 = 2 * np.einsum("...jk,...ijk->...i", hup, T)
    return np.abs((2 * h2 - t.H**2) * t.grad_h2 - _norm2(gi, d_h2)) / t.scale


def symmetrize3(T) -> np.ndarray:
    T = np.asarray(T, dtype=float)
    perms = ["ijk", "ikj", "jik", "jki", "kij", "kji"]
    return sum(np.einsum(f"...{p}->...ijk", T) for p in perms) / 6.0


def tracefree3(g, T) -> np.ndarray:
    """Remove the trace of a totally symmetric 2D 3-tensor w.r.t. g.

    Subtracts the symmetrised (g (x) w) with w chosen so g^{jk} T_ijk = 0.
    """
    g = np.asarray(g, dtype=float)
    gi = np.linalg.inv(g)
    tr = np.einsum("...jk,...ijk->...i", gi, T)
    # trace of sym(g (x) w) is (n + 2)/3 w = 4/3 w in two dimensions
    w = 0.75 * tr
    S = np.einsum("...ij,...k->...ijk", g, w)
    return T - symmetrize3(S)


def kato_ensemble(rng: np.random.Generator, count: int):
    """Random (g, h, T) draws: g positive definite, h symmetric, T totally symmetric."""
    A = rng.normal(size=(count, 2, 2))
    g = A @ np.swapaxes(A, -1, -2) + 0.3 * np.eye(2)
    B = rng.normal(size=(count, 2, 2))
    h = 0.5 * (B + np.swapaxes(B, -1, -2))
    T = symmetrize3(rng.normal(size=(count, 2, 2, 2)))
    return g, h, T
