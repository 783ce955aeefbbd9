"""Pointwise calculus of the Lagrangian angle and the sigma tensor.

The angle is evaluated from the characteristic polynomial of the scaled
Weingarten map ``X = g^{-1} h / sqrt(kappa)``: with ``s_k`` its elementary
symmetric values,

    a = s1 - s3 + s5 - ...,   b = s0 - s2 + s4 - ...,

and ``sqrt(kappa) * phi = atan2(a, b) + 2 pi * winding``. Eigenvalues are
never formed on this path.  Everything broadcasts over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pseudo_euclidean import ContractError, _check_positive_definite


@dataclass
class AngleEval:
    phi: np.ndarray | float
    s: np.ndarray  # (..., n+1): s_0 .. s_n
    a: np.ndarray | float
    b: np.ndarray | float
    winding: np.ndarray | int = 0


def _as_pair(g, h):
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape[-1] != g.shape[-2] or h.shape[-2:] != g.shape[-2:]:
        raise ContractError("g and h must be n x n")
    return g, h


def elementary_symmetric(X) -> np.ndarray:
    """Elementary symmetric functions of the eigenvalues of X (Faddeev-LeVerrier).

    Returns ``s`` with ``s[..., k] = e_k``. Works for non-symmetric X too,
    which the finite-difference derivative checks rely on.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    s = np.zeros(X.shape[:-2] + (n + 1,))
    s[..., 0] = 1.0
    if n == 1:
        s[..., 1] = X[..., 0, 0]
        return s
    if n == 2:
        s[..., 1] = X[..., 0, 0] + X[..., 1, 1]
        s[..., 2] = X[..., 0, 0] * X[..., 1, 1] - X[..., 0, 1] * X[..., 1, 0]
        return s
    eye = np.eye(n)
    M = np.zeros_like(X)
    c_prev = 1.0  # coefficient of lambda^n
    for k in range(1, n + 1):
        M = X @ M + (c_prev[..., None, None] if np.ndim(c_prev) else c_prev) * eye
        c = -np.einsum("...ii->...", X @ M) / k
        # char poly coefficient of lambda^{n-k} is (-1)^k e_k
        s[..., k] = (-1) ** k * c
        c_prev = c
    return s


def _ab(s: np.ndarray):
    n = s.shape[-1] - 1
    a = np.zeros(s.shape[:-1])
    b = np.zeros(s.shape[:-1])
    for k in range(n + 1):
        sign = 1.0 if (k // 2) % 2 == 0 else -1.0
        if k % 2:
            a = a + sign * s[..., k]
        else:
            b = b + sign * s[..., k]
    return a, b


def angle_from_mixed(X, kappa: float, prior=None) -> AngleEval:
    """Angle of a mixed tensor ``X = g^{-1} h`` (unscaled)."""
    if kappa <= 0:
        raise ContractError("kappa must be positive")
    X = np.asarray(X, dtype=float)
    n = X.shape[-1]
    rk = math.sqrt(kappa)
    s = elementary_symmetric(X / rk)
    a, b = _ab(s)
    base = np.arctan2(a, b)
    if n <= 2:
        winding = np.zeros(np.shape(base), dtype=int)
    else:
        bound = n * math.pi / 2
        ks = np.arange(-(n // 2) - 1, (n // 2) + 2)
        cand = base[..., None] + 2 * math.pi * ks
        valid = np.abs(cand) < bound
        if prior is None:
            if np.any(valid.sum(axis=-1) > 1):
                raise ContractError(
                    "angle branch is ambiguous for n >= 3; supply a prior value "
                    "or use angle_by_continuation"
                )
            winding = ks[np.argmax(valid, axis=-1)]
        else:
            target = rk * np.asarray(prior, dtype=float)
            dist = np.where(valid, np.abs(cand - target[..., None]), np.inf)
            winding = ks[np.argmin(dist, axis=-1)]
    phi = (base + 2 * math.pi * winding) / rk
    if np.ndim(phi) == 0:
        return AngleEval(float(phi), s, float(a), float(b), int(winding))
    return AngleEval(phi, s, a, b, winding)


def smooth_angle(g, h, kappa: float, prior: AngleEval | float | None = None) -> AngleEval:
    """Lagrangian angle (1/sqrt k) sum arctan(lambda_i / sqrt k) via a, b."""
    g, h = _as_pair(g, h)
    _check_positive_definite(g)
    if isinstance(prior, AngleEval):
        prior = prior.phi
    return angle_from_mixed(np.linalg.solve(g, h), kappa, prior)


def angle_by_continuation(g, h, kappa: float, max_depth: int = 40) -> AngleEval:
    """Angle for n >= 3 by continuation along ``t h`` from the maximal point h = 0.

    Steps are bisected until consecutive values differ by less than pi/4,
    so the branch choice at each step is unambiguous.
    """
    g, h = _as_pair(g, h)
    _check_positive_definite(g)
    X = np.linalg.solve(g, h)
    if X.ndim > 2:
        out = [angle_by_continuation(gg, hh, kappa, max_depth) for gg, hh in zip(g.reshape(-1, *g.shape[-2:]), h.reshape(-1, *h.shape[-2:]))]
        shape = X.shape[:-2]
        phi = np.array([o.phi for o in out]).reshape(shape)
        return AngleEval(
            phi,
            np.array([o.s for o in out]).reshape(shape + (X.shape[-1] + 1,)),
            np.array([o.a for o in out]).reshape(shape),
            np.array([o.b for o in out]).reshape(shape),
            np.array([o.winding for o in out]).reshape(shape),
        )

    def walk(t0, phi0, t1, depth):
        ev = angle_from_mixed(t1 * X, kappa, prior=phi0)
        if abs(ev.phi - phi0) * math.sqrt(kappa) < math.pi / 4 or depth >= max_depth:
            return ev
        tm = 0.5 * (t0 + t1)
        mid = walk(t0, phi0, tm, depth + 1)
        return walk(tm, mid.phi, t1, depth + 1)

    ev = angle_from_mixed(0.0 * X, kappa, prior=0.0)
    ts = np.linspace(0.0, 1.0, 9)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        ev = walk(t0, ev.phi, t1, 0)
    return ev


def angle_by_eigenvalues(g, h, kappa: float) -> np.ndarray:
    """Reference path: (1/sqrt k) sum arctan(lambda_i/sqrt k) from eigenvalues.

    Only used as a test oracle.
    """
    from scipy.linalg import eigh

    g, h = _as_pair(g, h)
    rk = math.sqrt(kappa)
    if g.ndim == 2:
        lam = eigh(0.5 * (h + h.T), g, eigvals_only=True)
        return float(np.sum(np.arctan(lam / rk)) / rk)
    flat_g = g.reshape(-1, *g.shape[-2:])
    flat_h = h.reshape(-1, *h.shape[-2:])
    out = np.array([np.sum(np.arctan(eigh(0.5 * (b + b.T), a, eigvals_only=True) / rk)) for a, b in zip(flat_g, flat_h)])
    return out.reshape(g.shape[:-2]) / rk


def sigma_forms(g, h, kappa: float):
    """Return (sigma, sigma_inv) with sigma_ij = kappa g_ij + h_i^l h_lj."""
    g, h = _as_pair(g, h)
    ginv = np.linalg.inv(g)
    sigma = kappa * g + h @ ginv @ h
    return sigma, np.linalg.inv(sigma)


def sigma_inverse_closed_form(g, h, kappa: float) -> np.ndarray:
    """Two-dimensional formula [(k - K + H^2) g^ij - H h^ij] / (k H^2 + (k - K)^2)."""
    g, h = _as_pair(g, h)
    if g.shape[-1] != 2:
        raise ContractError("closed form sigma inverse is two-dimensional")
    ginv = np.linalg.inv(g)
    X = ginv @ h
    H = np.einsum("...ii->...", X)
    K = np.linalg.det(X)
    hup = X @ ginv
    den = kappa * H**2 + (kappa - K) ** 2
    return ((kappa - K + H**2)[..., None, None] * ginv - H[..., None, None] * hup) / den[..., None, None]


def angle_gradient_h(g, h, kappa: float) -> np.ndarray:
    """d phi / d h_kl, which is sigma^{kl}."""
    return sigma_forms(g, h, kappa)[1]


def angle_gradient_ginv(g, h, kappa: float) -> np.ndarray:
    """d phi / d g^{kl} = g_ik h_jl sigma^{ij}."""
    g, h = _as_pair(g, h)
    sinv = sigma_forms(g, h, kappa)[1]
    return np.swapaxes(g, -1, -2) @ sinv @ h


def angle_hessian(g, h, kappa: float) -> np.ndarray:
    """phi^{pq,kl} = -(sigma^{pk} sigma^{qj} + sigma^{qk} sigma^{pj}) h^l_j.

    Returned as an array indexed [..., p, q, k, l]. Only the part symmetric
    in (k, l) is a derivative along symmetric h; contractions with
    Codazzi-symmetric tensors never see the rest.
    """
    g, h = _as_pair(g, h)
    ginv = np.linalg.inv(g)
    sinv = np.linalg.inv(kappa * g + h @ ginv @ h)
    # M^{ql} = sigma^{qj} h^l_j = (sigma^{-1} h g^{-1})^{ql}
    M = sinv @ h @ ginv
    return -(np.einsum("...pk,...ql->...pqkl", sinv, M) + np.einsum("...qk,...pl->...pqkl", sinv, M))


def symmetrize_hessian(T: np.ndarray) -> np.ndarray:
    """Average over p<->q and k<->l."""
    T = 0.5 * (T + np.swapaxes(T, -1, -2))
    return 0.5 * (T + np.swapaxes(T, -3, -4))


def weingarten_powers(g, h, r: int) -> np.ndarray:
    """h^(0) = g, h^(1) = h, h^(r) = h^(r-1) g^{-1} h."""
    if r < 0:
        raise ContractError("power must be non-negative")
    g, h = _as_pair(g, h)
    if r == 0:
        return g.copy()
    out = h.copy()
    X = np.linalg.solve(g, h)
    for _ in range(r - 1):
        out = out @ X
    return out


def two_positive_margin(g, h, kappa: float) -> np.ndarray | float:
    """Trace of S = kappa g - h g^{-1} h relative to sigma.

    Equals 2(kappa^2 - K^2) / ((kappa + l1^2)(kappa + l2^2)) in two dimensions.
    """
    g, h = _as_pair(g, h)
    if g.shape[-1] != 2:
        raise ContractError("two-positivity margin is defined for surfaces")
    hh = h @ np.linalg.inv(g) @ h
    S = kappa * g - hh
    sigma = kappa * g + hh
    out = np.einsum("...ii->...", np.linalg.solve(sigma, S))
    return float(out) if np.ndim(out) == 0 else out


# -- curvature functions G(H, K) -------------------------------------------


@dataclass
class CurvatureFunctionSpec:
    """A smooth function of (H, K) with its first and second partials.

    Second partials default to zero, which is exact for G = H and G = K.
    """

    name: str
    G: Callable
    G_H: Callable
    G_K: Callable
    G_HH: Callable = field(default=lambda H, K: 0.0 * H)
    G_HK: Callable = field(default=lambda H, K: 0.0 * H)
    G_KK: Callable = field(default=lambda H, K: 0.0 * H)


MEAN_CURVATURE = CurvatureFunctionSpec(
    "H", lambda H, K: H, lambda H, K: 1.0 + 0.0 * H, lambda H, K: 0.0 * H
)
GAUSS_CURVATURE = CurvatureFunctionSpec(
    "K", lambda H, K: K, lambda H, K: 0.0 * H, lambda H, K: 1.0 + 0.0 * H
)


def angle_function(kappa: float) -> CurvatureFunctionSpec:
    """phi = atan2(sqrt(k) H, k - K) / sqrt(k) as a function of (H, K)."""
    rk = math.sqrt(kappa)

    def D(H, K):
        return kappa * H**2 + (kappa - K) ** 2

    return CurvatureFunctionSpec(
        "phi",
        lambda H, K: np.arctan2(rk * H, kappa - K) / rk,
        lambda H, K: (kappa - K) / D(H, K),
        lambda H, K: H / D(H, K),
        lambda H, K: -2 * kappa * H * (kappa - K) / D(H, K) ** 2,
        lambda H, K: (2 * (kappa - K) ** 2 - D(H, K)) / D(H, K) ** 2,
        lambda H, K: 2 * H * (kappa - K) / D(H, K) ** 2,
    )


def curvature_spec(identifier: str, kappa: float = 1.0) -> CurvatureFunctionSpec:
    if identifier == "H":
        return MEAN_CURVATURE
    if identifier == "K":
        return GAUSS_CURVATURE
    if identifier == "phi":
        return angle_function(kappa)
    raise ContractError(f"unknown curvature function {identifier!r}")


def _HK(g, h):
    ginv = np.linalg.inv(g)
    X = ginv @ h
    return ginv, np.einsum("...ii->...", X), np.linalg.det(X), X @ ginv


def curvature_function_derivs(spec: CurvatureFunctionSpec, g, h):
    """Return (G_H, G_K, G^{ij}, dG/dg^{ij}) at a surface point."""
    g, h = _as_pair(g, h)
    if g.shape[-1] != 2:
        raise ContractError("curvature functions of (H, K) are two-dimensional")
    ginv, H, K, hup = _HK(g, h)
    GH = np.asarray(spec.G_H(H, K), dtype=float)
    GK = np.asarray(spec.G_K(H, K), dtype=float)
    Gup = (GH + H * GK)[..., None, None] * ginv - GK[..., None, None] * hup
    Gdg = (K * GK)[..., None, None] * g + GH[..., None, None] * h
    return GH, GK, Gup, Gdg


def curvature_function_hessian(spec: CurvatureFunctionSpec, g, h) -> np.ndarray:
    """G^{pq,kl} = d^2 G / dh_pq dh_kl by the chain rule through (H, K)."""
    g, h = _as_pair(g, h)
    ginv, H, K, hup = _HK(g, h)
    Kup = H[..., None, None] * ginv - hup
    GK = np.asarray(spec.G_K(H, K), dtype=float)[..., None, None, None, None]
    out = (
        np.asarray(spec.G_HH(H, K), dtype=float)[..., None, None, None, None] * np.einsum("...pq,...kl->...pqkl", ginv, ginv)
        + np.asarray(spec.G_HK(H, K), dtype=float)[..., None, None, None, None]
        * (np.einsum("...pq,...kl->...pqkl", ginv, Kup) + np.einsum("...pq,...kl->...pqkl", Kup, ginv))
        + np.asarray(spec.G_KK(H, K), dtype=float)[..., None, None, None, None] * np.einsum("...pq,...kl->...pqkl", Kup, Kup)
        + GK * (np.einsum("...kl,...pq->...pqkl", ginv, ginv) - np.einsum("...pk,...ql->...pqkl", ginv, ginv))
    )
    return out
