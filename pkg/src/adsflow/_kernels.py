"""Hot per-node kernels: stencils, normal, fundamental forms, angle, flow steps.

Two implementations live side by side. The loop versions are compiled with
numba ``@njit``; the ``_np`` versions are vectorised numpy. Setting the
environment variable ``ADSFLOW_DISABLE_NUMBA=1`` before import selects the
numpy path everywhere (the loop versions then stay plain Python).

Array conventions
-----------------
``Fp`` is the padded node array of shape ``(Nchi + 2, Ntheta, 4)``: rows 0
and ``Nchi + 1`` are ghost rows, filled by :func:`fill_ghosts`. Theta is
always periodic and handled by modular indexing. ``bc`` codes per chi end:
0 periodic, 1 mirror ghost (neumann), 2 one-sided stencils (pinned).

Status codes per node: 0 ok, 1 degenerate tangent span, 2 tangent plane
not spacelike.
"""

from __future__ import annotations

import math
import os

import numpy as np

USE_NUMBA = os.environ.get("ADSFLOW_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    from numba import njit
else:  # pragma: no cover - exercised via the env flag in a subprocess test

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


BC_PERIODIC, BC_NEUMANN, BC_PINNED = 0, 1, 2
OK, DEGENERATE, NOT_SPACELIKE = 0, 1, 2

# derivative slots in the D array
D_F, D_X, D_T, D_XX, D_XT, D_TT = range(6)


# ---------------------------------------------------------------------------
# ghost rows
# ---------------------------------------------------------------------------


@njit(cache=True)
def _mirror_point(P, chi_b, kappa, out):
    rk = math.sqrt(kappa)
    s4 = rk * P[3]
    if s4 > 1.0:
        s4 = 1.0
    if s4 < -1.0:
        s4 = -1.0
    eps = math.asin(s4)
    c = math.cos(eps)
    q1 = P[0] / c
    q2 = P[1] / c
    rad = math.hypot(q1, q2)
    rho = math.asinh(rk * rad)
    if rad > 0.0:
        u1 = q1 / rad
        u2 = q2 / rad
    else:
        u1 = 1.0
        u2 = 0.0
    rho2 = 2.0 * chi_b - rho
    sh = math.sinh(rho2) / rk
    out[0] = c * sh * u1
    out[1] = c * sh * u2
    out[2] = c * math.cosh(rho2) / rk
    out[3] = P[3]


@njit(cache=True)
def fill_ghosts(Fp, bc_lo, bc_hi, chi_lo, chi_hi, kappa):
    n = Fp.shape[0] - 2
    m = Fp.shape[1]
    tmp = np.empty(4)
    for j in range(m):
        if bc_lo == 0:
            for a in range(4):
                Fp[0, j, a] = Fp[n, j, a]
        elif bc_lo == 1:
            _mirror_point(Fp[1, j], chi_lo, kappa, tmp)
            for a in range(4):
                Fp[0, j, a] = tmp[a]
        if bc_hi == 0:
            for a in range(4):
                Fp[n + 1, j, a] = Fp[1, j, a]
        elif bc_hi == 1:
            _mirror_point(Fp[n, j], chi_hi, kappa, tmp)
            for a in range(4):
                Fp[n + 1, j, a] = tmp[a]


def fill_ghosts_np(Fp, bc_lo, bc_hi, chi_lo, chi_hi, kappa):
    n = Fp.shape[0] - 2

    def mirror(P, chi_b):
        rk = math.sqrt(kappa)
        eps = np.arcsin(np.clip(rk * P[:, 3], -1.0, 1.0))
        c = np.cos(eps)
        q1 = P[:, 0] / c
        q2 = P[:, 1] / c
        rad = np.hypot(q1, q2)
        rho = np.arcsinh(rk * rad)
        safe = np.where(rad > 0, rad, 1.0)
        u1 = np.where(rad > 0, q1 / safe, 1.0)
        u2 = np.where(rad > 0, q2 / safe, 0.0)
        rho2 = 2.0 * chi_b - rho
        sh = np.sinh(rho2) / rk
        return np.stack([c * sh * u1, c * sh * u2, c * np.cosh(rho2) / rk, P[:, 3]], axis=-1)

    if bc_lo == 0:
        Fp[0] = Fp[n]
    elif bc_lo == 1:
        Fp[0] = mirror(Fp[1], chi_lo)
    if bc_hi == 0:
        Fp[n + 1] = Fp[1]
    elif bc_hi == 1:
        Fp[n + 1] = mirror(Fp[n], chi_hi)


# ---------------------------------------------------------------------------
# per-node geometry
# ---------------------------------------------------------------------------


@njit(cache=True)
def _ip(u, v):
    return u[0] * v[0] + u[1] * v[1] - u[2] * v[2] - u[3] * v[3]


@njit(cache=True)
def _node_geometry(D, kappa, nu, gh):
    """Normal, g, h, H, K, phi from the six derivative vectors of one node.

    gh receives g11, g12, g22, h11, h12, h22, H, K, phi. Returns status.
    Written with scalars only so the compiled loop does not allocate.
    """
    F = D[0]
    T1 = D[1]
    T2 = D[2]
    r0 = -F[1]
    r1 = F[0]
    r2 = -F[3]
    r3 = F[2]
    a00 = _ip(F, F)
    a01 = _ip(F, T1)
    a02 = _ip(F, T2)
    a11 = _ip(T1, T1)
    a12 = _ip(T1, T2)
    a22 = _ip(T2, T2)
    b0 = F[0] * r0 + F[1] * r1 - F[2] * r2 - F[3] * r3
    b1 = T1[0] * r0 + T1[1] * r1 - T1[2] * r2 - T1[3] * r3
    b2 = T2[0] * r0 + T2[1] * r1 - T2[2] * r2 - T2[3] * r3
    # cofactors of the symmetric Gram matrix
    c00 = a11 * a22 - a12 * a12
    c01 = a02 * a12 - a01 * a22
    c02 = a01 * a12 - a02 * a11
    c11 = a00 * a22 - a02 * a02
    c12 = a01 * a02 - a00 * a12
    c22 = a00 * a11 - a01 * a01
    det = a00 * c00 + a01 * c01 + a02 * c02
    if abs(det) <= 1e-12 * abs(a00 * a11 * a22):
        return 1
    x0 = (c00 * b0 + c01 * b1 + c02 * b2) / det
    x1 = (c01 * b0 + c11 * b1 + c12 * b2) / det
    x2 = (c02 * b0 + c12 * b1 + c22 * b2) / det
    nu[0] = r0 - x0 * F[0] - x1 * T1[0] - x2 * T2[0]
    nu[1] = r1 - x0 * F[1] - x1 * T1[1] - x2 * T2[1]
    nu[2] = r2 - x0 * F[2] - x1 * T1[2] - x2 * T2[2]
    nu[3] = r3 - x0 * F[3] - x1 * T1[3] - x2 * T2[3]
    nn = _ip(nu, nu)
    if nn >= 0.0:
        return 2
    s = 1.0 / math.sqrt(-nn)
    for a in range(4):
        nu[a] *= s
    dg = a11 * a22 - a12 * a12
    if a11 <= 0.0 or dg <= 0.0:
        return 2
    h11 = -_ip(D[3], nu)
    h12 = -_ip(D[4], nu)
    h22 = -_ip(D[5], nu)
    H = (a22 * h11 - 2.0 * a12 * h12 + a11 * h22) / dg
    K = (h11 * h22 - h12 * h12) / dg
    rk = math.sqrt(kappa)
    phi = math.atan2(H / rk, 1.0 - K / kappa) / rk
    gh[0] = a11
    gh[1] = a12
    gh[2] = a22
    gh[3] = h11
    gh[4] = h12
    gh[5] = h22
    gh[6] = H
    gh[7] = K
    gh[8] = phi
    return 0


@njit(cache=True)
def _stencil(Fp, i, j, dchi, dtheta, onesided_lo, onesided_hi, rotational, D):
    n = Fp.shape[0] - 2
    m = Fp.shape[1]
    p = i + 1
    jp = (j + 1) % m
    jm = (j - 1) % m
    ix = 1.0 / dchi
    it = 1.0 / dtheta
    lo = onesided_lo and i < 1
    hi = onesided_hi and i > n - 2
    for a in range(4):
        D[0, a] = Fp[p, j, a]
        if lo:
            D[1, a] = (-3.0 * Fp[p, j, a] + 4.0 * Fp[p + 1, j, a] - Fp[p + 2, j, a]) * 0.5 * ix
            D[3, a] = (2.0 * Fp[p, j, a] - 5.0 * Fp[p + 1, j, a] + 4.0 * Fp[p + 2, j, a] - Fp[p + 3, j, a]) * ix * ix
        elif hi:
            D[1, a] = (3.0 * Fp[p, j, a] - 4.0 * Fp[p - 1, j, a] + Fp[p - 2, j, a]) * 0.5 * ix
            D[3, a] = (2.0 * Fp[p, j, a] - 5.0 * Fp[p - 1, j, a] + 4.0 * Fp[p - 2, j, a] - Fp[p - 3, j, a]) * ix * ix
        else:
            D[1, a] = (Fp[p + 1, j, a] - Fp[p - 1, j, a]) * 0.5 * ix
            D[3, a] = (Fp[p + 1, j, a] - 2.0 * Fp[p, j, a] + Fp[p - 1, j, a]) * ix * ix
    if rotational:
        # exact theta derivatives of a rotation-invariant surface
        D[2, 0] = -D[0, 1]
        D[2, 1] = D[0, 0]
        D[2, 2] = 0.0
        D[2, 3] = 0.0
        D[5, 0] = -D[0, 0]
        D[5, 1] = -D[0, 1]
        D[5, 2] = 0.0
        D[5, 3] = 0.0
        D[4, 0] = -D[1, 1]
        D[4, 1] = D[1, 0]
        D[4, 2] = 0.0
        D[4, 3] = 0.0
        return
    for a in range(4):
        D[2, a] = (Fp[p, jp, a] - Fp[p, jm, a]) * 0.5 * it
        D[5, a] = (Fp[p, jp, a] - 2.0 * Fp[p, j, a] + Fp[p, jm, a]) * it * it
        if lo:
            D[4, a] = (
                -3.0 * (Fp[p, jp, a] - Fp[p, jm, a])
                + 4.0 * (Fp[p + 1, jp, a] - Fp[p + 1, jm, a])
                - (Fp[p + 2, jp, a] - Fp[p + 2, jm, a])
            ) * 0.25 * ix * it
        elif hi:
            D[4, a] = (
                3.0 * (Fp[p, jp, a] - Fp[p, jm, a])
                - 4.0 * (Fp[p - 1, jp, a] - Fp[p - 1, jm, a])
                + (Fp[p - 2, jp, a] - Fp[p - 2, jm, a])
            ) * 0.25 * ix * it
        else:
            D[4, a] = (
                Fp[p + 1, jp, a] - Fp[p + 1, jm, a] - Fp[p - 1, jp, a] + Fp[p - 1, jm, a]
            ) * 0.25 * ix * it


@njit(cache=True)
def surface_fields(Fp, dchi, dtheta, kappa, onesided_lo, onesided_hi, rotational):
    """Derivatives, normal and pointwise geometry at every real node.

    Returns (D, nu, gh, status) with D of shape (N, M, 6, 4) and gh of shape
    (N, M, 9) holding g11, g12, g22, h11, h12, h22, H, K, phi.
    """
    n = Fp.shape[0] - 2
    m = Fp.shape[1]
    D = np.zeros((n, m, 6, 4))
    nu = np.zeros((n, m, 4))
    gh = np.zeros((n, m, 9))
    status = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            _stencil(Fp, i, j, dchi, dtheta, onesided_lo, onesided_hi, rotational, D[i, j])
            status[i, j] = _node_geometry(D[i, j], kappa, nu[i, j], gh[i, j])
    return D, nu, gh, status


ETA = np.array([1.0, 1.0, -1.0, -1.0])


def _ip_np(u, v):
    return np.sum(u * ETA * v, axis=-1)


def surface_fields_np(Fp, dchi, dtheta, kappa, onesided_lo, onesided_hi, rotational):
    n = Fp.shape[0] - 2
    F = Fp[1 : n + 1]
    D = np.zeros(F.shape[:2] + (6, 4))
    D[:, :, 0] = F
    D[:, :, 1] = (Fp[2:] - Fp[:-2]) * (0.5 / dchi)
    D[:, :, 3] = (Fp[2:] - 2.0 * F + Fp[:-2]) / dchi**2
    if onesided_lo:
        D[0, :, 1] = (-3.0 * Fp[1] + 4.0 * Fp[2] - Fp[3]) * (0.5 / dchi)
        D[0, :, 3] = (2.0 * Fp[1] - 5.0 * Fp[2] + 4.0 * Fp[3] - Fp[4]) / dchi**2
    if onesided_hi:
        D[-1, :, 1] = (3.0 * Fp[n] - 4.0 * Fp[n - 1] + Fp[n - 2]) * (0.5 / dchi)
        D[-1, :, 3] = (2.0 * Fp[n] - 5.0 * Fp[n - 1] + 4.0 * Fp[n - 2] - Fp[n - 3]) / dchi**2
    if rotational:
        L = np.array([[0.0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
        D[:, :, 2] = F @ L.T
        D[:, :, 5] = F @ (L @ L).T
        D[:, :, 4] = D[:, :, 1] @ L.T
    else:
        Fpp = np.roll(Fp, -1, axis=1)
        Fpm = np.roll(Fp, 1, axis=1)
        D[:, :, 2] = (Fpp[1 : n + 1] - Fpm[1 : n + 1]) * (0.5 / dtheta)
        D[:, :, 5] = (Fpp[1 : n + 1] - 2.0 * F + Fpm[1 : n + 1]) / dtheta**2
        dt_ = Fpp - Fpm
        D[:, :, 4] = (dt_[2:] - dt_[:-2]) * (0.25 / (dchi * dtheta))
        if onesided_lo:
            D[0, :, 4] = (-3.0 * dt_[1] + 4.0 * dt_[2] - dt_[3]) * (0.25 / (dchi * dtheta))
        if onesided_hi:
            D[-1, :, 4] = (3.0 * dt_[n] - 4.0 * dt_[n - 1] + dt_[n - 2]) * (0.25 / (dchi * dtheta))

    basis = D[:, :, :3]
    G = np.einsum("...ia,a,...ka->...ik", basis, ETA, basis)
    r = np.stack([-F[..., 1], F[..., 0], -F[..., 3], F[..., 2]], axis=-1)
    rhs = np.einsum("...ia,a,...a->...i", basis, ETA, r)
    det = np.linalg.det(G)
    scale = np.abs(G[..., 0, 0] * G[..., 1, 1] * G[..., 2, 2])
    status = np.zeros(F.shape[:2], dtype=np.int64)
    degenerate = np.abs(det) <= 1e-12 * scale
    Gs = np.where(degenerate[..., None, None], np.eye(3), G)
    c = np.linalg.solve(Gs, rhs[..., None])[..., 0]
    nu = r - np.einsum("...i,...ia->...a", c, basis)
    nn = _ip_np(nu, nu)
    g11 = G[..., 1, 1]
    g12 = G[..., 1, 2]
    g22 = G[..., 2, 2]
    dg = g11 * g22 - g12 * g12
    bad = (nn >= 0) | (g11 <= 0) | (dg <= 0)
    status[bad] = NOT_SPACELIKE
    status[degenerate] = DEGENERATE
    nu = nu / np.sqrt(np.where(nn < 0, -nn, 1.0))[..., None]
    nu[status != 0] = 0.0
    h11 = -_ip_np(D[:, :, 3], nu)
    h12 = -_ip_np(D[:, :, 4], nu)
    h22 = -_ip_np(D[:, :, 5], nu)
    dgs = np.where(status == 0, dg, 1.0)
    H = (g22 * h11 - 2.0 * g12 * h12 + g11 * h22) / dgs
    K = (h11 * h22 - h12 * h12) / dgs
    rk = math.sqrt(kappa)
    phi = np.arctan2(H / rk, 1.0 - K / kappa) / rk
    gh = np.stack([g11, g12, g22, h11, h12, h22, H, K, phi], axis=-1)
    gh[status != 0] = 0.0
    return D, nu, gh, status


# ---------------------------------------------------------------------------
# flow steps
# ---------------------------------------------------------------------------


@njit(cache=True)
def _project_row(Fp, p, kappa):
    m = Fp.shape[1]
    for j in range(m):
        vv = _ip(Fp[p, j], Fp[p, j])
        if vv < 0.0:
            s = 1.0 / math.sqrt(-kappa * vv)
            for a in range(4):
                Fp[p, j, a] *= s


@njit(cache=True)
def euler_advance(Fp, nsteps, dt, kappa, dchi, dtheta, bc_lo, bc_hi, chi_lo, chi_hi, rotational):
    """Advance ``nsteps`` explicit Euler steps of F' = phi nu in place.

    Pinned ends keep their nodes. Returns (steps_done, status, i, j) where a
    non-zero status names the first failing node.
    """
    n = Fp.shape[0] - 2
    m = Fp.shape[1]
    D = np.zeros((6, 4))
    nu = np.zeros(4)
    gh = np.zeros(9)
    vel = np.zeros((n, m, 4))
    first = 1 if bc_lo == 2 else 0
    last = n - 1 if bc_hi == 2 else n
    for step in range(nsteps):
        fill_ghosts(Fp, bc_lo, bc_hi, chi_lo, chi_hi, kappa)
        for i in range(n):
            for j in range(m):
                _stencil(Fp, i, j, dchi, dtheta, bc_lo == 2, bc_hi == 2, rotational, D)
                st = _node_geometry(D, kappa, nu, gh)
                if st != 0:
                    return step, st, i, j
                for a in range(4):
                    vel[i, j, a] = gh[8] * nu[a]
        for i in range(first, last):
            for a in range(4):
                for j in range(m):
                    Fp[i + 1, j, a] += dt * vel[i, j, a]
            _project_row(Fp, i + 1, kappa)
    return nsteps, 0, -1, -1


def euler_advance_np(Fp, nsteps, dt, kappa, dchi, dtheta, bc_lo, bc_hi, chi_lo, chi_hi, rotational):
    n = Fp.shape[0] - 2
    first = 1 if bc_lo == 2 else 0
    last = n - 1 if bc_hi == 2 else n
    for step in range(nsteps):
        fill_ghosts_np(Fp, bc_lo, bc_hi, chi_lo, chi_hi, kappa)
        _, nu, gh, status = surface_fields_np(Fp, dchi, dtheta, kappa, bc_lo == 2, bc_hi == 2, rotational)
        if np.any(status):
            i, j = np.argwhere(status)[0]
            return step, int(status[i, j]), int(i), int(j)
        V = Fp[first + 1 : last + 1] + dt * (gh[..., 8:9] * nu)[first:last]
        vv = _ip_np(V, V)
        Fp[first + 1 : last + 1] = V / np.sqrt(-kappa * vv)[..., None]
    return nsteps, 0, -1, -1


if USE_NUMBA:
    fields = surface_fields
    ghosts = fill_ghosts
    advance = euler_advance
else:
    fields = surface_fields_np
    ghosts = fill_ghosts_np
    advance = euler_advance_np
