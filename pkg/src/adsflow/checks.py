"""Random-ensemble checks of the pointwise identities.

Each function draws its own inputs from a supplied generator and returns a
``CheckResult`` with the worst scaled residual and the number of cases.
The oracles here deliberately use a different route from the production
code: eigenvalues instead of characteristic polynomials, finite
differences instead of closed-form derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angle import (
    angle_by_continuation,
    angle_from_mixed,
    angle_gradient_ginv,
    angle_hessian,
    sigma_forms,
    sigma_inverse_closed_form,
    symmetrize_hessian,
    two_positive_margin,
    weingarten_powers,
)
from .structure import kato_check, kato_ensemble, kato_optimal_residual, kato_tracefree_residual, tracefree3

KAPPAS = (0.5, 1.0, 2.0)


@dataclass
class CheckResult:
    name: str
    cases: int
    worst: float
    tol: float
    passed: bool
    note: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "cases": self.cases, "worst": self.worst, "tol": self.tol, "passed": self.passed, "note": self.note}


def _result(name, cases, worst, tol, note="") -> CheckResult:
    worst = float(worst)
    return CheckResult(name, int(cases), worst, tol, bool(worst <= tol), note)


def random_metric(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    A = rng.normal(size=(count, n, n))
    return A @ np.swapaxes(A, -1, -2) / n + 0.3 * np.eye(n)


def random_symmetric(rng: np.random.Generator, count: int, n: int, scale: float = 1.0) -> np.ndarray:
    B = rng.normal(scale=scale, size=(count, n, n))
    return 0.5 * (B + np.swapaxes(B, -1, -2))


def eigen_angle(g, h, kappa) -> np.ndarray:
    """Oracle: (1/sqrt k) sum arctan(lambda / sqrt k), eigenvalues via Cholesky."""
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(Li @ h @ np.swapaxes(Li, -1, -2))
    rk = np.sqrt(np.asarray(kappa, dtype=float))
    return np.arctan(lam / rk[..., None]).sum(axis=-1) / rk


def _wrap(x):
    return (x + math.pi) % (2 * math.pi) - math.pi


def near_branch_draws(rng: np.random.Generator, count: int, n: int, kappa: np.ndarray):
    """(g, h) whose scaled eigenvalues have sum of arctans pi/2 + tiny, so |b| < 1e-6."""
    x = np.empty((0, n - 1))
    rest = np.empty(0)
    while len(x) < count:
        xx = rng.uniform(-1.5, 1.5, size=(2 * count, n - 1))
        rr = math.pi / 2 - np.arctan(xx).sum(axis=-1)
        # shift to the branch inside (-pi/2, pi/2), dropping draws whose last
        # eigenvalue would be huge (|x| > tan 1.4 ~ 5.8)
        rr = (rr + math.pi / 2) % math.pi - math.pi / 2
        keep = np.abs(rr) < 1.4
        x, rest = np.concatenate([x, xx[keep]]), np.concatenate([rest, rr[keep]])
    x, rest = x[:count], rest[:count]
    x_last = np.tan(rest + rng.uniform(-1e-9, 1e-9, size=count))
    xs = np.concatenate([x, x_last[:, None]], axis=-1)
    g = random_metric(rng, count, n)
    L = np.linalg.cholesky(g)
    rk = np.sqrt(kappa)
    h = rk[:, None, None] * (L * xs[:, None, :]) @ np.swapaxes(L, -1, -2)
    return g, h


def _angle_errors(g, h, kappa):
    """Per-draw angle error, a^2 + b^2 identity error and scaled |b|."""
    n = g.shape[-1]
    X = np.linalg.solve(g, h)
    oracle = eigen_angle(g, h, kappa)
    err = np.empty(len(g))
    norm = np.empty(len(g))
    brel = np.empty(len(g))
    for k in np.unique(kappa):
        sel = kappa == k
        rk = math.sqrt(k)
        if n <= 2:
            ev = angle_from_mixed(X[sel], k)
            err[sel] = np.abs(ev.phi - oracle[sel]) * rk
        else:
            # atan2(a, b) modulo 2 pi; the winding is checked separately
            ev = angle_from_mixed(X[sel], k, prior=oracle[sel])
            err[sel] = np.abs(_wrap(np.arctan2(ev.a, ev.b) - rk * oracle[sel]))
        xs = np.linalg.eigvals(X[sel] / rk).real
        prod = np.prod(1 + xs**2, axis=-1)
        norm[sel] = np.abs(ev.a**2 + ev.b**2 - prod) / prod
        brel[sel] = np.abs(ev.b) / np.sqrt(prod)
    return err, norm, brel


def angle_ensemble(rng: np.random.Generator, count: int = 100_000, near_branch: int = 1_000, tol: float = 1e-12) -> list[CheckResult]:
    """Characteristic-polynomial angle against the eigenvalue oracle for n = 1..4.

    ``near_branch`` of the draws (spread over n = 2..4) are built so that
    |b| < 1e-6.
    """
    errs, norms, bs = [], [], []
    per_n = count // 4
    for n in (1, 2, 3, 4):
        m = per_n + (count - 4 * per_n if n == 4 else 0)
        m_near = (near_branch // 3 + (near_branch % 3 if n == 4 else 0)) if n > 1 else 0
        m_rand = m - m_near
        kappa = rng.choice(KAPPAS, size=m_rand)
        g = random_metric(rng, m_rand, n)
        h = random_symmetric(rng, m_rand, n) * rng.uniform(0.1, 3.0, size=(m_rand, 1, 1))
        e, nn, _ = _angle_errors(g, h, kappa)
        errs.append(e)
        norms.append(nn)
        if m_near:
            kn = rng.choice(KAPPAS, size=m_near)
            gn, hn = near_branch_draws(rng, m_near, n, kn)
            e, nn, b = _angle_errors(gn, hn, kn)
            errs.append(e)
            norms.append(nn)
            bs.append(b)
    return [
        _result("angle_vs_arctan", count, np.concatenate(errs).max(), tol, "sqrt(k)-scaled; n >= 3 compared modulo 2 pi"),
        _result("angle_norm_identity", count, np.concatenate(norms).max(), 1e-10, "a^2 + b^2 = prod(1 + x^2), relative"),
        _result("near_branch_b", near_branch, np.concatenate(bs).max(), 1e-6, "|b| / sqrt(prod(1 + x^2)) on constructed draws"),
    ]


def winding_ensemble(rng: np.random.Generator, count: int = 200, tol: float = 1e-12) -> CheckResult:
    """Continuation from h = 0 picks the right branch for n = 3, 4."""
    worst = 0.0
    for n in (3, 4):
        m = count // 2
        g = random_metric(rng, m, n)
        h = random_symmetric(rng, m, n, scale=2.5)
        ev = angle_by_continuation(g, h, 1.0)
        worst = max(worst, float(np.abs(ev.phi - eigen_angle(g, h, np.ones(m))).max()))
    return _result("angle_winding", count, worst, tol, "continuation along t h, n = 3, 4")


def _phi_gh(ginv, h, kappa):
    return angle_from_mixed(ginv @ h, kappa).phi


def _sym_basis(n):
    out = []
    for k in range(n):
        for l in range(k, n):
            E = np.zeros((n, n))
            E[k, l] = E[l, k] = 1.0 if k == l else 0.5
            out.append(((k, l), E))
    return out


def derivative_ensemble(rng: np.random.Generator, count: int = 10_000, step: float = 1e-5) -> list[CheckResult]:
    """Finite differences of phi in h and g^{-1} against sigma^{ij}, the g^{-1} formula and phi^{pq,kl}."""
    out_g = out_h = out_hess = 0.0
    n = 2
    basis = _sym_basis(n)
    for k in KAPPAS:
        m = count // len(KAPPAS) + (count % len(KAPPAS) if k == KAPPAS[-1] else 0)
        g = random_metric(rng, m, n)
        h = random_symmetric(rng, m, n)
        gi = np.linalg.inv(g)
        sinv = sigma_forms(g, h, k)[1]
        dg_ref = angle_gradient_ginv(g, h, k)
        hess = symmetrize_hessian(angle_hessian(g, h, k))
        fd_h = np.zeros_like(h)
        fd_g = np.zeros_like(h)
        for (a, b), E in basis:
            dh = (_phi_gh(gi, h + step * E, k) - _phi_gh(gi, h - step * E, k)) / (2 * step)
            dgi = (_phi_gh(gi + step * E, h, k) - _phi_gh(gi - step * E, h, k)) / (2 * step)
            fd_h[:, a, b] = fd_h[:, b, a] = dh
            fd_g[:, a, b] = fd_g[:, b, a] = dgi
        sym_dg = 0.5 * (dg_ref + np.swapaxes(dg_ref, -1, -2))
        scale_h = np.abs(sinv).max(axis=(-1, -2))
        scale_g = np.maximum(np.abs(sym_dg).max(axis=(-1, -2)), scale_h * np.abs(h).max(axis=(-1, -2)))
        out_h = max(out_h, float((np.abs(fd_h - sinv).max(axis=(-1, -2)) / scale_h).max()))
        out_g = max(out_g, float((np.abs(fd_g - sym_dg).max(axis=(-1, -2)) / scale_g).max()))
        # Hessian: second differences of phi along pairs of symmetric directions
        s2 = 1e-4
        err = np.zeros(m)
        for (p, q), A in basis:
            for (kk, ll), B in basis:
                f = [_phi_gh(gi, h + s2 * (sa * A + sb * B), k) for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
                fd = (f[0] - f[1] - f[2] + f[3]) / (4 * s2 * s2)
                ref = np.einsum("mpqkl,pq,kl->m", hess, A, B)
                err = np.maximum(err, np.abs(fd - ref))
        scale_hess = scale_h**2 * (1 + np.abs(gi @ h).max(axis=(-1, -2)))
        out_hess = max(out_hess, float((err / scale_hess).max()))
    return [
        _result("fpart1", count, out_h, 1e-6, "d phi / d h_ij vs sigma^ij"),
        _result("fpart2", count, out_g, 1e-6, "d phi / d g^kl vs g_ik h_jl sigma^ij"),
        _result("fpart4", count, out_hess, 1e-4, "second differences vs symmetrised phi^{pq,kl}"),
    ]


def kato_pointwise(rng: np.random.Generator, count: int = 10_000, tol: float = 1e-10) -> list[CheckResult]:
    """Kato identity, its (H, K) form, the tracefree and optimal forms."""
    g, h, T = kato_ensemble(rng, count)
    r1, r2 = kato_check(g, h, T)
    r3 = kato_tracefree_residual(g, h, T)
    lit = kato_tracefree_residual(g, h, T, literal=True)
    # optimal form needs grad H = 0: remove the trace part of T
    r4 = kato_optimal_residual(g, h, tracefree3(g, T))
    return [
        _result("kato", count, r1.max(), tol),
        _result("kato_hk", count, r2.max(), tol),
        _result("kato_tracefree", count, r3.max(), tol, f"corrected form; printed form worst {float(lit.max()):.3g}"),
        _result("kato_optimal", count, r4.max(), tol, "trace-free T"),
    ]


def weingarten_ensemble(rng: np.random.Generator, count: int = 10_000) -> list[CheckResult]:
    """Symmetry of sigma^{kl} h^(r)_ki h^(s)_lj, the sigma closed form and two-positivity."""
    worst_sym = worst_sig = worst_margin = 0.0
    sign_bad = 0
    for k in KAPPAS:
        m = count // len(KAPPAS)
        g = random_metric(rng, m, 2)
        h = random_symmetric(rng, m, 2, scale=1.5)
        sig, sinv = sigma_forms(g, h, k)
        closed = sigma_inverse_closed_form(g, h, k)
        worst_sig = max(worst_sig, float((np.abs(closed - sinv).max(axis=(-1, -2)) / np.abs(sinv).max(axis=(-1, -2))).max()))
        powers = [weingarten_powers(g, h, r) for r in range(5)]
        for r in range(5):
            for s in range(5):
                C = np.swapaxes(powers[r], -1, -2) @ sinv @ powers[s]
                scale = np.abs(C).max(axis=(-1, -2)) + 1e-300
                worst_sym = max(worst_sym, float((np.abs(C - np.swapaxes(C, -1, -2)).max(axis=(-1, -2)) / scale).max()))
        margin = two_positive_margin(g, h, k)
        lam = np.linalg.eigvals(np.linalg.solve(g, h)).real
        K = lam.prod(axis=-1)
        formula = 2 * (k * k - K * K) / ((k + lam[:, 0] ** 2) * (k + lam[:, 1] ** 2))
        worst_margin = max(worst_margin, float(np.abs(margin - formula).max()))
        sign_bad += int(np.sum(np.sign(margin) != np.sign(k * k - K * K)))
    n = len(KAPPAS) * (count // len(KAPPAS))
    return [
        _result("hddsymm", n, worst_sym, 1e-11, "r, s in 0..4"),
        _result("sigma_closed_form", n, worst_sig, 1e-11),
        _result("two_positivity_formula", n, worst_margin, 1e-12),
        CheckResult("two_positivity_sign", n, float(sign_bad), 0.0, sign_bad == 0, "sign(margin) = sign(k^2 - K^2)"),
    ]
