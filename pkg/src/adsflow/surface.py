"""Discrete surface patches in the quadric model of AdS_3 and their geometry.

A patch is a structured (chi, theta) grid of points on the quadric
<F, F> = -1/kappa. Theta is periodic. Chi is cell centred,
chi_i = chi_lo + (i + 1/2) dchi, with one of three end treatments:

* ``periodic``  wrap around (parameter tori, used for pointwise checks),
* ``neumann_ghost``  a ghost row mirrored through the boundary in Fermi
  coordinates about the totally geodesic slice,
* ``pinned``  one-sided second order stencils; nodes are frozen in time.

``theta_mode="rotational"`` marks a rotation-invariant patch: theta
derivatives are taken exactly from the rotation generator and derived
fields are theta independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as kern
from .angle import sigma_forms
from .pseudo_euclidean import ContractError, SIGNATURES, generalized_eigen, inner

BC_CODES = {"periodic": kern.BC_PERIODIC, "neumann_ghost": kern.BC_NEUMANN, "pinned": kern.BC_PINNED}
SNAPSHOT_COLUMNS = ["i", "j", "chi", "theta", "F1", "F2", "F3", "F4", "H", "K", "phi", "lambda1", "lambda2"]


class SpacelikeError(ContractError):
    """A node whose tangent plane is degenerate or not spacelike."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


@dataclass
class SurfaceMesh:
    F: np.ndarray  # (Nchi, Ntheta, 4)
    chi_lo: float
    chi_hi: float
    kappa: float = 1.0
    bc_lo: str = "pinned"
    bc_hi: str = "pinned"
    theta_mode: str = "stencil"

    def __post_init__(self):
        self.F = np.ascontiguousarray(self.F, dtype=float)
        if self.kappa <= 0:
            raise ContractError("kappa must be positive")
        for bc in (self.bc_lo, self.bc_hi):
            if bc not in BC_CODES:
                raise ContractError(f"unknown boundary condition {bc!r}")
        if (self.bc_lo == "periodic") != (self.bc_hi == "periodic"):
            raise ContractError("periodic chi must apply at both ends")
        if self.theta_mode not in ("stencil", "rotational"):
            raise ContractError(f"unknown theta mode {self.theta_mode!r}")

    @property
    def shape(self):
        return self.F.shape[:2]

    @property
    def dchi(self) -> float:
        return (self.chi_hi - self.chi_lo) / self.F.shape[0]

    @property
    def dtheta(self) -> float:
        return 2 * math.pi / self.F.shape[1]

    @property
    def chi(self) -> np.ndarray:
        return self.chi_lo + (np.arange(self.F.shape[0]) + 0.5) * self.dchi

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.F.shape[1]) * self.dtheta

    @property
    def rotational(self) -> bool:
        return self.theta_mode == "rotational"

    def copy(self, F=None) -> "SurfaceMesh":
        return replace(self, F=self.F.copy() if F is None else F)

    def padded(self) -> np.ndarray:
        n, m, _ = self.F.shape
        Fp = np.zeros((n + 2, m, 4))
        Fp[1 : n + 1] = self.F
        kern.ghosts(Fp, BC_CODES[self.bc_lo], BC_CODES[self.bc_hi], self.chi_lo, self.chi_hi, self.kappa)
        return Fp

    def quadric_residual(self) -> float:
        return float(np.max(np.abs(inner(self.F, self.F) + 1.0 / self.kappa)))


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def _check_resolution(n: int) -> None:
    if n < 4 or n & (n - 1):
        raise ContractError(f"resolution must be a power of two >= 4, got {n}")


def _grid(chi_lo, chi_hi, n_chi, n_theta):
    dchi = (chi_hi - chi_lo) / n_chi
    chi = chi_lo + (np.arange(n_chi) + 0.5) * dchi
    theta = np.arange(n_theta) * 2 * math.pi / n_theta
    return np.meshgrid(chi, theta, indexing="ij")


def _slice_points(chi, theta, eps, kappa):
    """Points at signed timelike distance eps above the geodesic slice."""
    rk = math.sqrt(kappa)
    c = np.cos(rk * eps)
    return np.stack(
        [
            c * np.sinh(chi) * np.cos(theta),
            c * np.sinh(chi) * np.sin(theta),
            c * np.cosh(chi),
            np.sin(rk * eps) * np.ones_like(chi),
        ],
        axis=-1,
    ) / rk


def seed_surface(
    kind: str,
    resolution: int = 32,
    *,
    kappa: float = 1.0,
    s: float = 0.0,
    profile=None,
    base: str = "geodesic_slice",
    amplitude: float = 0.05,
    mode: int = 2,
    seed: int = 0,
    chi_range: tuple[float, float] | None = None,
    n_theta: int | None = None,
    bc: tuple[str, str] | None = None,
    theta_mode: str | None = None,
) -> SurfaceMesh:
    """Build an initial surface.

    kinds: ``geodesic_slice``, ``umbilic_slice`` (plane V4 = s / sqrt k),
    ``graph_radial`` (F = (sinh chi e^{i theta}, cosh chi e^{i u(chi)}) / sqrt k),
    ``perturbed`` (normal displacement of a slice by a smooth mode-``mode``
    bump whose phases are drawn from ``seed``).
    """
    _check_resolution(resolution)
    if kappa <= 0:
        raise ContractError("kappa must be positive")
    rk = math.sqrt(kappa)
    if kind == "graph_radial":
        lo, hi = chi_range or (0.0, 4.0)
        n_th = n_theta or 4
        bcs = bc or ("neumann_ghost", "neumann_ghost")
        tmode = theta_mode or "rotational"
    elif kind == "perturbed":
        lo, hi = chi_range or (0.5, 1.5)
        n_th = n_theta or resolution
        bcs = bc or ("pinned", "pinned")
        tmode = theta_mode or "stencil"
    else:
        lo, hi = chi_range or (0.5, 1.5)
        n_th = n_theta or resolution
        bcs = bc or ("pinned", "pinned")
        tmode = theta_mode or "stencil"
    chi, theta = _grid(lo, hi, resolution, n_th)

    if kind == "geodesic_slice":
        F = _slice_points(chi, theta, 0.0, kappa)
    elif kind == "umbilic_slice":
        if abs(s) >= 1:
            raise ContractError(f"umbilic slice needs |s| < 1, got {s}")
        F = _slice_points(chi, theta, math.asin(s) / rk, kappa)
    elif kind == "graph_radial":
        if profile is None:
            profile = default_profile
        u, du = profile(chi)
        slope = np.cosh(chi) ** 2 * du**2
        if np.any(slope >= 1):
            idx = tuple(int(v) for v in np.argwhere(slope >= 1)[0])
            raise SpacelikeError(f"spacelike condition cosh^2(chi) u'^2 < 1 fails at node {idx}", node=idx)
        F = np.stack(
            [np.sinh(chi) * np.cos(theta), np.sinh(chi) * np.sin(theta), np.cosh(chi) * np.cos(u), np.cosh(chi) * np.sin(u)],
            axis=-1,
        ) / rk
    elif kind == "perturbed":
        if base == "geodesic_slice":
            eps0 = 0.0
        elif base == "umbilic_slice":
            if abs(s) >= 1:
                raise ContractError(f"umbilic slice needs |s| < 1, got {s}")
            eps0 = math.asin(s) / rk
        else:
            raise ContractError(f"unknown perturbation base {base!r}")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        ph1, ph2 = rng.uniform(0, 2 * math.pi, size=2)
        length = hi - lo
        eps = eps0 + amplitude * np.cos(mode * theta + ph1) * (1 + 0.5 * np.sin(2 * math.pi * (chi - lo) / length + ph2))
        F = _slice_points(chi, theta, eps, kappa)
    else:
        raise ContractError(f"unknown seed kind {kind!r}")
    return SurfaceMesh(F, lo, hi, kappa, bcs[0], bcs[1], tmode)


def default_profile(chi):
    """Bump 0.1 exp(-4 (chi - 1)^2), made even in chi, and its derivative.

    The mirror term 0.1 exp(-4 (chi + 1)^2) (at most 1.8e-3 for chi >= 0)
    gives u'(0) = 0, so the rotation-invariant surface is smooth on its axis.
    """
    a = 0.1 * np.exp(-4.0 * (chi - 1.0) ** 2)
    b = 0.1 * np.exp(-4.0 * (chi + 1.0) ** 2)
    return a + b, -8.0 * (chi - 1.0) * a - 8.0 * (chi + 1.0) * b


def gaussian_profile(amplitude: float, center: float = 1.0, width: float = 0.5):
    """Even bump amplitude (exp(-(chi-c)^2/w^2) + exp(-(chi+c)^2/w^2))."""

    def profile(chi):
        a = amplitude * np.exp(-((chi - center) ** 2) / width**2)
        b = amplitude * np.exp(-((chi + center) ** 2) / width**2)
        return a + b, -2.0 * ((chi - center) * a + (chi + center) * b) / width**2

    return profile


# ---------------------------------------------------------------------------
# field derivatives of derived quantities
# ---------------------------------------------------------------------------


def grad(mesh: SurfaceMesh, A: np.ndarray) -> np.ndarray:
    """Coordinate gradient of a node field: returns (..., 2) stacked on a new axis 2.

    ``A`` has shape (Nchi, Ntheta, *rest); the result has shape
    (Nchi, Ntheta, 2, *rest). Chi uses central differences with wrap for a
    periodic patch and one-sided second order at the other ends; theta is
    periodic (identically zero for a rotational patch).
    """
    A = np.asarray(A, dtype=float)
    dx = mesh.dchi
    dA = np.empty_like(A)
    if mesh.bc_lo == "periodic":
        dA[:] = (np.roll(A, -1, axis=0) - np.roll(A, 1, axis=0)) / (2 * dx)
    else:
        dA[1:-1] = (A[2:] - A[:-2]) / (2 * dx)
        dA[0] = (-3 * A[0] + 4 * A[1] - A[2]) / (2 * dx)
        dA[-1] = (3 * A[-1] - 4 * A[-2] + A[-3]) / (2 * dx)
    if mesh.rotational:
        dT = np.zeros_like(A)
    else:
        dT = (np.roll(A, -1, axis=1) - np.roll(A, 1, axis=1)) / (2 * mesh.dtheta)
    return np.stack([dA, dT], axis=2)


def hessian_scalar(mesh: SurfaceMesh, u: np.ndarray) -> np.ndarray:
    """Coordinate second derivatives (N, M, 2, 2) of a scalar node field.

    Pure second derivatives use the compact three-point stencil; the mixed
    one is the gradient of the gradient.
    """
    u = np.asarray(u, dtype=float)
    dx, dt = mesh.dchi, mesh.dtheta
    out = np.zeros(u.shape + (2, 2))
    if mesh.bc_lo == "periodic":
        out[..., 0, 0] = (np.roll(u, -1, 0) - 2 * u + np.roll(u, 1, 0)) / dx**2
    else:
        out[1:-1, :, 0, 0] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2
        out[0, :, 0, 0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / dx**2
        out[-1, :, 0, 0] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / dx**2
    if not mesh.rotational:
        out[..., 1, 1] = (np.roll(u, -1, 1) - 2 * u + np.roll(u, 1, 1)) / dt**2
        ut = (np.roll(u, -1, 1) - np.roll(u, 1, 1)) / (2 * dt)
        mixed = grad(mesh, ut)[:, :, 0]
        out[..., 0, 1] = mixed
        out[..., 1, 0] = mixed
    return out


# ---------------------------------------------------------------------------
# assembled geometry
# ---------------------------------------------------------------------------


@dataclass
class SurfaceFields:
    """Per-node geometry on a mesh. Index order: node axes first, then tensor slots."""

    mesh: SurfaceMesh
    D: np.ndarray  # (N, M, 6, 4): F, F_chi, F_theta, F_chichi, F_chitheta, F_thetatheta
    nu: np.ndarray
    g: np.ndarray
    h: np.ndarray
    H: np.ndarray
    K: np.ndarray
    phi: np.ndarray
    ginv: np.ndarray = field(repr=False, default=None)
    lam: np.ndarray = field(repr=False, default=None)
    sigma: np.ndarray = field(repr=False, default=None)
    sigma_inv: np.ndarray = field(repr=False, default=None)
    _cache: dict = field(repr=False, default_factory=dict)

    @property
    def kappa(self) -> float:
        return self.mesh.kappa

    @property
    def F(self):
        return self.D[:, :, 0]

    @property
    def tangents(self):
        return self.D[:, :, 1], self.D[:, :, 2]

    @property
    def W(self):
        """Weingarten map W^k_i = g^{kl} h_li."""
        return self.ginv @ self.h

    @property
    def Gamma(self) -> np.ndarray:
        """Christoffel symbols Gamma[..., k, i, j] from central differences of g."""
        if "Gamma" not in self._cache:
            dg = grad(self.mesh, self.g)  # [..., l, i, j] = d_l g_ij
            first = 0.5 * (
                np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
            )  # Gamma_{l,ij}
            self._cache["Gamma"] = np.einsum("...kl,...lij->...kij", self.ginv, first)
        return self._cache["Gamma"]

    @property
    def nabla_h(self) -> np.ndarray:
        """(nabla h)[..., i, j, k] = nabla_i h_jk."""
        if "nabla_h" not in self._cache:
            dh = grad(self.mesh, self.h)
            G = self.Gamma
            self._cache["nabla_h"] = (
                dh
                - np.einsum("...lij,...lk->...ijk", G, self.h)
                - np.einsum("...lik,...jl->...ijk", G, self.h)
            )
        return self._cache["nabla_h"]

    @property
    def nabla2_h(self) -> np.ndarray:
        """(nabla nabla h)[..., i, j, k, l] = nabla_i nabla_j h_kl."""
        if "nabla2_h" not in self._cache:
            T = self.nabla_h
            dT = grad(self.mesh, T)
            G = self.Gamma
            self._cache["nabla2_h"] = (
                dT
                - np.einsum("...mij,...mkl->...ijkl", G, T)
                - np.einsum("...mik,...jml->...ijkl", G, T)
                - np.einsum("...mil,...jkm->...ijkl", G, T)
            )
        return self._cache["nabla2_h"]

    @property
    def riemann(self) -> np.ndarray:
        """R[..., i, j, k, l] = <R(d_i, d_j) d_l, d_k> from differences of Gamma."""
        if "riemann" not in self._cache:
            G = self.Gamma
            dG = grad(self.mesh, G)  # [..., i, l, j, k] = d_i Gamma^l_jk
            # R^l_{kij} = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik
            Rup = (
                np.einsum("...iljk->...lkij", dG)
                - np.einsum("...jlik->...lkij", dG)
                + np.einsum("...lim,...mjk->...lkij", G, G)
                - np.einsum("...ljm,...mik->...lkij", G, G)
            )
            # R_ijkl = g_km R^m_{lij}
            self._cache["riemann"] = np.einsum("...km,...mlij->...ijkl", self.g, Rup)
        return self._cache["riemann"]

    def hessian(self, u: np.ndarray) -> np.ndarray:
        """Covariant Hessian nabla_i nabla_j u of a scalar node field."""
        du = grad(self.mesh, u)
        return hessian_scalar(self.mesh, u) - np.einsum("...kij,...k->...ij", self.Gamma, du)

    def scalar_curvature(self) -> np.ndarray:
        R = self.riemann
        return 2.0 * R[..., 0, 1, 0, 1] / np.linalg.det(self.g)


def assemble_node_geometry(mesh: SurfaceMesh) -> SurfaceFields:
    """Derivatives, normal and fundamental forms at every node of ``mesh``."""
    Fp = mesh.padded()
    D, nu, gh, status = kern.fields(
        Fp,
        mesh.dchi,
        mesh.dtheta,
        mesh.kappa,
        mesh.bc_lo == "pinned",
        mesh.bc_hi == "pinned",
        mesh.rotational,
    )
    if np.any(status):
        i, j = (int(v) for v in np.argwhere(status)[0])
        why = "degenerate tangent span" if status[i, j] == kern.DEGENERATE else "tangent plane not spacelike"
        raise SpacelikeError(f"{why} at node ({i}, {j})", node=(i, j))
    g = np.empty(gh.shape[:2] + (2, 2))
    h = np.empty_like(g)
    g[..., 0, 0], g[..., 0, 1], g[..., 1, 1] = gh[..., 0], gh[..., 1], gh[..., 2]
    g[..., 1, 0] = g[..., 0, 1]
    h[..., 0, 0], h[..., 0, 1], h[..., 1, 1] = gh[..., 3], gh[..., 4], gh[..., 5]
    h[..., 1, 0] = h[..., 0, 1]
    ginv = np.linalg.inv(g)
    sig, sig_inv = sigma_forms(g, h, mesh.kappa)
    return SurfaceFields(
        mesh=mesh,
        D=D,
        nu=nu,
        g=g,
        h=h,
        H=gh[..., 6].copy(),
        K=gh[..., 7].copy(),
        phi=gh[..., 8].copy(),
        ginv=ginv,
        lam=generalized_eigen(g, h),
        sigma=sig,
        sigma_inv=sig_inv,
    )


def physical_spacing(mesh: SurfaceMesh, fields: SurfaceFields | None = None) -> float:
    """Smallest physical grid spacing, used by the step-size rule."""
    if fields is None:
        fields = assemble_node_geometry(mesh)
    dx = float(np.min(np.sqrt(fields.g[..., 0, 0])) * mesh.dchi)
    if not mesh.rotational:
        dx = min(dx, float(np.min(np.sqrt(fields.g[..., 1, 1])) * mesh.dtheta))
    return dx


def interior_band(mesh: SurfaceMesh, fraction: float = 0.25) -> np.ndarray:
    """Boolean mask of rows away from non-periodic chi ends.

    Rows whose chi lies within ``fraction`` of the chi range of either end are
    excluded, so the same physical region is measured across refinements.
    """
    n, m = mesh.shape
    if mesh.bc_lo == "periodic":
        return np.ones((n, m), dtype=bool)
    span = mesh.chi_hi - mesh.chi_lo
    chi = mesh.chi
    rows = (chi > mesh.chi_lo + fraction * span) & (chi < mesh.chi_hi - fraction * span)
    return np.repeat(rows[:, None], m, axis=1)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_snapshot(path, fields: SurfaceFields) -> None:
    """CSV with columns i, j, chi, theta, F1..F4, H, K, phi, lambda1, lambda2."""
    mesh = fields.mesh
    chi, theta = mesh.chi, mesh.theta
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        n, m = mesh.shape
        for i in range(n):
            for j in range(m):
                vals = [chi[i], theta[j], *fields.F[i, j], fields.H[i, j], fields.K[i, j], fields.phi[i, j], *fields.lam[i, j]]
                w.writerow([i, j] + [f"{float(v):.17g}" for v in vals])


def read_snapshot(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1)


__all__ = [
    "SurfaceMesh",
    "SurfaceFields",
    "SpacelikeError",
    "seed_surface",
    "assemble_node_geometry",
    "grad",
    "hessian_scalar",
    "interior_band",
    "physical_spacing",
    "write_snapshot",
    "read_snapshot",
    "SNAPSHOT_COLUMNS",
    "SIGNATURES",
]
