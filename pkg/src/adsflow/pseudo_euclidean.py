"""Linear algebra in the pseudo-Euclidean spaces R^4_2 and R^3_1.

Vectors are plain numpy arrays whose last axis holds the components; the
signature is read off the length of that axis (4 -> (2,2), 3 -> (2,1)).
All functions broadcast over leading axes.
"""

from __future__ import annotations

import numpy as np

SIGNATURES = {4: np.array([1.0, 1.0, -1.0, -1.0]), 3: np.array([1.0, 1.0, -1.0])}

# relative tolerance floor used by the contract checks
TOL_FLOOR = 1e-14


class ContractError(ValueError):
    """Raised when an input violates an operation's precondition."""


class NotProjectableError(ContractError):
    pass


def metric(dim: int) -> np.ndarray:
    try:
        return SIGNATURES[dim]
    except KeyError:
        raise ContractError(f"no pseudo-Euclidean signature for dimension {dim}") from None


def inner(u, v) -> np.ndarray | float:
    """Signed bilinear form, e.g. V1W1 + V2W2 - V3W3 - V4W4 on R^4_2."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise ContractError(
            f"signature mismatch: {u.shape[-1]}-vector against {v.shape[-1]}-vector"
        )
    eta = metric(u.shape[-1])
    out = np.sum(u * eta * v, axis=-1)
    return float(out) if out.ndim == 0 else out


def time_field(F) -> np.ndarray:
    """Future-pointing timelike field tangent to the quadric at ``F``.

    It is the generator of the time circle ``t = atan2(V4, V3)`` (rotating
    the (1,2) plane along with it), so ``<T, F> = 0`` and ``<T, T> = <F, F>``.
    """
    F = np.asarray(F, dtype=float)
    return np.stack([-F[..., 1], F[..., 0], -F[..., 3], F[..., 2]], axis=-1)


def normal_completion(F, T1, T2) -> np.ndarray:
    """Future-directed timelike unit normal of span(T1, T2) inside T_F(quadric).

    The normal is ``r - c.(F, T1, T2)`` with ``r`` the time field at ``F`` and
    ``c`` solving the 3x3 Gram system, then normalised. Because the residual
    of ``r`` is orthogonal to a (2,1)-signature subspace it is timelike and
    has ``<nu, r> < 0``, i.e. it lies in the future cone.
    """
    F = np.asarray(F, dtype=float)
    T1 = np.asarray(T1, dtype=float)
    T2 = np.asarray(T2, dtype=float)
    if F.shape[-1] != 4 or T1.shape[-1] != 4 or T2.shape[-1] != 4:
        raise ContractError("normal_completion works in R^4_2")
    basis = np.stack(np.broadcast_arrays(F, T1, T2), axis=-2)  # (..., 3, 4)
    eta = SIGNATURES[4]
    gram = np.einsum("...ia,a,...ja->...ij", basis, eta, basis)
    scale = np.abs(np.einsum("...ii->...i", gram)).prod(axis=-1)
    det = np.linalg.det(gram)
    if np.any(np.abs(det) <= 1e-12 * scale):
        raise ContractError("degenerate span: tangent vectors are (nearly) parallel")
    r = time_field(F)
    rhs = np.einsum("...ia,a,...a->...i", basis, eta, r)
    coef = np.linalg.solve(gram, rhs[..., None])[..., 0]
    nu = r - np.einsum("...i,...ia->...a", coef, basis)
    nn = np.sum(nu * eta * nu, axis=-1)
    if np.any(nn >= 0):
        raise ContractError("no timelike normal: the tangent plane is not spacelike")
    return nu / np.sqrt(-nn)[..., None]


def _check_positive_definite(g: np.ndarray) -> None:
    n = g.shape[-1]
    if n == 1:
        ok = g[..., 0, 0] > 0
    elif n == 2:
        ok = (g[..., 0, 0] > 0) & (np.linalg.det(g) > 0)
    else:
        ok = np.all(np.linalg.eigvalsh(g) > 0, axis=-1)
    if not np.all(ok):
        raise ContractError("metric is not positive definite")


def generalized_eigen(g, h) -> np.ndarray:
    """Eigenvalues of the Weingarten map g^{-1}h, sorted ascending.

    Uses the Cholesky reduction ``L^{-1} h L^{-T}`` so that the 2x2 case can
    take the symmetric closed form; this keeps close eigenvalues accurate.
    """
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != h.shape or g.shape[-1] != g.shape[-2]:
        raise ContractError("g and h must be square arrays of equal shape")
    _check_positive_definite(g)
    n = g.shape[-1]
    if n == 1:
        return h / g[..., 0:1, 0]
    L = np.linalg.cholesky(g)
    Linv = np.linalg.inv(L)
    S = Linv @ h @ np.swapaxes(Linv, -1, -2)
    if n == 2:
        mid = 0.5 * (S[..., 0, 0] + S[..., 1, 1])
        rad = np.hypot(0.5 * (S[..., 0, 0] - S[..., 1, 1]), 0.5 * (S[..., 0, 1] + S[..., 1, 0]))
        return np.stack([mid - rad, mid + rad], axis=-1)
    return np.linalg.eigvalsh(0.5 * (S + np.swapaxes(S, -1, -2)))


def quadric_project(V, kappa: float) -> np.ndarray:
    """Radially rescale ``V`` onto the quadric <V,V> = -1/kappa."""
    if kappa <= 0:
        raise ContractError("kappa must be positive")
    V = np.asarray(V, dtype=float)
    vv = np.sum(V * SIGNATURES[V.shape[-1]] * V, axis=-1)
    if np.any(vv >= 0):
        raise NotProjectableError("vector is not timelike; cannot project onto the quadric")
    return V / np.sqrt(-kappa * vv)[..., None]


def lorentz_cross(u, v) -> np.ndarray:
    """Cross product on R^3_1 characterised by <u x v, w> = det[u, v, w]."""
    c = np.cross(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return c * SIGNATURES[3]


def orientation_det(*vectors) -> np.ndarray:
    """det of the matrix whose columns are the given 4-vectors (Euclidean orientation)."""
    return np.linalg.det(np.stack(np.broadcast_arrays(*vectors), axis=-1))
