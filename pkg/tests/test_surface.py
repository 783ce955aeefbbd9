import math

import numpy as np
import pytest

from adsflow.pseudo_euclidean import ContractError, inner
from adsflow.structure import convergence_orders
from adsflow.surface import (
    SNAPSHOT_COLUMNS,
    SpacelikeError,
    SurfaceMesh,
    assemble_node_geometry,
    gaussian_profile,
    interior_band,
    read_snapshot,
    seed_surface,
    write_snapshot,
)


def umbilic_lambda(s, kappa=1.0):
    return -s * math.sqrt(kappa) / math.sqrt(1 - s * s)


def test_umbilic_slice_point():
    # dchi = 0.1 puts the first cell centre at chi = 0
    mesh = seed_surface("umbilic_slice", 32, s=0.6, chi_range=(-0.05, 3.15))
    np.testing.assert_allclose(mesh.F[0, 0], [0, 0, 0.8, 0.6], atol=1e-15)


@pytest.mark.parametrize("kind", ["geodesic_slice", "umbilic_slice", "graph_radial", "perturbed"])
@pytest.mark.parametrize("kappa", [0.5, 1.0, 3.0])
def test_seeds_lie_on_quadric(kind, kappa):
    mesh = seed_surface(kind, 16, kappa=kappa, s=0.4)
    assert mesh.quadric_residual() <= 1e-12 / kappa


def test_umbilic_slice_rejects_large_s():
    with pytest.raises(ContractError):
        seed_surface("umbilic_slice", 16, s=1.2)


def test_resolution_power_of_two():
    with pytest.raises(ContractError):
        seed_surface("geodesic_slice", 24)


def test_unknown_kind():
    with pytest.raises(ContractError):
        seed_surface("torus", 16)


def test_mesh_contracts():
    F = seed_surface("geodesic_slice", 16).F
    with pytest.raises(ContractError):
        SurfaceMesh(F, 0.5, 1.5, kappa=-1.0)
    with pytest.raises(ContractError):
        SurfaceMesh(F, 0.5, 1.5, bc_lo="periodic", bc_hi="pinned")
    with pytest.raises(ContractError):
        SurfaceMesh(F, 0.5, 1.5, bc_lo="open")


def test_steep_graph_is_not_spacelike():
    with pytest.raises(SpacelikeError) as err:
        seed_surface("graph_radial", 32, profile=gaussian_profile(1.0, 1.0, 0.3))
    assert err.value.node is not None


def test_geodesic_slice_fields():
    f = assemble_node_geometry(seed_surface("geodesic_slice", 64))
    for arr in (f.h, f.phi, f.H, f.K):
        assert np.abs(arr).max() <= 1e-6
    chi = f.mesh.chi[:, None]
    np.testing.assert_allclose(f.g[..., 0, 0], 1.0, atol=1e-3)
    np.testing.assert_allclose(f.g[..., 0, 1], 0.0, atol=1e-12)
    rel = np.abs(f.g[..., 1, 1] / np.sinh(chi) ** 2 - 1).max()
    assert rel < (2 * math.pi / 64) ** 2 / 3 * 1.01


def test_geodesic_metric_second_order():
    errs = []
    for n in (16, 32, 64):
        f = assemble_node_geometry(seed_surface("geodesic_slice", n))
        errs.append(np.abs(f.g[..., 1, 1] - np.sinh(f.mesh.chi[:, None]) ** 2).max())
    assert min(convergence_orders(errs)) > 1.9


def test_normal_field_invariants():
    f = assemble_node_geometry(seed_surface("perturbed", 32, amplitude=0.05))
    T1, T2 = f.tangents
    np.testing.assert_allclose(inner(f.nu, f.nu), -1.0, atol=1e-10)
    for v in (T1, T2, f.F):
        assert np.abs(inner(f.nu, v)).max() <= 1e-10
    np.testing.assert_allclose(f.lam.sum(axis=-1), f.H, atol=1e-12)
    np.testing.assert_allclose(f.lam.prod(axis=-1), f.K, atol=1e-12)
    assert np.all(np.diff(f.lam, axis=-1) >= 0)


def test_second_fundamental_form_sign():
    # h_ij = -<F_ij, nu> recomputed from the stored second partials
    f = assemble_node_geometry(seed_surface("perturbed", 32, amplitude=0.05))
    D = f.D
    h00 = -inner(D[:, :, 3], f.nu)
    h01 = -inner(D[:, :, 4], f.nu)
    h11 = -inner(D[:, :, 5], f.nu)
    np.testing.assert_allclose(f.h[..., 0, 0], h00, atol=1e-10)
    np.testing.assert_allclose(f.h[..., 0, 1], h01, atol=1e-10)
    np.testing.assert_allclose(f.h[..., 1, 1], h11, atol=1e-10)


@pytest.mark.parametrize("s", [-0.4, 0.3, 0.6])
def test_umbilic_slice_curvature(s):
    errs = []
    for n in (16, 32, 64):
        mesh = seed_surface("umbilic_slice", n, s=s, bc=("neumann_ghost", "neumann_ghost"))
        f = assemble_node_geometry(mesh)
        band = interior_band(mesh)
        errs.append(np.abs(f.lam - umbilic_lambda(s))[band].max())
        assert np.abs(f.lam[..., 0] - f.lam[..., 1])[band].max() < 5e-2
    assert errs[-1] < 2e-3
    assert min(convergence_orders(errs)) > 1.8


def test_scalar_curvature_matches_gauss_equation():
    errs = []
    for n in (16, 32, 64):
        f = assemble_node_geometry(seed_surface("perturbed", n, amplitude=0.05))
        band = interior_band(f.mesh)
        errs.append(np.abs(f.scalar_curvature() - 2 * (-f.kappa - f.K))[band].max())
    assert min(convergence_orders(errs)) > 1.8


def test_theta_shift_permutes_fields():
    mesh = seed_surface("perturbed", 32, amplitude=0.05, mode=3)
    f = assemble_node_geometry(mesh)
    c, s = math.cos(mesh.dtheta), math.sin(mesh.dtheta)
    # rotating (1,2) by one cell maps the node at theta_j to theta_{j+1}
    R = np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]])
    base = seed_surface("geodesic_slice", 32)
    shifted = mesh.copy(F=np.roll(mesh.F, 1, axis=1))
    g = assemble_node_geometry(shifted)
    for a, b in ((f.H, g.H), (f.K, g.K), (f.phi, g.phi)):
        assert np.array_equal(np.roll(a, 1, axis=1), b)
    # the rotated geodesic slice is the same point set, shifted by one column
    np.testing.assert_allclose(base.F @ R.T, np.roll(base.F, -1, axis=1), atol=1e-14)


def test_rotational_fields_theta_independent():
    f = assemble_node_geometry(seed_surface("graph_radial", 64))
    np.testing.assert_allclose(f.H, np.repeat(f.H[:, :1], f.H.shape[1], axis=1), atol=1e-12)
    np.testing.assert_allclose(f.phi, np.repeat(f.phi[:, :1], f.H.shape[1], axis=1), atol=1e-12)


def test_rotational_matches_stencil():
    rot = assemble_node_geometry(seed_surface("graph_radial", 64, n_theta=64))
    st = assemble_node_geometry(seed_surface("graph_radial", 64, n_theta=64, theta_mode="stencil"))
    band = interior_band(rot.mesh, 0.1)
    assert np.abs(rot.H - st.H)[band].max() < 1e-2


def test_snapshot_roundtrip(tmp_path):
    f = assemble_node_geometry(seed_surface("perturbed", 16, amplitude=0.05))
    path = tmp_path / "s.csv"
    write_snapshot(path, f)
    header = path.read_text().splitlines()[0].split(",")
    assert header == SNAPSHOT_COLUMNS
    data = read_snapshot(path)
    assert data.shape == (16 * 16, 13)
    np.testing.assert_array_equal(data[:, 4:8], f.F.reshape(-1, 4))
    np.testing.assert_array_equal(data[:, 10], f.phi.ravel())


def test_interior_band_fraction():
    mesh = seed_surface("geodesic_slice", 64)
    band = interior_band(mesh, 0.25)
    assert band[:, 0].sum() == 32
    per = seed_surface("geodesic_slice", 16, bc=("periodic", "periodic"))
    assert interior_band(per).all()
