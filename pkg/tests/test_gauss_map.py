import math

import numpy as np
import pytest

from adsflow.evolution import run_snapshots
from adsflow.gauss_map import (
    SQRT2,
    complex_structure,
    decomp_residual,
    endo_algebra_residual,
    endomorphism,
    form_matrix,
    frozen_check,
    gauss_map_area_form,
    gauss_map_eval,
    gauss_map_from_frame,
    gaussmap_flow_residual,
    gaussmap_refinement,
    gaussmap_residual,
    orientation_dets,
    random_unit_spacelike,
    symplectic_eval,
)
from adsflow.pseudo_euclidean import ContractError, inner
from adsflow.surface import assemble_node_geometry, interior_band, seed_surface

E = np.eye(4)
IDS = [(A, d) for A in (1, 2, 3) for d in "+-"]


def test_displayed_form_values():
    assert symplectic_eval(3, "+", E[0], E[1]) == 1.0
    assert symplectic_eval(1, "-", E[1], E[2]) == 1.0
    assert symplectic_eval(1, "-", E[3], E[0]) == -1.0


@pytest.mark.parametrize("A,d", IDS)
def test_wedge_and_endomorphism_routes_agree(A, d, rng):
    u, v = rng.standard_normal((2, 500, 4))
    w = symplectic_eval(A, d, u, v)
    np.testing.assert_allclose(w, symplectic_eval(A, d, u, v, route="endo"), atol=1e-13)
    np.testing.assert_allclose(w, np.einsum("...a,ab,...b->...", u, form_matrix(A, d), v), atol=1e-13)
    np.testing.assert_allclose(symplectic_eval(A, d, u, u), 0.0, atol=1e-15)
    np.testing.assert_allclose(w, -symplectic_eval(A, d, v, u), atol=1e-15)


def test_bad_form_id():
    with pytest.raises(ContractError):
        endomorphism(4, "+")
    with pytest.raises(ContractError):
        symplectic_eval(1, "*", E[0], E[1])


def test_endomorphism_table_application():
    E1, E2, E3 = (endomorphism(A, "+") for A in (1, 2, 3))
    np.testing.assert_array_equal(E2 @ E[0], -E[2])
    np.testing.assert_array_equal(E1 @ (-E[2]), E[1])
    np.testing.assert_array_equal(E3 @ E[0], E[1])


def test_endomorphism_algebra_exact():
    assert endo_algebra_residual() == 0.0


def test_endomorphisms_skew_for_the_form(rng):
    # <E u, v> = -<u, E v>: each E is an infinitesimal isometry
    u, v = rng.standard_normal((2, 100, 4))
    for A, d in IDS:
        Em = endomorphism(A, d)
        np.testing.assert_allclose(inner(u @ Em.T, v), -inner(u, v @ Em.T), atol=1e-13)


def test_orientation_signs(rng):
    dets = orientation_dets(rng.standard_normal((1000, 4)))
    assert np.all(dets["+"] > 0) and np.all(dets["-"] < 0)


def test_decomp_trivial_case():
    e = E[0]
    assert decomp_residual(e, e, e) == 0.0


def test_decomp_random(rng):
    e = random_unit_spacelike(rng, 2000)
    np.testing.assert_allclose(inner(e, e), 1.0, atol=1e-14)
    V, W = rng.standard_normal((2, 2000, 4))
    assert decomp_residual(e, V, W).max() <= 1e-12
    assert gaussmap_residual("decomp", rng=rng, count=1000).sup <= 1e-12


def test_geodesic_slice_gauss_map():
    mesh = seed_surface("geodesic_slice", 32)
    gm = gauss_map_eval(assemble_node_geometry(mesh))
    chi, th = mesh.chi[:, None], mesh.theta[None, :]
    expected = np.stack(np.broadcast_arrays(-np.sinh(chi) * np.cos(th), np.sinh(chi) * np.sin(th), np.cosh(chi)), axis=-1) / SQRT2
    # interior rows use central differences whose directions are exact on the slice
    np.testing.assert_allclose(gm.plus[1:-1], expected[1:-1], atol=1e-12)
    assert gm.constraint_residual() <= 1e-12


def test_gauss_map_on_positive_sheet(rng):
    f = assemble_node_geometry(seed_surface("perturbed", 32, amplitude=0.08, mode=3, seed=5))
    gm = gauss_map_eval(f)
    assert gm.constraint_residual() <= 1e-12
    assert np.all(gm.plus[..., 2] > 0) and np.all(gm.minus[..., 2] > 0)


def test_frame_rotation_invariance(rng):
    f = assemble_node_geometry(seed_surface("perturbed", 16, amplitude=0.05))
    T1, T2 = f.tangents
    a = rng.uniform(0, 2 * math.pi, T1.shape[:2])[..., None]
    R1 = np.cos(a) * T1 + np.sin(a) * T2
    R2 = -np.sin(a) * T1 + np.cos(a) * T2
    g0, g1 = gauss_map_from_frame(T1, T2), gauss_map_from_frame(R1, R2)
    np.testing.assert_allclose(g0.plus, g1.plus, atol=1e-12)
    np.testing.assert_allclose(g0.minus, g1.minus, atol=1e-12)


def test_area_form_route_agrees():
    f = assemble_node_geometry(seed_surface("perturbed", 32, amplitude=0.05, kappa=1.0))
    T1, T2 = f.tangents
    a, b = gauss_map_from_frame(T1, T2), gauss_map_area_form(T1, T2)
    np.testing.assert_allclose(a.plus, b.plus, atol=1e-12)
    np.testing.assert_allclose(a.minus, b.minus, atol=1e-12)


def test_degenerate_frame():
    with pytest.raises(ContractError):
        gauss_map_from_frame(E[0], 2 * E[0])


@pytest.mark.parametrize("d", ["+", "-"])
def test_complex_structure_squares_to_minus_one(d, rng):
    x = rng.standard_normal((200, 2)) * 0.8
    p = np.stack([x[:, 0], x[:, 1], np.sqrt(0.5 + (x**2).sum(1))], axis=-1)
    X = rng.standard_normal((200, 3))
    X = X + 2 * inner(X, p)[:, None] * p
    np.testing.assert_allclose(inner(X, p), 0.0, atol=1e-13)
    JX = complex_structure(p, X, d)
    np.testing.assert_allclose(inner(JX, p), 0.0, atol=1e-13)
    np.testing.assert_allclose(inner(JX, JX), inner(X, X), atol=1e-12)
    np.testing.assert_allclose(complex_structure(p, JX, d), -X, atol=1e-12)


def test_unknown_residual_kind():
    with pytest.raises(ContractError):
        gaussmap_residual("maslov")
    with pytest.raises(ContractError):
        gaussmap_residual("lagrangian")


def test_geodesic_slice_static_residuals():
    f = assemble_node_geometry(seed_surface("geodesic_slice", 32))
    assert gaussmap_residual("tau_equals_dphi", f).sup <= 1e-12
    assert gaussmap_residual("lagrangian", f).sup <= 1e-12
    assert gaussmap_residual("induced_metric", f).sup <= 5e-3


def test_static_refinement():
    study = gaussmap_refinement(levels=(16, 32, 64))
    for kind, v in study.items():
        assert v["orders"][-1] >= 1.8, kind


def test_flow_residual_contracts():
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16), spacing=1, count=2)
    with pytest.raises(ContractError):
        gaussmap_flow_residual(seq, delta)
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16, kappa=2.0), spacing=1)
    with pytest.raises(ContractError):
        gaussmap_flow_residual(seq, delta)


def test_flow_residual_geodesic_slice():
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16))
    chk = gaussmap_flow_residual(seq, delta)
    assert max(chk.evolution, chk.tangent_relation, chk.complex_relation) <= 1e-12


def test_flow_relations_converge():
    errs = []
    for n in (32, 64):
        seq, delta = run_snapshots(seed_surface("perturbed", n, amplitude=0.05), spacing=2)
        errs.append(gaussmap_flow_residual(seq, delta, band=interior_band(seq[1].mesh)))
    for key in ("evolution", "tangent_relation", "complex_relation"):
        assert getattr(errs[1], key) < getattr(errs[0], key) / 2.8, key


def test_frozen_umbilic_family():
    out = frozen_check(levels=(16, 32))
    assert out["passed"]
    assert max(out["residuals"]) <= out["floor"]
