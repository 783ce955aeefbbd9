import numpy as np
import pytest

from adsflow.evolution import KINDS, evolution_refinement, residual_from_snapshots, run_snapshots
from adsflow.pseudo_euclidean import ContractError
from adsflow.surface import interior_band, seed_surface


def test_needs_three_snapshots():
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16), spacing=1, count=2)
    with pytest.raises(ContractError):
        residual_from_snapshots("metric", seq, delta)


@pytest.mark.parametrize("kind", [k for k in KINDS if k not in ("scalar2d", "lemma_g")])
def test_geodesic_slice_stationary(kind):
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16))
    # both sides vanish; what is left is rounding divided by the time step
    assert residual_from_snapshots(kind, seq, delta).residual <= 1e-14 / delta


@pytest.mark.parametrize("G", ["H", "K"])
def test_geodesic_slice_scalar_functions(G):
    seq, delta = run_snapshots(seed_surface("geodesic_slice", 16))
    for kind in ("scalar2d", "lemma_g"):
        assert residual_from_snapshots(kind, seq, delta, G=G).residual <= 1e-14 / delta


def test_angle_nonlinear_term():
    # phi_t = Delta_sigma phi - 2 phi: on an umbilic slice only -2 phi survives
    mesh = seed_surface("umbilic_slice", 32, s=0.3, bc=("neumann_ghost", "neumann_ghost"))
    seq, delta = run_snapshots(mesh, spacing=2)
    chk = residual_from_snapshots("angle", seq, delta)
    band = interior_band(seq[1].mesh)
    np.testing.assert_allclose(chk.rhs[band], -2 * seq[1].phi[band], atol=1e-6)
    assert chk.residual < 1e-2


def test_scalar2d_h_matches_direct_mean_curvature_route():
    mesh = seed_surface("perturbed", 32, amplitude=0.05)
    seq, delta = run_snapshots(mesh, spacing=2)
    a = residual_from_snapshots("scalar2d", seq, delta, G="H")
    b = residual_from_snapshots("lemma_g", seq, delta, G="H")
    np.testing.assert_array_equal(a.lhs, b.lhs)
    assert np.abs(a.rhs - b.rhs)[a.band].max() < 10 * max(a.residual, b.residual)


def test_small_refinement_orders():
    study = evolution_refinement(("metric", "angle"), levels=(32, 64, 128))
    for v in study.values():
        assert v["orders"][-1] >= 1.8
