import json
import os
import subprocess
import sys

import numpy as np
import pytest

from adsflow import _kernels as kern
from adsflow.flow import cfl_dt
from adsflow.surface import BC_CODES, seed_surface

MESHES = [
    ("perturbed", dict(amplitude=0.05, mode=2)),
    ("perturbed", dict(amplitude=0.05, bc=("neumann_ghost", "neumann_ghost"))),
    ("perturbed", dict(amplitude=0.05, bc=("periodic", "periodic"))),
    ("graph_radial", {}),
    ("umbilic_slice", dict(s=0.4, kappa=2.0, bc=("neumann_ghost", "pinned"))),
]


def _field_args(mesh):
    return (mesh.padded(), mesh.dchi, mesh.dtheta, mesh.kappa, mesh.bc_lo == "pinned", mesh.bc_hi == "pinned", mesh.rotational)


@pytest.mark.parametrize("kind,kw", MESHES)
def test_fields_agree(kind, kw):
    mesh = seed_surface(kind, 32, **kw)
    args = _field_args(mesh)
    a = kern.surface_fields(*args)
    b = kern.surface_fields_np(*args)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind,kw", MESHES)
def test_ghosts_agree(kind, kw):
    mesh = seed_surface(kind, 16, **kw)
    Fa = np.zeros((18,) + mesh.F.shape[1:])
    Fa[1:-1] = mesh.F
    Fb = Fa.copy()
    lo, hi = BC_CODES[mesh.bc_lo], BC_CODES[mesh.bc_hi]
    kern.fill_ghosts(Fa, lo, hi, mesh.chi_lo, mesh.chi_hi, mesh.kappa)
    kern.fill_ghosts_np(Fb, lo, hi, mesh.chi_lo, mesh.chi_hi, mesh.kappa)
    np.testing.assert_allclose(Fa, Fb, rtol=0, atol=1e-14)


@pytest.mark.parametrize("kind,kw", MESHES)
def test_euler_advance_agrees(kind, kw):
    mesh = seed_surface(kind, 32, **kw)
    dt = cfl_dt(mesh)
    args = (10, dt, mesh.kappa, mesh.dchi, mesh.dtheta, BC_CODES[mesh.bc_lo], BC_CODES[mesh.bc_hi], mesh.chi_lo, mesh.chi_hi, mesh.rotational)
    Fa, Fb = mesh.padded(), mesh.padded()
    ra = kern.euler_advance(Fa, *args)
    rb = kern.euler_advance_np(Fb, *args)
    assert tuple(ra) == tuple(rb)
    np.testing.assert_allclose(Fa[1:-1], Fb[1:-1], rtol=1e-13, atol=1e-13)


def test_euler_advance_reports_failure():
    mesh = seed_surface("perturbed", 16, amplitude=0.05)
    args = (5, 0.05, mesh.kappa, mesh.dchi, mesh.dtheta, BC_CODES[mesh.bc_lo], BC_CODES[mesh.bc_hi], mesh.chi_lo, mesh.chi_hi, mesh.rotational)
    done, status, i, j = kern.euler_advance(mesh.padded(), *args)
    assert status != 0 and done < 5
    assert (done, status, i, j) == kern.euler_advance_np(mesh.padded(), *args)


SCRIPT = """
import json
from adsflow import _kernels as kern
from adsflow.flow import FlowConfig, run_flow
run = run_flow(FlowConfig(mode="mesh", initial=dict(kind="perturbed", resolution=16, amplitude=0.05), t_end=0.02))
print(json.dumps({"numba": kern.USE_NUMBA, "F": run.final.F.ravel().tolist()}))
"""


def test_numpy_fallback_selected_by_env():
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, ADSFLOW_DISABLE_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
        out[flag] = json.loads(res.stdout)
    assert out["0"]["numba"] is True and out["1"]["numba"] is False
    np.testing.assert_allclose(out["0"]["F"], out["1"]["F"], rtol=0, atol=1e-12)
