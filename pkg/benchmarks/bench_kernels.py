"""Compiled (numba) against vectorised numpy kernels.

Times the per-node geometry assembly and the fused Euler flow step on
perturbed patches, checks that both paths agree, and prints a table.

    python benchmarks/bench_kernels.py [--sizes 32 64 128] [--steps 20] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from adsflow import _kernels as kern
from adsflow.flow import cfl_dt
from adsflow.surface import BC_CODES, seed_surface


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def field_args(mesh):
    return (mesh.padded(), mesh.dchi, mesh.dtheta, mesh.kappa, mesh.bc_lo == "pinned", mesh.bc_hi == "pinned", mesh.rotational)


def advance_args(mesh, steps):
    dt = cfl_dt(mesh)
    return (
        int(steps),
        dt,
        mesh.kappa,
        mesh.dchi,
        mesh.dtheta,
        BC_CODES[mesh.bc_lo],
        BC_CODES[mesh.bc_hi],
        mesh.chi_lo,
        mesh.chi_hi,
        mesh.rotational,
    )


def bench(size, steps, repeat):
    mesh = seed_surface("perturbed", size, amplitude=0.05, mode=2, bc=("neumann_ghost", "neumann_ghost"))
    args = field_args(mesh)
    # warm-up compiles (cached on disk after the first run)
    kern.surface_fields(*args)
    t_nb = best_of(lambda: kern.surface_fields(*args), repeat)
    t_np = best_of(lambda: kern.surface_fields_np(*args), repeat)
    gh_nb = kern.surface_fields(*args)[2]
    gh_np = kern.surface_fields_np(*args)[2]
    diff_fields = float(np.abs(gh_nb - gh_np).max())
    rows = [("surface_fields", size, t_nb, t_np, diff_fields)]

    adv = advance_args(mesh, steps)
    kern.euler_advance(mesh.padded(), 1, *adv[1:])
    Fa, Fb = mesh.padded(), mesh.padded()
    t_nb = best_of(lambda: kern.euler_advance(Fa.copy(), *adv), repeat)
    t_np = best_of(lambda: kern.euler_advance_np(Fb.copy(), *adv), repeat)
    kern.euler_advance(Fa, *adv)
    kern.euler_advance_np(Fb, *adv)
    diff_adv = float(np.abs(Fa[1:-1] - Fb[1:-1]).max())
    rows.append((f"euler_advance x{steps}", size, t_nb, t_np, diff_adv))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if not kern.USE_NUMBA:
        raise SystemExit("numba path disabled (ADSFLOW_DISABLE_NUMBA set); nothing to compare")
    print(f"{'kernel':<20} {'N':>5} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8} {'max diff':>10}")
    for size in args.sizes:
        for name, n, t_nb, t_np, diff in bench(size, args.steps, args.repeat):
            print(f"{name:<20} {n:>5} {1e3 * t_nb:>11.2f} {1e3 * t_np:>11.2f} {t_np / t_nb:>8.1f} {diff:>10.2e}")


if __name__ == "__main__":
    main()
