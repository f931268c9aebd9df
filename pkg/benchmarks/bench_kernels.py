"""Timing of the symmetric Gauss-Seidel kernel and of full state solves.

Usage: python benchmarks/bench_kernels.py [--levels 6 8 10] [--s 0.5] [--repeat 5]

Prints one row per mesh: unknowns, time per SGS sweep for the compiled and
the pure-Python backend, and PCG time/iterations per preconditioner.
"""
import argparse
import time

import numpy as np

from fracocp.assembly import assemble_stiffness, assemble_trace_load
from fracocp.cylinder import build_tensor
from fracocp.kernels import HAVE_COMPILED, sgs_sweep
from fracocp.mesh import make_lshape
from fracocp.solver import SolverConfig, solve_spd


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--levels", type=int, nargs="+", default=[4, 6, 8])
    p.add_argument("--s", type=float, default=0.5)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    rng = np.random.default_rng(0)
    print(f"compiled kernels available: {HAVE_COMPILED}")
    print(f"{'level':>5} {'unknowns':>9} {'sgs compiled':>13} {'sgs python':>11} "
          f"{'speedup':>8}   pcg (seconds / iterations)")
    for level in args.levels:
        mesh = build_tensor(make_lshape(level), args.s, C_Tr=1.0)
        system = assemble_stiffness(mesh)
        A = system.matrix
        r = rng.standard_normal(A.shape[0])
        t_py = best_of(lambda: sgs_sweep(A, "python")(r), args.repeat)
        if HAVE_COMPILED:
            t_c = best_of(lambda: sgs_sweep(A, "compiled")(r), args.repeat)
            comp, speed = f"{t_c:13.2e}", f"{t_py / t_c:8.1f}"
        else:
            comp, speed = f"{'n/a':>13}", f"{'n/a':>8}"
        load = assemble_trace_load(mesh, 1.0)
        pcg = []
        for kind in ("sgs", "line", "tensor"):
            t0 = time.perf_counter()
            _, info = solve_spd(system, load, SolverConfig(preconditioner=kind))
            pcg.append(f"{kind} {time.perf_counter() - t0:.2f}/{info.iterations}")
        print(f"{level:5d} {A.shape[0]:9d} {comp} {t_py:11.2e} {speed}   {', '.join(pcg)}")


if __name__ == "__main__":
    main()
