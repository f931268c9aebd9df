"""Command-line interface: ``run``, ``fit-rate`` and ``export``.

Exit codes: 0 success, 2 invalid configuration or arguments, 3 runtime error.
"""
import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import io
from .afem import CycleRecord, run_afem
from .config import ConfigError, dump_config, load_config
from .cylinder import GradedInterval, TensorMesh

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("fracocp")


class InputError(ValueError):
    """Bad command-line input (maps to exit code 2)."""


def cycle_dir(rundir, cycle):
    return Path(rundir) / "cycles" / f"cycle_{cycle:03d}"


# -- run -------------------------------------------------------------------------

class _RunWriter:
    """Observer that writes every cycle to the run directory as it completes."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.records = []

    def __call__(self, state):
        rec = state.record
        self.records.append(rec)
        d = cycle_dir(self.outdir, rec.cycle)
        d.mkdir(parents=True, exist_ok=True)
        mesh, sol, rep = state.mesh, state.solution, state.report
        base = mesh.base
        io.write_mesh(d / "mesh.txt", base)
        io.write_control_csv(d / "control.csv", sol.control.values)
        io.write_estimator_csv(d / "estimator.csv", rep)
        io.write_element_csv(d / "elements.csv", base, rep)
        nv = base.n_vertices
        io.write_nodal_csv(d / "traces.csv", {"state_trace": sol.state[:nv],
                                              "adjoint_trace": sol.adjoint[:nv]})
        io.write_csv(d / "optimizer.csv", ["iteration", "J", "pg_norm"], sol.history)
        marked = state.marked_cells if state.marked_cells is not None else []
        io.write_csv(d / "marked.csv", ["cell"], ([c] for c in marked))
        np.savez(d / "fields.npz", state=sol.state, adjoint=sol.adjoint,
                 y=mesh.interval.nodes, s=mesh.s, gamma=mesh.gamma)
        self.write_summary()

    def write_summary(self):
        io.write_csv(self.outdir / "summary.csv", CycleRecord.columns(),
                     ([getattr(r, c) for c in CycleRecord.columns()] for r in self.records))


def cmd_run(args):
    config = load_config(args.config)
    if args.output:
        config.output_dir = str(Path(args.output))
    if args.max_cycles is not None:
        config.max_cycles = args.max_cycles
        config.validate()
    out = Path(config.output_dir)
    if out.exists():
        if not args.force and any(out.iterdir()):
            raise InputError(f"output directory {out} is not empty (use --force)")
        shutil.rmtree(out / "cycles", ignore_errors=True)
        shutil.rmtree(out / "vtk", ignore_errors=True)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(config))
    writer = _RunWriter(out)
    try:
        records = run_afem(config.afem_config(), observer=writer)
    finally:
        writer.write_summary()
    if config.export_vtk:
        last = records[-1].cycle
        for c in sorted({0, last // 2, last}):
            export_cycle(out, c, out / "vtk")
    final = records[-1]
    print(f"{out}: {len(records)} cycles, #T_Y={final.n_cells}, "
          f"total={io.fmt(final.total)}")
    return EXIT_OK


# -- fit-rate ---------------------------------------------------------------------

def fit_rate(n_cells, totals):
    """Least-squares slope of ``log total`` against ``log n_cells``."""
    n = np.asarray(n_cells, dtype=float)
    e = np.asarray(totals, dtype=float)
    if n.size < 2:
        raise InputError("need at least two rows to fit a rate")
    if np.any(n <= 0) or np.any(e <= 0) or not np.all(np.isfinite(np.r_[n, e])):
        raise InputError("cell counts and estimator values must be positive and finite")
    x = np.log(n)
    if np.ptp(x) == 0:
        raise InputError("all rows have the same #T_Y; the rate is undefined")
    return float(np.polyfit(x, np.log(e), 1)[0])


def cmd_fit_rate(args):
    try:
        rows = io.read_csv(args.summary)
    except OSError as exc:
        raise InputError(f"{args.summary}: {exc.strerror}") from None
    if args.window < 2:
        raise InputError("window must be at least 2")
    try:
        rows = rows[-args.window:]
        n = [float(r["n_cells"]) for r in rows]
        e = [float(r["total"]) for r in rows]
    except (KeyError, ValueError, TypeError):
        raise InputError(f"{args.summary}: expected numeric columns 'n_cells' and 'total'") from None
    print(io.fmt(fit_rate(n, e)))
    return EXIT_OK


# -- export -------------------------------------------------------------------------

def export_cycle(rundir, cycle, outdir=None):
    """Write VTK files for one stored cycle; returns the written paths."""
    d = cycle_dir(rundir, cycle)
    if not d.is_dir():
        raise InputError(f"cycle {cycle} not found in {rundir}")
    outdir = Path(outdir) if outdir is not None else Path(rundir) / "vtk"
    outdir.mkdir(parents=True, exist_ok=True)
    base = io.read_mesh(d / "mesh.txt")
    control = np.array([float(r["value"]) for r in io.read_csv(d / "control.csv")])
    traces = io.read_csv(d / "traces.csv")
    elements = io.read_csv(d / "elements.csv")
    cell_data = {"control": control,
                 "estimator2": [float(r["E2"]) for r in elements],
                 "oscillation2": [float(r["osc2"]) for r in elements]}
    point_data = {"state_trace": [float(r["state_trace"]) for r in traces],
                  "adjoint_trace": [float(r["adjoint_trace"]) for r in traces]}
    paths = [outdir / f"base_{cycle:03d}.vtk", outdir / f"cylinder_{cycle:03d}.vtk",
             outdir / f"mesh_{cycle:03d}.txt"]
    io.write_vtk_base(paths[0], base, point_data, cell_data, title=f"cycle {cycle}")
    f = np.load(d / "fields.npz")
    y = f["y"]
    interval = GradedInterval(float(y[-1]), len(y) - 1, float(f["gamma"]), y)
    mesh = TensorMesh(base, interval, float(f["s"]))
    io.write_vtk_cylinder(paths[1], mesh, {"state": f["state"], "adjoint": f["adjoint"]},
                          title=f"cycle {cycle}")
    io.write_mesh(paths[2], base)
    return paths


def cmd_export(args):
    paths = export_cycle(args.rundir, args.cycle, args.out)
    for p in paths:
        print(p)
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fracocp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the adaptive loop described by an INI file")
    r.add_argument("config")
    r.add_argument("--output", help="override output_dir")
    r.add_argument("--max-cycles", type=int, help="override max_cycles")
    r.add_argument("--force", action="store_true", help="reuse a non-empty output directory")
    r.set_defaults(func=cmd_run)
    f = sub.add_parser("fit-rate", help="log-log slope of the estimator over the last cycles")
    f.add_argument("summary")
    f.add_argument("--window", type=int, default=5)
    f.set_defaults(func=cmd_fit_rate)
    e = sub.add_parser("export", help="write VTK files for a stored cycle")
    e.add_argument("rundir")
    e.add_argument("--cycle", type=int, required=True)
    e.add_argument("--out", help="destination directory (default <rundir>/vtk)")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
