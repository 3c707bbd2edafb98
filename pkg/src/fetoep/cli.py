"""Command-line entry point: ``fetoep <subcommand> [options]``.

Subcommands
-----------
mesh      write the refinement sequence as Triangle ``.node``/``.ele`` files
assemble  assemble one level and report (optionally write) the matrix
solve     solve one level and print a CSV row
spectrum  eigenvalue scatter and outlier summary for one level
table     iteration table for a preset or config plan
export    Matrix Market export with a JSON manifest

Every subcommand takes a run from ``--preset``/``--config`` (the first run
unless ``--run`` names one) and applies the flag overrides on top.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .assembly import is_symmetric
from .errors import InvalidParameterError
from .experiments import (
    DOMAINS, METHODS, PRECONDS, SOURCES, ExperimentConfig, ExperimentPlan, TableResult, assemble_level,
    export_matrices, load_plan, load_preset, mesh_at, mesh_sequence, preset_names,
    run_spectrum, run_table, solve_level, table_row,
)
from .matrix_io import write_matrix, write_vector
from .mesh import write_triangle

log = logging.getLogger("fetoep")


def _add_run_flags(p, plan_level=False):
    g = p.add_argument_group("run selection")
    g.add_argument("--preset", help="packaged plan name (see 'table --list')")
    g.add_argument("--config", type=Path, help="plan file in INI form")
    if not plan_level:
        g.add_argument("--run", help="run name inside the plan (default: first)")
    o = p.add_argument_group("overrides")
    o.add_argument("--domain", choices=DOMAINS + ("unit-square",))
    o.add_argument("--source", choices=SOURCES)
    o.add_argument("--mesh-file", help="Triangle basename for the unstructured source")
    o.add_argument("--m0", type=int, help="segments per side at level 0")
    o.add_argument("--levels", type=int, help="number of refinement levels")
    o.add_argument("--alpha", type=float, help="perturbation radius relative to h")
    o.add_argument("--seed", type=int)
    o.add_argument("--a", help="diffusion: a1 | a2[:y0] | a3[:y0] | const:<v>")
    o.add_argument("--b", help="convection: linear | const:<bx>,<by> | none")
    o.add_argument("--method", choices=METHODS)
    o.add_argument("--precond", choices=PRECONDS)
    o.add_argument("--spacing", help="surrogate lattice spacing: edge | area | <number>")
    o.add_argument("--tol", type=float)
    o.add_argument("--maxit", type=int)
    p.add_argument("--out", type=Path, help="output directory (default: stdout where it makes sense)")


def _overrides(args):
    keys = ("domain", "source", "mesh_file", "m0", "levels", "alpha", "seed", "a", "b",
            "method", "precond", "spacing", "tol", "maxit")
    return {k: getattr(args, k) for k in keys}


def _plan(args) -> ExperimentPlan:
    if args.preset and args.config:
        raise InvalidParameterError("give --preset or --config, not both")
    if args.preset:
        plan = load_preset(args.preset)
    elif args.config:
        plan = load_plan(args.config)
    else:
        plan = ExperimentPlan("cli", (ExperimentConfig(name="cli"),))
    return plan.replace(**_overrides(args))


def _config(args) -> ExperimentConfig:
    plan = _plan(args)
    if getattr(args, "run", None):
        for run in plan.runs:
            if run.name == args.run:
                return run
        raise InvalidParameterError(f"no run {args.run!r} in plan {plan.name!r}")
    return plan.runs[0]


def _emit(text, out, filename):
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    path = out / filename
    path.write_text(text)
    log.info("wrote %s", path)


def cmd_mesh(args):
    config = _config(args)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["level", "family", "m", "nodes", "triangles", "n", "h", "file"])
    for level, mesh in mesh_sequence(config):
        name = ""
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            base = args.out / f"{config.domain}_{config.source}_L{level}"
            write_triangle(mesh, base)
            name = str(base)
        w.writerow([level, mesh.family, "" if mesh.m is None else mesh.m, mesh.n_nodes,
                    mesh.n_triangles, mesh.n, f"{mesh.h:.12g}", name])
    return 0


def cmd_assemble(args):
    config = _config(args)
    mesh = mesh_at(config, args.level)
    system = assemble_level(config, mesh)
    A = system.matrix
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["run", "level", "n", "nnz", "symmetric"])
    w.writerow([config.name, args.level, A.shape[0], A.nnz, int(is_symmetric(A))])
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = write_matrix(args.out / "A.mtx", A)
        write_vector(args.out / "rhs.txt", system.rhs)
        log.info("wrote %s", path)
    return 0


def cmd_solve(args):
    config = _config(args)
    mesh = mesh_at(config, args.level)
    report = solve_level(config, mesh)
    sys.stdout.write(TableResult([table_row(config, args.level, mesh, report)]).to_csv())
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_vector(args.out / "solution.txt", report.x)
    return 0 if report.converged else 1


def cmd_spectrum(args):
    config = _config(args)
    result = run_spectrum(config, args.level, part=args.part)
    stem = f"{config.name}_L{args.level}_{args.part}"
    if args.out is None:
        sys.stdout.write(result.summary_csv())
        sys.stdout.write(result.checks_csv())
    else:
        _emit(result.scatter_csv(), args.out, f"{stem}_scatter.csv")
        _emit(result.summary_csv(), args.out, f"{stem}_summary.csv")
        _emit(result.checks_csv(), args.out, f"{stem}_checks.csv")
    return 0 if result.ok else 1


def cmd_table(args):
    if args.list:
        for name in preset_names():
            plan = load_preset(name)
            print(f"{name}: {', '.join(r.name for r in plan.runs)}")
        return 0
    plan = _plan(args)
    result = run_table(plan)
    _emit(result.to_csv(with_time=not args.no_time), args.out, f"{plan.name}.csv")
    if not result.ok:
        bad = sorted({r["run"] for r in result.rows if r["converged"] != "1"})
        log.error("not converged: %s", ", ".join(bad))
    return 0 if result.ok else 1


def cmd_export(args):
    if args.out is None:
        raise InvalidParameterError("export needs --out")
    config = _config(args)
    manifest = export_matrices(config, args.level, args.out)
    for f in manifest["files"]:
        print(args.out / f["file"])
    print(args.out / "manifest.json")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="fetoep", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="write the mesh sequence")
    _add_run_flags(p)
    p.set_defaults(func=cmd_mesh)

    for name, func, helptext in (
        ("assemble", cmd_assemble, "assemble one level"),
        ("solve", cmd_solve, "solve one level"),
        ("spectrum", cmd_spectrum, "preconditioned spectrum of one level"),
        ("export", cmd_export, "export matrices of one level"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_run_flags(p)
        p.add_argument("--level", type=int, default=0, help="refinement level (default 0)")
        if name == "spectrum":
            p.add_argument("--part", choices=("full", "real", "imag"), default="full")
        p.set_defaults(func=func)

    p = sub.add_parser("table", help="iteration table over all levels and runs")
    _add_run_flags(p, plan_level=True)
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.add_argument("--no-time", action="store_true", help="omit the time column")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InvalidParameterError, ValueError, ArithmeticError, OSError) as exc:
        print(f"fetoep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
