"""Command-line front end: single solves, shape-parameter sweeps, convergence
studies and stencil-size/shape-parameter isoline grids.

Exit codes: 0 success, 2 usage, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import assembly, bench, plots
from .rbf_direct import KINDS
from .solver import DEFAULT_MAX_OUTER, DEFAULT_RESTART, DEFAULT_TOL, PRECONDITIONERS

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
DISTRIBUTIONS = ("uniform", "halton", "quasi-uniform", "repel")
NUMERICAL_ERRORS = (assembly.AssemblyError, np.linalg.LinAlgError, ArithmeticError)


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _list_of(conv):
    def parse(text: str) -> list:
        items = [t for t in text.replace(" ", "").split(",") if t]
        if not items:
            raise argparse.ArgumentTypeError("empty list")
        return [conv(t) for t in items]
    return parse


def _common(p: argparse.ArgumentParser, single_n: bool = True, single_stencil: bool = True,
            single_eps: bool = True) -> None:
    p.add_argument("--problem", choices=bench.PROBLEMS, default="pep5")
    p.add_argument("--method", choices=assembly.METHODS, default="lim-rbfqr")
    p.add_argument("--dist", choices=DISTRIBUTIONS, default=None,
                   help="node distribution (default: the problem's own)")
    if single_n:
        p.add_argument("--n", type=_positive_int, default=400, help="target interior node count N")
    if single_stencil:
        p.add_argument("--stencil", type=_positive_int, default=25, help="stencil size n")
    if single_eps:
        p.add_argument("--epsilon", type=_positive_float, default=1.0, help="shape parameter")
    p.add_argument("--kind", choices=KINDS, default="GA", help="RBF kind for direct methods")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary-order", type=_positive_int, default=assembly.QuadratureOrders.boundary)
    p.add_argument("--radial-order", type=_positive_int, default=assembly.QuadratureOrders.radial)
    p.add_argument("--angular-order", type=_positive_int, default=assembly.QuadratureOrders.angular)
    p.add_argument("--kappa", type=_positive_float, default=assembly.SUBREGION_FACTOR,
                   help="subregion radius as a fraction of the nearest-neighbour distance")
    p.add_argument("--restart", type=_positive_int, default=DEFAULT_RESTART)
    p.add_argument("--tol", type=_positive_float, default=DEFAULT_TOL)
    p.add_argument("--max-outer", type=_positive_int, default=DEFAULT_MAX_OUTER)
    p.add_argument("--preconditioner", choices=PRECONDITIONERS, default="jacobi")
    p.add_argument("--no-ilu-fallback", action="store_true",
                   help="do not retry with incomplete-LU preconditioning when GMRES fails")
    p.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                   help="worker pool size (default: available parallelism)")
    p.add_argument("--no-timing", action="store_true",
                   help="write wall_seconds as 0 so repeated runs give byte-identical CSV")
    p.add_argument("--k", type=_positive_float, default=None, help="convdiff1d reaction coefficient")
    p.add_argument("--u0", type=_positive_float, default=None, help="convdiff1d inlet value")
    p.add_argument("--u1", type=_positive_float, default=None, help="convdiff1d outlet value")
    p.add_argument("--pe", type=_positive_float, default=None, help="thermal Peclet number")
    p.add_argument("--out", default="-", help="result CSV path, '-' for standard output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="limqr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single solve")
    _common(p)
    p.add_argument("--field", default=None, help="solution field CSV path (x,y,u_apx[,u_exact])")
    p.add_argument("--diagnostics", default=None, help="per-row condition number CSV path")

    p = sub.add_parser("sweep", help="error versus shape parameter")
    _common(p, single_eps=False)
    p.add_argument("--epsilons", type=_list_of(_positive_float), required=True)
    p.add_argument("--plot", default=None, help="SVG path for the error-vs-epsilon plot")

    p = sub.add_parser("converge", help="error versus interior node count")
    _common(p, single_n=False)
    p.add_argument("--sizes", type=_list_of(_positive_int), required=True)
    p.add_argument("--plot", default=None, help="SVG path for the error-vs-N plot")

    p = sub.add_parser("isolines", help="error over a stencil-size by shape-parameter grid")
    _common(p, single_stencil=False, single_eps=False)
    p.add_argument("--stencils", type=_list_of(_positive_int), required=True)
    p.add_argument("--epsilons", type=_list_of(_positive_float), required=True)
    p.add_argument("--metric", choices=("rms", "l2pct", "linf"), default="rms")
    p.add_argument("--plot", default=None, help="SVG path for the heatmap")
    return parser


def _problem(args) -> bench.ProblemSpec:
    params = {}
    if args.problem == "convdiff1d":
        params = {k: v for k, v in (("k", args.k), ("u0", args.u0), ("u1", args.u1)) if v is not None}
    elif args.problem == "thermal" and args.pe is not None:
        params = {"pe": args.pe}
    elif any(v is not None for v in (args.k, args.u0, args.u1, args.pe)):
        raise UsageError(f"problem {args.problem} takes no parameters")
    return bench.problem_catalog(args.problem, **params)


def _solver_kwargs(args, threads: int) -> dict:
    if args.method == "lim-rbfqr" and args.kind != "GA":
        raise UsageError("lim-rbfqr requires the Gaussian basis (--kind GA)")
    return dict(kind=args.kind,
                orders=assembly.QuadratureOrders(args.boundary_order, args.radial_order, args.angular_order),
                kappa=args.kappa, restart=args.restart, tol=args.tol, max_outer=args.max_outer,
                preconditioner=args.preconditioner, ilu_fallback=not args.no_ilu_fallback,
                threads=threads)


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _write_rows(rows: Sequence[dict], path: str, no_timing: bool) -> None:
    if no_timing:
        rows = [{**r, "wall_seconds": 0.0} for r in rows]
    with _open_out(path) as fh:
        bench.write_results_csv(rows, fh, extra=("reason",))


def _write_text(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_run(args) -> int:
    problem = _problem(args)
    kwargs = _solver_kwargs(args, args.threads)
    res = bench.run(problem, args.method, args.dist, args.n, args.stencil, args.epsilon, args.seed,
                    with_condition=args.diagnostics is not None, **kwargs)
    row = res.as_row()
    row["reason"] = "" if res.report.converged else f"gmres {res.report.status.name.lower()}"
    _write_rows([row], args.out, args.no_timing)
    if args.field:
        pts = res.nodeset.interior
        with open(args.field, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            exact = problem.exact(pts) if problem.exact is not None else None
            w.writerow(["x", "y", "u_apx"] + (["u_exact"] if exact is not None else []))
            for i, p in enumerate(pts):
                vals = [p[0], p[1], res.solution[i]] + ([exact[i]] if exact is not None else [])
                w.writerow([format(v, ".17g") for v in vals])
    if args.diagnostics:
        with open(args.diagnostics, "w", newline="") as fh:
            assembly.write_diagnostics(res.rows, res.stencils, fh)
    if not res.report.converged:
        print(f"error: numerical: gmres {res.report.status.name.lower()} "
              f"residual={res.report.residual:.3e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _label(args) -> str:
    return f"{args.problem} {args.method}"


def cmd_sweep(args) -> int:
    problem = _problem(args)
    rows = bench.epsilon_sweep(problem, args.method, args.dist, args.n, args.stencil, args.epsilons,
                               args.seed, workers=args.threads, **_solver_kwargs(args, 1))
    _write_rows(rows, args.out, args.no_timing)
    if args.plot:
        s = plots.Series(_label(args), [r["epsilon"] for r in rows], [r["rms"] for r in rows])
        _write_text(args.plot, plots.line_plot([s], "shape parameter", "RMS error",
                                               f"{args.problem}: error vs shape parameter", xlog=True))
    return EXIT_OK


def cmd_converge(args) -> int:
    problem = _problem(args)
    rows = bench.convergence_study(problem, args.method, args.dist, args.sizes, args.stencil, args.epsilon,
                                   args.seed, workers=args.threads, **_solver_kwargs(args, 1))
    _write_rows(rows, args.out, args.no_timing)
    if args.plot:
        s = plots.Series(_label(args), [float(r["N"]) for r in rows], [r["l2pct"] for r in rows])
        _write_text(args.plot, plots.line_plot([s], "interior nodes N", "relative L2 error (%)",
                                               f"{args.problem}: convergence", xlog=True))
    return EXIT_OK


def cmd_isolines(args) -> int:
    problem = _problem(args)
    rows = bench.isoline_grid(problem, args.method, args.dist, args.n, args.stencils, args.epsilons,
                              args.seed, workers=args.threads, **_solver_kwargs(args, 1))
    _write_rows(rows, args.out, args.no_timing)
    if args.plot:
        grid = np.array([r[args.metric] for r in rows], dtype=float).reshape(len(args.stencils),
                                                                            len(args.epsilons))
        _write_text(args.plot, plots.heatmap(args.stencils, args.epsilons, grid,
                                             f"{args.problem} {args.method}: log10 {args.metric}"))
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "converge": cmd_converge, "isolines": cmd_isolines}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"error: numerical: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
