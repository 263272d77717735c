"""Benchmark problems, error norms and sweep/convergence drivers.

Every problem is written as ``Lap u = f + b(u, grad u)`` with ``f`` known and
``b`` linear.  Boundary data of problems with an exact solution are
manufactured from it.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import assembly
from .geometry import DIRICHLET, NEUMANN, Disk, NodeSet, Rectangle, make_nodes
from .operators import LinearTerm
from .rbf_direct import BasisKind
from .solver import DEFAULT_MAX_OUTER, DEFAULT_RESTART, DEFAULT_TOL, SolveReport, gmres_restarted

RESULTS_HEADER = ("problem", "method", "distribution", "N", "n", "epsilon",
                  "linf", "l2pct", "rms", "iterations", "wall_seconds")
PROBLEMS = ("pep5", "pep7", "disk", "convdiff1d", "thermal")
EDGE_TOL = 1e-10


@dataclass(frozen=True)
class Segment:
    """Boundary piece selected by ``where(points)``; ``data(points, normals)`` gives g."""

    name: str
    where: Callable[[np.ndarray], np.ndarray]
    bc: str
    data: Callable | None = None


@dataclass
class ProblemSpec:
    name: str
    domain: Rectangle | Disk
    f: Callable[[np.ndarray], np.ndarray] | None
    b_tilde: LinearTerm
    segments: list[Segment]
    exact: Callable[[np.ndarray], np.ndarray] | None = None
    exact_gradient: Callable[[np.ndarray], np.ndarray] | None = None
    default_distribution: str = "uniform"
    params: dict = field(default_factory=dict)

    def boundary_value(self, seg: Segment, points, normals) -> np.ndarray:
        if seg.data is not None:
            return np.broadcast_to(np.asarray(seg.data(points, normals), dtype=float), (len(points),))
        if seg.bc == DIRICHLET:
            return self.exact(points)
        return np.einsum("pd,pd->p", self.exact_gradient(points), normals)


@dataclass(frozen=True)
class ErrorReport:
    linf: float
    l2_percent: float
    rms: float


def error_norms(exact, approx) -> ErrorReport:
    """Max error, relative L2 error in percent and RMS error."""
    exact = np.asarray(exact, dtype=float)
    approx = np.asarray(approx, dtype=float)
    if exact.shape != approx.shape or exact.size < 1:
        raise ValueError("exact and approximate vectors must have equal nonzero length")
    e = exact - approx
    norm = math.sqrt(float(exact @ exact))
    l2 = 100.0 * math.sqrt(float(e @ e)) / norm if norm > 0 else float("nan")
    return ErrorReport(float(np.max(np.abs(e))), l2, math.sqrt(float(e @ e) / e.size))


def _on(axis: int, value: float):
    return lambda p: np.abs(p[:, axis] - value) < EDGE_TOL


def _anywhere(p):
    return np.ones(len(p), dtype=bool)


def _pep5() -> ProblemSpec:
    c = 1.25 * math.pi**2

    def exact(p):
        return np.sin(math.pi * p[:, 0]) * np.cos(0.5 * math.pi * p[:, 1])

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([math.pi * np.cos(math.pi * x) * np.cos(0.5 * math.pi * y),
                                -0.5 * math.pi * np.sin(math.pi * x) * np.sin(0.5 * math.pi * y)])

    segs = [Segment("left", _on(0, -0.5), DIRICHLET), Segment("right", _on(0, 0.5), DIRICHLET),
            Segment("bottom", _on(1, -0.5), NEUMANN), Segment("top", _on(1, 0.5), NEUMANN)]
    return ProblemSpec("pep5", Rectangle(-0.5, 0.5, -0.5, 0.5), lambda p: -c * exact(p),
                       LinearTerm(), segs, exact, grad)


def _pep7() -> ProblemSpec:
    pi = math.pi
    a, b, c, d = pi / 6, 7 * pi / 4, 3 * pi / 4, 5 * pi / 4

    def exact(p):
        x, y = p[:, 0], p[:, 1]
        return np.sin(a * x) * np.sin(b * x) * np.sin(c * y) * np.sin(d * y)

    def grad(p):
        x, y = p[:, 0], p[:, 1]
        X = np.sin(a * x) * np.sin(b * x)
        Y = np.sin(c * y) * np.sin(d * y)
        dX = a * np.cos(a * x) * np.sin(b * x) + b * np.sin(a * x) * np.cos(b * x)
        dY = c * np.cos(c * y) * np.sin(d * y) + d * np.sin(c * y) * np.cos(d * y)
        return np.column_stack([dX * Y, X * dY])

    def f(p):
        x, y = p[:, 0], p[:, 1]
        return pi**2 * (-751 / 144 * np.sin(a * x) * np.sin(b * x) * np.sin(c * y) * np.sin(d * y)
                        + 7 / 12 * np.cos(a * x) * np.cos(b * x) * np.sin(c * y) * np.sin(d * y)
                        + 15 / 8 * np.sin(a * x) * np.sin(b * x) * np.cos(c * y) * np.cos(d * y))

    return ProblemSpec("pep7", Rectangle(1.0, 2.0, 1.0, 2.0), f, LinearTerm(),
                       [Segment("all", _anywhere, DIRICHLET)], exact, grad)


def _disk() -> ProblemSpec:
    def exact(p):
        return np.sin(10.0 * (p[:, 0] + p[:, 1]))

    def grad(p):
        g = 10.0 * np.cos(10.0 * (p[:, 0] + p[:, 1]))
        return np.column_stack([g, g])

    return ProblemSpec("disk", Disk((0.0, 0.0), 1.0), lambda p: -200.0 * exact(p), LinearTerm(),
                       [Segment("circle", _anywhere, DIRICHLET)], exact, grad,
                       default_distribution="repel")


def _convdiff1d(k: float = 40.0, u0: float = 1.0, u1: float = 10.0) -> ProblemSpec:
    lg = math.log(u1 / u0)

    def velocity(p):
        return lg + k * (p[:, 0] - 0.5)

    def exact(p):
        x = p[:, 0]
        return u0 * np.exp(0.5 * k * x * x + (lg - 0.5 * k) * x)

    def grad(p):
        return np.column_stack([velocity(p) * exact(p), np.zeros(len(p))])

    segs = [Segment("inlet", _on(0, 0.0), DIRICHLET), Segment("outlet", _on(0, 1.0), DIRICHLET),
            Segment("walls", _anywhere, NEUMANN)]
    op = LinearTerm(u=lambda p: np.full(len(p), k), ux=velocity)
    return ProblemSpec("convdiff1d", Rectangle(0.0, 1.0, -0.1, 0.1), None, op, segs, exact, grad,
                       default_distribution="quasi-uniform", params={"k": k, "U0": u0, "U1": u1})


def _thermal(pe: float = 50.0, velocity_sign: float = 1.0) -> ProblemSpec:
    def velocity(p):
        return velocity_sign * 4.0 * p[:, 1] * (p[:, 1] - 1.0)

    segs = [Segment("hot wall", _on(1, 0.0), DIRICHLET, lambda p, n: 1.0),
            Segment("cold wall", _on(1, 1.0), DIRICHLET, lambda p, n: 0.0),
            Segment("inlet", _on(0, 0.0), DIRICHLET, lambda p, n: 0.0),
            Segment("outlet", _on(0, 1.0), NEUMANN, lambda p, n: 0.0)]
    op = LinearTerm(ux=lambda p: pe * velocity(p))
    return ProblemSpec("thermal", Rectangle(0.0, 1.0, 0.0, 1.0), None, op, segs,
                       default_distribution="quasi-uniform",
                       params={"Pe": pe, "velocity_sign": velocity_sign})


def problem_catalog(name: str, **params) -> ProblemSpec:
    """Problem by name; ``convdiff1d`` takes ``k, u0, u1``, ``thermal`` takes ``pe, velocity_sign``."""
    builders = {"pep5": _pep5, "pep7": _pep7, "disk": _disk, "convdiff1d": _convdiff1d,
                "thermal": _thermal}
    if name not in builders:
        raise ValueError(f"unknown problem {name!r}; expected one of {PROBLEMS}")
    return builders[name](**params)


def boundary_data(nodeset: NodeSet, problem: ProblemSpec) -> NodeSet:
    """Tag each boundary node with the first matching segment's BC kind and datum."""
    nb = nodeset.n_boundary
    bc = np.empty(nb, dtype=object)
    values = np.zeros(nb)
    todo = np.ones(nb, dtype=bool)
    for seg in problem.segments:
        mask = todo & seg.where(nodeset.boundary)
        if np.any(mask):
            bc[mask] = seg.bc
            values[mask] = problem.boundary_value(seg, nodeset.boundary[mask], nodeset.normals[mask])
            todo &= ~mask
    if np.any(todo):
        raise ValueError(f"{int(todo.sum())} boundary nodes not covered by any segment of {problem.name}")
    return nodeset.with_boundary_data(bc, values)


@dataclass
class RunResult:
    problem: str
    method: str
    distribution: str
    nodeset: NodeSet
    n: int
    epsilon: float
    solution: np.ndarray
    errors: ErrorReport | None
    report: SolveReport
    wall_seconds: float
    rows: list = field(repr=False, default_factory=list)
    stencils: list = field(repr=False, default_factory=list)

    def as_row(self) -> dict:
        e = self.errors or ErrorReport(float("nan"), float("nan"), float("nan"))
        return {"problem": self.problem, "method": self.method, "distribution": self.distribution,
                "N": self.nodeset.n_interior, "n": self.n, "epsilon": self.epsilon,
                "linf": e.linf, "l2pct": e.l2_percent, "rms": e.rms,
                "iterations": self.report.iterations, "wall_seconds": self.wall_seconds}


def solve_problem(problem: ProblemSpec, nodeset: NodeSet, method: str, epsilon: float, n: int,
                  kind: str = "GA", orders: assembly.QuadratureOrders = assembly.QuadratureOrders(),
                  kappa: float = assembly.SUBREGION_FACTOR, band_width: float | None = None,
                  restart: int = DEFAULT_RESTART, tol: float = DEFAULT_TOL,
                  max_outer: int = DEFAULT_MAX_OUTER, preconditioner: str = "jacobi",
                  ilu_fallback: bool = True, with_condition: bool = False,
                  threads: int = 1, distribution: str = "custom") -> RunResult:
    """Assemble and solve one problem on a given node set.

    If GMRES fails with the requested preconditioner and ``ilu_fallback`` is
    set, the solve is repeated once with incomplete-LU preconditioning; the
    report records which preconditioner produced the result.
    """
    t0 = time.perf_counter()
    nodeset = boundary_data(nodeset, problem)
    stencils = assembly.build_stencils(nodeset, n, band_width)
    assembly.attach_subregions(stencils, nodeset, kappa)
    rows = assembly.build_rows(method, stencils, nodeset, BasisKind(kind, epsilon), problem.f,
                               problem.b_tilde, orders, with_condition, threads)
    system = assembly.assemble_global(rows, nodeset)
    u, report = gmres_restarted(system.matrix, system.rhs, restart, tol, max_outer,
                                preconditioner=preconditioner)
    if not report.converged and ilu_fallback and preconditioner != "ilu":
        u, report = gmres_restarted(system.matrix, system.rhs, restart, tol, max_outer,
                                    preconditioner="ilu")
    system.solution = u
    wall = time.perf_counter() - t0
    errors = error_norms(problem.exact(nodeset.interior), u) if problem.exact is not None else None
    return RunResult(problem.name, method, distribution, nodeset, n, epsilon, u, errors, report, wall,
                     rows, stencils)


def run(problem: ProblemSpec | str, method: str, distribution: str | None, N: int, n: int,
        epsilon: float, seed: int = 0, **kwargs) -> RunResult:
    if isinstance(problem, str):
        problem = problem_catalog(problem)
    distribution = distribution or problem.default_distribution
    nodes = make_nodes(problem.domain, distribution, N, seed)
    return solve_problem(problem, nodes, method, epsilon, n, distribution=distribution, **kwargs)


def _dispatch(jobs: Sequence[Callable[[], dict]], workers: int) -> list[dict]:
    """Run independent jobs, returning results in submission order."""
    if workers <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: job(), jobs))


def epsilon_sweep(problem: ProblemSpec | str, method: str, distribution: str | None, N: int, n: int,
                  eps_list: Sequence[float], seed: int = 0, workers: int = 1, **kwargs) -> list[dict]:
    """One solve per shape parameter on a shared node set; failures give NaN rows."""
    if isinstance(problem, str):
        problem = problem_catalog(problem)
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    if any(not eps > 0 for eps in eps_list):
        raise ValueError("shape parameters must be positive")
    distribution = distribution or problem.default_distribution
    nodes = make_nodes(problem.domain, distribution, N, seed)

    def job(eps):
        return lambda: _guarded(lambda: solve_problem(problem, nodes, method, eps, n,
                                                      distribution=distribution, **kwargs),
                                problem.name, method, distribution, nodes.n_interior, n, eps)

    return _dispatch([job(eps) for eps in eps_list], workers)


def convergence_study(problem: ProblemSpec | str, method: str, distribution: str | None,
                      N_list: Sequence[int], n: int, epsilon: float, seed: int = 0,
                      workers: int = 1, **kwargs) -> list[dict]:
    """One solve per target interior count ``N`` (increasing)."""
    if isinstance(problem, str):
        problem = problem_catalog(problem)
    if not N_list:
        raise ValueError("N_list must be nonempty")
    if list(N_list) != sorted(N_list):
        raise ValueError("N_list must be increasing")
    distribution = distribution or problem.default_distribution

    def job(N):
        return lambda: _guarded(lambda: run(problem, method, distribution, N, n, epsilon, seed, **kwargs),
                                problem.name, method, distribution, N, n, epsilon)

    return _dispatch([job(N) for N in N_list], workers)


def isoline_grid(problem: ProblemSpec | str, method: str, distribution: str | None, N: int,
                 n_list: Sequence[int], eps_list: Sequence[float], seed: int = 0, workers: int = 1,
                 **kwargs) -> list[dict]:
    """Error over a stencil-size by shape-parameter grid, one long-format row per cell.

    Rows are ordered by ``n`` first, then ``epsilon``.
    """
    if isinstance(problem, str):
        problem = problem_catalog(problem)
    if not n_list or not eps_list:
        raise ValueError("grid axes must be nonempty")
    if any(not eps > 0 for eps in eps_list):
        raise ValueError("shape parameters must be positive")
    distribution = distribution or problem.default_distribution
    nodes = make_nodes(problem.domain, distribution, N, seed)

    def job(n, eps):
        return lambda: _guarded(lambda: solve_problem(problem, nodes, method, eps, n,
                                                      distribution=distribution, **kwargs),
                                problem.name, method, distribution, nodes.n_interior, n, eps)

    return _dispatch([job(n, eps) for n in n_list for eps in eps_list], workers)


def _guarded(job, problem, method, distribution, N, n, eps) -> dict:
    try:
        res = job()
    except (assembly.AssemblyError, np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        nan = float("nan")
        return {"problem": problem, "method": method, "distribution": distribution, "N": N, "n": n,
                "epsilon": eps, "linf": nan, "l2pct": nan, "rms": nan, "iterations": 0,
                "wall_seconds": nan, "reason": str(exc)}
    row = res.as_row()
    row["reason"] = "" if res.report.converged else f"gmres {res.report.status.name.lower()}"
    return row


def write_results_csv(rows: Sequence[dict], stream, extra: Sequence[str] = ()) -> None:
    header = list(RESULTS_HEADER) + list(extra)
    w = csv.DictWriter(stream, fieldnames=header, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k, "")) for k in header})


def read_results_csv(stream) -> list[dict]:
    rows = list(csv.DictReader(stream))
    for r in rows:
        for k in ("N", "n", "iterations"):
            r[k] = int(r[k])
        for k in ("epsilon", "linf", "l2pct", "rms", "wall_seconds"):
            r[k] = float(r[k])
    return rows


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".10e") if math.isfinite(v) else "nan"
    return v
