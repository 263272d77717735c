"""Dense local solves and restarted GMRES for the global sparse system."""
from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DEFAULT_RESTART = 30
DEFAULT_TOL = 1e-10
DEFAULT_MAX_OUTER = 200
STAGNATION_RATIO = 1e-3
PRECONDITIONERS = ("jacobi", "ilu", "none")
ILU_DROP_TOL = 1e-4
ILU_FILL_FACTOR = 10


class SolveStatus(enum.IntEnum):
    CONVERGED = 0
    STAGNATED = 1
    MAX_OUTER = 2


class SolverError(RuntimeError):
    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass
class SolveReport:
    iterations: int
    residual: float
    converged: bool
    status: SolveStatus = SolveStatus.CONVERGED
    history: tuple = ()
    preconditioner: str = "jacobi"


def dense_solve(matrix, rhs, check: bool = True):
    """LU with partial pivoting; returns ``(x, relative residual)``."""
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(rhs, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    with warnings.catch_warnings():
        # exact singularity is reported below as LinAlgError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise np.linalg.LinAlgError("matrix is exactly singular")
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    if not check:
        return x, float("nan")
    bn = np.linalg.norm(b)
    res = np.linalg.norm(A @ x - b) / bn if bn > 0 else float(np.linalg.norm(A @ x))
    return x, float(res)


def gmres_restarted(matrix, rhs, restart: int = DEFAULT_RESTART, tol: float = DEFAULT_TOL,
                    max_outer: int = DEFAULT_MAX_OUTER, x0=None, preconditioner: str = "jacobi",
                    raise_on_failure: bool = False):
    """Restarted GMRES(``restart``) with right Jacobi (default), incomplete-LU or no preconditioning.

    Each outer cycle solves the correction equation ``(A M) y = b - A x``
    with one ``restart``-step GMRES run and updates ``x += M y``.  Right
    preconditioning keeps the Krylov residual equal to the true residual, so
    the stopping test and the reported residual agree.  The relative residual
    ``|b - Ax| / |b|`` is checked after every cycle; a cycle that reduces it by
    less than ``STAGNATION_RATIO`` (relative) is reported as stagnation,
    distinct from running out of outer cycles.
    """
    A = sp.csr_matrix(matrix)
    b = np.asarray(rhs, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    bn = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if preconditioner not in PRECONDITIONERS:
        raise ValueError(f"unknown preconditioner {preconditioner!r}; expected one of {PRECONDITIONERS}")
    if bn == 0:
        return np.zeros(n), SolveReport(0, 0.0, True, preconditioner=preconditioner)
    if preconditioner == "jacobi":
        d = A.diagonal()
        if np.any(d == 0):
            raise ValueError("zero diagonal entry, Jacobi preconditioner undefined")
        inv_d = 1.0 / d
        apply_m = lambda v: inv_d * v  # noqa: E731
    elif preconditioner == "ilu":
        apply_m = spla.spilu(A.tocsc(), drop_tol=ILU_DROP_TOL, fill_factor=ILU_FILL_FACTOR).solve
    else:
        apply_m = lambda v: v  # noqa: E731
    AM = spla.LinearOperator(A.shape, matvec=lambda v: A @ apply_m(v), dtype=float)
    r = b - A @ x
    res = np.linalg.norm(r) / bn
    history = [res]
    iterations = 0
    status = SolveStatus.MAX_OUTER
    inner = restart if n > restart else n
    for _ in range(max_outer):
        if res <= tol:
            status = SolveStatus.CONVERGED
            break
        count = [0]

        def _cb(_r, count=count):
            count[0] += 1

        # aim a little below tol; scipy's test is relative to |r|
        y, _ = spla.gmres(AM, r, rtol=min(0.5 * tol / res, 0.5), atol=0.0, restart=inner, maxiter=1,
                          callback=_cb, callback_type="pr_norm")
        x = x + apply_m(y)
        iterations += count[0]
        r = b - A @ x
        new = np.linalg.norm(r) / bn
        history.append(new)
        if new <= tol:
            res = new
            status = SolveStatus.CONVERGED
            break
        if new > res * (1.0 - STAGNATION_RATIO):
            res = new
            status = SolveStatus.STAGNATED
            break
        res = new
    report = SolveReport(iterations, float(res), status == SolveStatus.CONVERGED, status, tuple(history),
                         preconditioner)
    if not report.converged:
        logger.warning("GMRES %s after %d iterations (residual %.3e)", status.name, iterations, res)
        if raise_on_failure:
            raise SolverError(f"GMRES failed: {status.name.lower()} at residual {res:.3e}", report)
    return x, report
