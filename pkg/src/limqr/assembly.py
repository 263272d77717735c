"""Stencils, integration subregions, local rows and the global sparse system.

Every interior node ``x_i`` gets a stencil of ``n`` nearby nodes and a disk
subregion centered at ``x_i``.  On the subregion

    u(x_i) = int_circle Q u + int_disk G f + int_disk G b(u, grad u)

and after local interpolation of ``u`` (and of ``b``) this becomes one row
``u_i = f_i + z^T d`` over the stencil data ``d``.  Interior entries of ``d``
are unknowns; boundary entries are known data and move to the right side.
"""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .geometry import NodeSet
from .greenfns import DiskSubregion, SourceConfig, dgf_disk, dgf_disk_normal
from .operators import LinearTerm
from .quadrature import (DEFAULT_ANGULAR_ORDER, DEFAULT_BOUNDARY_ORDER, DEFAULT_RADIAL_ORDER,
                         circle_points, disk_points)
from .rbf_direct import (BasisKind, DirectBasis, LocalInterpolant, build_interpolation_matrix,
                         build_operator_matrix, factorize, row_matrix)
from .rbfqr import build_rbfqr_basis

logger = logging.getLogger(__name__)

METHODS = ("lrdrm", "lim", "lim-rbfqr")
SUBREGION_FACTOR = 0.8
DIAGNOSTICS_HEADER = ("stencil_id", "cond_A", "cond_B", "radius", "n_i", "n_b")


class AssemblyError(RuntimeError):
    """A local row could not be built; carries the stencil id."""

    def __init__(self, stencil_id: int, cause: Exception):
        super().__init__(f"stencil {stencil_id}: {cause}")
        self.stencil_id = stencil_id
        self.cause = cause


@dataclass(frozen=True)
class QuadratureOrders:
    boundary: int = DEFAULT_BOUNDARY_ORDER
    radial: int = DEFAULT_RADIAL_ORDER
    angular: int = DEFAULT_ANGULAR_ORDER


@dataclass
class Stencil:
    """``members`` index ``nodeset.points``: values below ``N`` are interior nodes."""

    index: int
    members: np.ndarray
    n_interior_total: int
    center: np.ndarray
    subregion: DiskSubregion | None = None

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def is_interior(self) -> np.ndarray:
        return self.members < self.n_interior_total

    @property
    def n_i(self) -> int:
        return int(np.count_nonzero(self.is_interior))

    @property
    def n_b(self) -> int:
        return self.size - self.n_i


@dataclass
class LocalRow:
    """``u_i - sum(coefficients * u[columns]) = rhs``."""

    index: int
    columns: np.ndarray
    coefficients: np.ndarray
    rhs: float
    cond_A: float = float("nan")
    cond_B: float = float("nan")


@dataclass
class GlobalSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    solution: np.ndarray | None = None
    rows: list = field(default_factory=list, repr=False)


def _distance_to_boundary(nodeset: NodeSet, points: np.ndarray) -> np.ndarray:
    if nodeset.domain is not None:
        return nodeset.domain.distance_to_boundary(points)
    # without a domain, the nearest boundary node is the best available proxy
    d, _ = cKDTree(nodeset.boundary).query(points)
    return d


def _nearest(tree: cKDTree, point: np.ndarray, n: int, total: int) -> np.ndarray:
    """Indices of the ``n`` nearest points; ties broken by lower index."""
    k = min(total, n + 8)
    d, idx = tree.query(point, k=k)
    d, idx = np.atleast_1d(d), np.atleast_1d(idx)
    order = np.lexsort((idx, d))
    if k < total and d[order[n - 1]] == d[order[-1]]:
        d, idx = tree.query(point, k=total)
        order = np.lexsort((idx, d))
    return idx[order[:n]]


def build_stencils(nodeset: NodeSet, n: int, band_width: float | None = None) -> list[Stencil]:
    """One stencil per interior node, collocation node first.

    Nodes within ``band_width`` of the boundary draw their ``n`` nearest
    neighbours from interior and boundary nodes; all others from interior
    nodes only.  With ``band_width=None`` the band is adaptive: boundary nodes
    are admitted whenever the boundary is closer than the farthest member of
    the interior-only stencil.
    """
    N, Nb = nodeset.n_interior, nodeset.n_boundary
    if n < 1:
        raise ValueError("stencil size must be positive")
    if n > N + Nb:
        raise ValueError(f"stencil size {n} exceeds the {N + Nb} available nodes")
    pts = nodeset.points
    tree_all = cKDTree(pts)
    tree_int = cKDTree(nodeset.interior)
    dist_b = _distance_to_boundary(nodeset, nodeset.interior)
    stencils = []
    for i in range(N):
        xi = nodeset.interior[i]
        members = None
        if n <= N:
            members = _nearest(tree_int, xi, n, N)
            reach = np.max(np.hypot(*(nodeset.interior[members] - xi).T))
            band = reach if band_width is None else band_width
            if dist_b[i] < band:
                members = None
        if members is None:
            members = _nearest(tree_all, xi, n, N + Nb)
        if members[0] != i:
            # coincident distance zero cannot tie with another node in a valid set
            members = np.concatenate([[i], members[members != i]])[:n]
        stencils.append(Stencil(i, np.asarray(members, dtype=int), N, xi.copy()))
    return stencils


def choose_subregion(stencil: Stencil, nodeset: NodeSet, kappa: float = SUBREGION_FACTOR,
                     nn_distance: float | None = None) -> DiskSubregion:
    """Disk centered at the collocation node, radius ``kappa * min(nn distance, boundary distance)``."""
    xi = stencil.center
    if nn_distance is None:
        others = np.delete(nodeset.points, stencil.index, axis=0)
        nn_distance = float(np.min(np.hypot(*(others - xi).T)))
    dist_b = float(_distance_to_boundary(nodeset, xi[None, :])[0])
    radius = kappa * min(nn_distance, dist_b)
    if not radius > 0:
        raise ValueError(f"nonpositive subregion radius at node {stencil.index}")
    return DiskSubregion(xi.copy(), radius)


def attach_subregions(stencils: Sequence[Stencil], nodeset: NodeSet,
                      kappa: float = SUBREGION_FACTOR) -> None:
    pts = nodeset.points
    d, _ = cKDTree(pts).query(nodeset.interior, k=2)
    for st in stencils:
        st.subregion = choose_subregion(st, nodeset, kappa, nn_distance=float(d[st.index, 1]))


@dataclass
class _Integrals:
    """Quadrature data of one subregion."""

    circle_pts: np.ndarray
    circle_w: np.ndarray  # weights times Poisson kernel
    disk_pts: np.ndarray
    disk_w: np.ndarray  # weights times Green's function
    center: np.ndarray

    @classmethod
    def build(cls, sub: DiskSubregion, orders: QuadratureOrders) -> "_Integrals":
        cfg = SourceConfig.build(sub.center, sub)
        cp, _, cw = circle_points(sub.center, sub.radius, orders.boundary)
        dp, dw = disk_points(sub.center, sub.radius, orders.radial, orders.angular)
        return cls(cp, cw * dgf_disk_normal(cp, cfg, sub), dp, dw * dgf_disk(dp, cfg, sub), sub.center)


def _stencil_geometry(stencil: Stencil, nodeset: NodeSet):
    pts = nodeset.points[stencil.members]
    N = nodeset.n_interior
    neumann = np.zeros(stencil.size, dtype=bool)
    normals = np.zeros((stencil.size, 2))
    bmask = ~stencil.is_interior
    if np.any(bmask):
        bidx = stencil.members[bmask] - N
        neumann[bmask] = nodeset.is_neumann[bidx]
        normals[bmask] = nodeset.normals[bidx]
    return pts, neumann, normals


def _qr_interpolant(basis, pts, neumann, normals) -> LocalInterpolant:
    B_tilde = basis.values(pts)
    if np.any(neumann):
        B = row_matrix(basis, pts, neumann, normals)
        lu = factorize(B)
    else:
        B = B_tilde
        lu = None
    lu_tilde = factorize(B_tilde)
    return LocalInterpolant(basis, B, B_tilde, lu or lu_tilde, lu_tilde)


def _fold(stencil: Stencil, nodeset: NodeSet, z: np.ndarray, rhs: float) -> LocalRow:
    """Split ``z`` into unknown (interior) coefficients and known boundary data."""
    inner = stencil.is_interior
    bidx = stencil.members[~inner] - nodeset.n_interior
    rhs = rhs + float(z[~inner] @ nodeset.values[bidx])
    return LocalRow(stencil.index, stencil.members[inner].copy(), z[inner].copy(), rhs)


def _lim_weights(interp: LocalInterpolant, ints: _Integrals, pts: np.ndarray,
                 op: LinearTerm, volume: str):
    """Return ``z`` (over the padded stencil data) and the Step-1 vector ``w~``.

    ``volume`` selects how ``int_disk G phi_j`` is obtained: ``"quadrature"``
    integrates it directly, ``"drm"`` uses particular solutions,
    ``phi~_j(x_i) - int_circle Q phi~_j``.
    """
    basis = interp.basis
    h = ints.circle_w @ basis.values(ints.circle_pts)
    if volume == "drm":
        h_tilde = basis.particular(ints.center[None, :])[0] - ints.circle_w @ basis.particular(ints.circle_pts)
    else:
        h_tilde = ints.disk_w @ basis.values(ints.disk_pts)
    w = h
    w_tilde = None
    if volume == "drm" or not op.is_zero:
        # Step 1: A~^T w~ = h~
        w_tilde = interp.solve_tilde(h_tilde, trans=True)
    if not op.is_zero:
        # Step 2: w = h + A_b^T w~
        A_b = build_operator_matrix(basis, pts, op)
        w = h + A_b.T @ w_tilde
    # Step 3: A^T z = w
    z = interp.solve(w, trans=True)
    return z, w_tilde


def local_row_lim(stencil: Stencil, interp: LocalInterpolant, f: Callable | None, op: LinearTerm,
                  nodeset: NodeSet, orders: QuadratureOrders = QuadratureOrders()) -> LocalRow:
    """Row with volume integrals by direct quadrature against the Green's function."""
    ints = _Integrals.build(stencil.subregion, orders)
    pts = nodeset.points[stencil.members]
    z, _ = _lim_weights(interp, ints, pts, op, "quadrature")
    f_i = float(ints.disk_w @ f(ints.disk_pts)) if f is not None else 0.0
    return _fold(stencil, nodeset, z[: stencil.size], f_i)


def local_row_lrdrm(stencil: Stencil, interp: LocalInterpolant, f: Callable | None, op: LinearTerm,
                    nodeset: NodeSet, orders: QuadratureOrders = QuadratureOrders()) -> LocalRow:
    """Row with volume integrals reduced to the boundary by particular solutions.

    The whole right side ``f + b(u, grad u)`` is interpolated on the stencil,
    so the known part enters as ``w~ . f(stencil nodes)``.
    """
    ints = _Integrals.build(stencil.subregion, orders)
    pts = nodeset.points[stencil.members]
    z, w_tilde = _lim_weights(interp, ints, pts, op, "drm")
    f_i = float(w_tilde[: stencil.size] @ f(pts)) if f is not None else 0.0
    return _fold(stencil, nodeset, z[: stencil.size], f_i)


def local_row_lim_rbfqr(stencil: Stencil, interp: LocalInterpolant, f: Callable | None,
                        op: LinearTerm, nodeset: NodeSet,
                        orders: QuadratureOrders = QuadratureOrders()) -> LocalRow:
    """Same three solves as :func:`local_row_lim`, with the RBF-QR basis ``psi``."""
    return local_row_lim(stencil, interp, f, op, nodeset, orders)


def local_interpolant(method: str, stencil: Stencil, nodeset: NodeSet, kind: BasisKind,
                      with_condition: bool = False) -> LocalInterpolant:
    pts, neumann, normals = _stencil_geometry(stencil, nodeset)
    if method == "lim-rbfqr":
        if kind.name != "GA":
            raise ValueError("the RBF-QR basis is only available for Gaussians")
        basis = build_rbfqr_basis(pts, kind.eps)
        interp = _qr_interpolant(basis, pts, neumann, normals)
        if with_condition:
            interp.cond_A_tilde = float(np.linalg.cond(interp.A))
            direct = DirectBasis(kind, pts)
            interp.cond_A = float(np.linalg.cond(row_matrix(direct, pts, neumann, normals)))
        return interp
    interp = build_interpolation_matrix(kind, pts, neumann, normals, with_condition=with_condition)
    return interp


_ROW_BUILDERS = {"lrdrm": local_row_lrdrm, "lim": local_row_lim, "lim-rbfqr": local_row_lim_rbfqr}


def build_row(method: str, stencil: Stencil, nodeset: NodeSet, kind: BasisKind, f, op: LinearTerm,
              orders: QuadratureOrders = QuadratureOrders(), with_condition: bool = False) -> LocalRow:
    try:
        interp = local_interpolant(method, stencil, nodeset, kind, with_condition)
        row = _ROW_BUILDERS[method](stencil, interp, f, op, nodeset, orders)
    except (np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        raise AssemblyError(stencil.index, exc) from exc
    if not (np.all(np.isfinite(row.coefficients)) and np.isfinite(row.rhs)):
        raise AssemblyError(stencil.index, FloatingPointError("non-finite row coefficients"))
    if with_condition:
        row.cond_A = interp.cond_A
        row.cond_B = interp.cond_A_tilde if method == "lim-rbfqr" else float("nan")
    return row


def build_rows(method: str, stencils: Sequence[Stencil], nodeset: NodeSet, kind: BasisKind, f,
               op: LinearTerm | None = None, orders: QuadratureOrders = QuadratureOrders(),
               with_condition: bool = False, threads: int = 1) -> list[LocalRow]:
    """Local rows for all stencils; order follows ``stencils`` regardless of ``threads``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    op = op or LinearTerm()
    job = lambda st: build_row(method, st, nodeset, kind, f, op, orders, with_condition)  # noqa: E731
    if threads <= 1:
        return [job(st) for st in stencils]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, stencils))


def assemble_global(rows: Sequence[LocalRow], nodeset: NodeSet) -> GlobalSystem:
    """Sparse system ``u_i - sum_j z_ij u_j = rhs_i`` over the interior nodes."""
    N = nodeset.n_interior
    seen = np.zeros(N, dtype=bool)
    ri, ci, vals = [], [], []
    rhs = np.zeros(N)
    for row in rows:
        i = row.index
        if not 0 <= i < N:
            raise IndexError(f"row index {i} out of range")
        if seen[i]:
            raise ValueError(f"duplicate row for node {i}")
        seen[i] = True
        if np.any((row.columns < 0) | (row.columns >= N)):
            raise IndexError(f"row {i} references a non-interior column")
        ri.extend([i] * (len(row.columns) + 1))
        ci.extend([i, *row.columns])
        vals.extend([1.0, *(-row.coefficients)])
        rhs[i] = row.rhs
    if not seen.all():
        raise ValueError(f"missing rows for {int((~seen).sum())} interior nodes")
    A = sp.csr_matrix((vals, (ri, ci)), shape=(N, N))
    A.sum_duplicates()
    return GlobalSystem(A, rhs, rows=list(rows))


def write_diagnostics(rows: Sequence[LocalRow], stencils: Sequence[Stencil], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(DIAGNOSTICS_HEADER)
    for row, st in zip(rows, stencils):
        w.writerow([st.index, format(row.cond_A, ".6e"), format(row.cond_B, ".6e"),
                    format(st.subregion.radius, ".17g"), st.n_i, st.n_b])
