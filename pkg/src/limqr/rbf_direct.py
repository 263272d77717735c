"""Classical radial bases (GA, MQ1, MQ2, TPS) and direct local interpolation.

Columns of every local basis are the ``n`` radial functions centered at the
stencil nodes followed by the augmenting monomials.  Monomials are written in
coordinates centered and scaled to the stencil, which keeps the augmented
matrix well scaled.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
from scipy.special import exp1

from .operators import LinearTerm

logger = logging.getLogger(__name__)

KINDS = ("GA", "MQ1", "MQ2", "TPS")
POLY_DEGREE = {"GA": -1, "MQ1": 0, "MQ2": 1, "TPS": 2}
# exponent pairs (a, b) for x^a y^b, graded by degree
MONOMIALS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
EULER_GAMMA = 0.5772156649015329


class SingularInterpolationError(np.linalg.LinAlgError):
    """Local interpolation matrix is singular to working precision."""


@dataclass(frozen=True)
class BasisKind:
    name: str
    eps: float = 1.0

    def __post_init__(self):
        name = self.name.upper()
        if name not in KINDS:
            raise ValueError(f"unknown RBF kind {self.name!r}; expected one of {KINDS}")
        object.__setattr__(self, "name", name)
        if name != "TPS" and not self.eps > 0:
            raise ValueError("shape parameter must be positive")

    @property
    def poly_degree(self) -> int:
        return POLY_DEGREE[self.name]

    @property
    def n_poly(self) -> int:
        return (self.poly_degree + 1) * (self.poly_degree + 2) // 2



@dataclass(frozen=True)
class RbfJet:
    value: float
    gradient: np.ndarray
    laplacian: float


def radial_profile(kind: BasisKind, r: np.ndarray):
    """Return ``(phi, phi'(r)/r, laplacian)`` of the radial function at ``r``."""
    r = np.asarray(r, dtype=float)
    e2 = kind.eps**2
    if kind.name == "GA":
        phi = np.exp(-e2 * r * r)
        return phi, -2.0 * e2 * phi, (4.0 * e2 * e2 * r * r - 4.0 * e2) * phi
    if kind.name == "MQ1":
        w = np.sqrt(1.0 + e2 * r * r)
        return w, e2 / w, (2.0 * e2 + e2 * e2 * r * r) / w**3
    if kind.name == "MQ2":
        w = np.sqrt(1.0 + e2 * r * r)
        return w**3, 3.0 * e2 * w, 6.0 * e2 * w + 3.0 * e2 * e2 * r * r / w
    # TPS r^4 ln r, continuous extension at r = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lnr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
    r2 = r * r
    return r2 * r2 * lnr, 4.0 * r2 * lnr + r2, 16.0 * r2 * lnr + 8.0 * r2


def rbf_jet(kind: BasisKind, x, center) -> RbfJet:
    d = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    r = float(np.hypot(*d))
    phi, dphi_r, lap = radial_profile(kind, np.array(r))
    return RbfJet(float(phi), float(dphi_r) * d, float(lap))


def _ein(u: np.ndarray) -> np.ndarray:
    """Entire exponential integral ``int_0^u (1 - e^-t)/t dt``."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    small = u < 0.5
    us = u[small]
    term = us.copy()
    acc = us.copy()
    for k in range(2, 30):
        term = -term * us / k
        acc = acc + term / k
    out[small] = acc
    ul = u[~small]
    out[~small] = EULER_GAMMA + np.log(ul) + exp1(ul)
    return out


def particular_solution(kind: BasisKind, x, center) -> np.ndarray:
    """Radial ``phi~`` with ``Lap phi~ = phi``, normalized to vanish at the center."""
    d = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
    return particular_profile(kind, np.hypot(d[..., 0], d[..., 1]))


def particular_profile(kind: BasisKind, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    e2 = kind.eps**2
    if kind.name == "GA":
        return _ein(e2 * r * r) / (4.0 * e2)
    if kind.name == "MQ1":
        w = np.sqrt(1.0 + e2 * r * r)
        return (w**3 / 3.0 + w - np.log1p(w) - 4.0 / 3.0 + np.log(2.0)) / (3.0 * e2)
    if kind.name == "MQ2":
        w = np.sqrt(1.0 + e2 * r * r)
        return (w**5 / 5.0 + w**3 / 3.0 + w - np.log1p(w) - 23.0 / 15.0 + np.log(2.0)) / (5.0 * e2)
    if kind.name == "TPS":
        r6 = r**6
        with np.errstate(divide="ignore", invalid="ignore"):
            lnr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), 0.0)
        return r6 * lnr / 36.0 - r6 / 108.0
    raise ValueError(f"no particular solution available for {kind.name}")


# particular solutions of the scaled monomials: Lap_s q = s1^a s2^b
def _poly_particular(s: np.ndarray, j: int) -> np.ndarray:
    s1, s2 = s[..., 0], s[..., 1]
    return [
        (s1 * s1 + s2 * s2) / 4.0,
        s1**3 / 6.0,
        s2**3 / 6.0,
        s1**4 / 12.0,
        s1**3 * s2 / 6.0,
        s2**4 / 12.0,
    ][j]


@dataclass
class DirectBasis:
    """Radial functions centered at the stencil nodes plus monomials."""

    kind: BasisKind
    nodes: np.ndarray
    origin: np.ndarray = field(default=None)
    scale: float = 1.0

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        if self.origin is None:
            self.origin = self.nodes.mean(axis=0)
        spread = np.max(np.hypot(*(self.nodes - self.origin).T)) if len(self.nodes) > 1 else 0.0
        self.scale = spread if spread > 0 else 1.0

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def n_poly(self) -> int:
        return self.kind.n_poly

    @property
    def size(self) -> int:
        return self.n + self.n_poly

    def _local(self, points):
        return (np.asarray(points, dtype=float) - self.origin) / self.scale

    def values(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        d = points[:, None, :] - self.nodes[None, :, :]
        phi, _, _ = radial_profile(self.kind, np.hypot(d[..., 0], d[..., 1]))
        if not self.n_poly:
            return phi
        s = self._local(points)
        poly = np.column_stack([s[:, 0] ** a * s[:, 1] ** b for a, b in MONOMIALS[: self.n_poly]])
        return np.hstack([phi, poly])

    def gradients(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        d = points[:, None, :] - self.nodes[None, :, :]
        _, dphi_r, _ = radial_profile(self.kind, np.hypot(d[..., 0], d[..., 1]))
        grad = dphi_r[..., None] * d
        if not self.n_poly:
            return grad
        s = self._local(points)
        cols = []
        for a, b in MONOMIALS[: self.n_poly]:
            gx = a * s[:, 0] ** max(a - 1, 0) * s[:, 1] ** b if a else np.zeros(len(s))
            gy = b * s[:, 0] ** a * s[:, 1] ** max(b - 1, 0) if b else np.zeros(len(s))
            cols.append(np.column_stack([gx, gy]) / self.scale)
        return np.concatenate([grad, np.stack(cols, axis=1)], axis=1)

    def laplacians(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        d = points[:, None, :] - self.nodes[None, :, :]
        _, _, lap = radial_profile(self.kind, np.hypot(d[..., 0], d[..., 1]))
        if not self.n_poly:
            return lap
        s = self._local(points)
        lp = {(0, 0): 0.0, (1, 0): 0.0, (0, 1): 0.0, (2, 0): 2.0, (1, 1): 0.0, (0, 2): 2.0}
        poly = np.column_stack([np.full(len(s), lp[m]) / self.scale**2 for m in MONOMIALS[: self.n_poly]])
        return np.hstack([lap, poly])

    def particular(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        d = points[:, None, :] - self.nodes[None, :, :]
        pt = particular_profile(self.kind, np.hypot(d[..., 0], d[..., 1]))
        if not self.n_poly:
            return pt
        s = self._local(points)
        poly = np.column_stack([self.scale**2 * _poly_particular(s, j) for j in range(self.n_poly)])
        return np.hstack([pt, poly])


def _augment(block: np.ndarray, poly_rows: np.ndarray | None, n_poly: int) -> np.ndarray:
    """Append the moment rows ``[P^T 0]`` below the collocation rows ``[Phi P]``."""
    if not n_poly:
        return block
    top = block
    bottom = np.hstack([poly_rows, np.zeros((n_poly, n_poly))])
    return np.vstack([top, bottom])


def row_matrix(basis, nodes: np.ndarray, neumann: np.ndarray | None = None,
               normals: np.ndarray | None = None) -> np.ndarray:
    """Collocation rows: values, or normal derivatives where ``neumann`` is set."""
    rows = basis.values(nodes)
    if neumann is not None and np.any(neumann):
        g = basis.gradients(nodes[neumann])
        rows = rows.copy()
        rows[neumann] = np.einsum("pkd,pd->pk", g, normals[neumann])
    return rows


@dataclass
class LocalInterpolant:
    """Factorized local interpolation matrices ``A`` (with boundary rows) and ``A~``."""

    basis: DirectBasis
    A: np.ndarray
    A_tilde: np.ndarray
    lu: tuple
    lu_tilde: tuple
    cond_A: float = float("nan")
    cond_A_tilde: float = float("nan")

    @property
    def nodes(self) -> np.ndarray:
        return self.basis.nodes

    @property
    def kind(self) -> BasisKind:
        return self.basis.kind

    def solve(self, rhs, trans: bool = False) -> np.ndarray:
        return sla.lu_solve(self.lu, rhs, trans=1 if trans else 0, check_finite=False)

    def solve_tilde(self, rhs, trans: bool = False) -> np.ndarray:
        return sla.lu_solve(self.lu_tilde, rhs, trans=1 if trans else 0, check_finite=False)

    def coefficients(self, data) -> np.ndarray:
        d = np.concatenate([np.asarray(data, dtype=float), np.zeros(self.basis.n_poly)])
        return self.solve(d)

    def evaluate(self, points, data) -> np.ndarray:
        return self.basis.values(points) @ self.coefficients(data)


def factorize(M: np.ndarray) -> tuple:
    """LU with partial pivoting; exact zero pivots are reported."""
    with warnings.catch_warnings():
        # exact zero pivots are reported below as an exception
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    diag = np.abs(np.diag(lu))
    if not np.all(np.isfinite(lu)) or diag.min() <= 1e-300:
        raise SingularInterpolationError(
            f"interpolation matrix singular to working precision (min pivot {diag.min():.3e})")
    return lu, piv


def build_interpolation_matrix(kind: BasisKind, nodes, neumann: Sequence[bool] | None = None,
                               normals=None, with_condition: bool = False,
                               origin=None) -> LocalInterpolant:
    """Local interpolation matrices for a stencil.

    ``neumann[k]`` marks stencil node ``k`` as a Neumann boundary node whose
    row holds normal derivatives along ``normals[k]``.  The value-only matrix
    ``A_tilde`` is the same object as ``A`` when there are no such rows.
    """
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    if len(np.unique(nodes, axis=0)) != len(nodes):
        raise ValueError("stencil nodes must be distinct")
    basis = DirectBasis(kind, nodes, origin)
    n_poly = basis.n_poly
    vals = basis.values(nodes)
    A_tilde = _augment(vals, vals[:, basis.n:].T if n_poly else None, n_poly)
    if neumann is not None and np.any(neumann):
        neumann = np.asarray(neumann, dtype=bool)
        normals = np.asarray(normals, dtype=float)
        rows = row_matrix(basis, nodes, neumann, normals)
        A = np.vstack([rows, A_tilde[basis.n:]]) if n_poly else rows
    else:
        A = A_tilde
    lu_tilde = factorize(A_tilde)
    lu = lu_tilde if A is A_tilde else factorize(A)
    interp = LocalInterpolant(basis, A, A_tilde, lu, lu_tilde)
    if with_condition:
        interp.cond_A = float(np.linalg.cond(A))
        interp.cond_A_tilde = interp.cond_A if A is A_tilde else float(np.linalg.cond(A_tilde))
    return interp


def build_operator_matrix(basis, nodes, op: LinearTerm) -> np.ndarray:
    """``(A_b)_{kj} = b(phi_j(x_k), grad phi_j(x_k))``, padded to a square matrix."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    size = getattr(basis, "size", None) or basis.n
    out = np.zeros((size, size))
    if op is None or op.is_zero:
        return out
    values = basis.values(nodes)
    grads = basis.gradients(nodes) if op.needs_gradient else None
    out[: len(nodes)] = op.apply(nodes, values, grads)
    return out


def condition_number(kind: BasisKind, nodes) -> float:
    """2-norm condition number of the value interpolation matrix."""
    basis = DirectBasis(kind, np.asarray(nodes, dtype=float))
    vals = basis.values(basis.nodes)
    A = _augment(vals, vals[:, basis.n:].T if basis.n_poly else None, basis.n_poly)
    return float(np.linalg.cond(A))
