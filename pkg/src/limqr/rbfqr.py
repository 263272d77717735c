"""Stable Gaussian RBF interpolation in the flat limit (RBF-QR, 2D).

The Gaussian centered at ``x_j`` is expanded in polar coordinates as

    phi_j(x) = sum_{k,l} d_{k,l} [c_{k,l}(x_j) C_{k,l}(x) + s_{k,l}(x_j) S_{k,l}(x)]

with ``d_{k,l} = O(eps^{2k})``, O(1) coefficients ``c, s`` and expansion
functions ``C, S = exp(-eps^2 r^2) r^{2l} T_{k-2l}(r) (cos|sin)((2l+p) theta)``.
A QR factorization of the coefficient matrix removes the eps powers
analytically and yields a basis ``psi = [I | R~] V(x)`` spanning the same
space as the Gaussians but well conditioned as eps -> 0.

Stencils are mapped to the unit disk (centered at the node centroid and
scaled by the largest node radius); the shape parameter is rescaled with the
same factor, so callers always pass eps in physical coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from math import lgamma, log

import numpy as np
import scipy.linalg as sla

logger = logging.getLogger(__name__)

K_MAX_CAP = 40
TRUNCATION_TOL = 10 * np.finfo(float).eps
RANK_TOL = 1e-10
F12_MAX_TERMS = 200


class RankDeficiencyError(np.linalg.LinAlgError):
    """Coefficient matrix does not reach full rank (coincident nodes)."""


class SeriesDivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ExpansionIndex:
    k: int
    l: int
    trig: str  # "cos" or "sin"

    @property
    def p(self) -> int:
        return self.k % 2

    @property
    def m(self) -> int:
        """Angular frequency ``2l + p``."""
        return 2 * self.l + self.p

    def __str__(self) -> str:
        return f"{'C' if self.trig == 'cos' else 'S'}{self.k},{self.l}"


def expansion_indices(k_max: int) -> list[ExpansionIndex]:
    """All indices through degree ``k_max``, degree-major (C00, C10, S10, C20, C21, S21, ...)."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    out = []
    for k in range(k_max + 1):
        for l in range(k // 2 + 1):
            out.append(ExpansionIndex(k, l, "cos"))
            if 2 * l + k % 2 != 0:
                out.append(ExpansionIndex(k, l, "sin"))
    return out


def _log_scale_factor(k: int, l: int, log_eps: float) -> float:
    p = k % 2
    return (2 * k * log_eps - (k - 2 * l - 1) * log(2.0)
            - lgamma((k + 2 * l + p) // 2 + 1) - lgamma((k - 2 * l - p) // 2 + 1))


def scale_factor(idx: ExpansionIndex, eps: float) -> float:
    """``d_{k,l} = eps^{2k} / (2^{k-2l-1} ((k+2l+p)/2)! ((k-2l-p)/2)!)``."""
    k, l, p = idx.k, idx.l, idx.p
    return eps ** (2 * k) / (2.0 ** (k - 2 * l - 1) * _factorial((k + 2 * l + p) // 2)
                             * _factorial((k - 2 * l - p) // 2))


def _factorial(n: int) -> float:
    return float(np.prod(np.arange(1, n + 1, dtype=float))) if n > 1 else 1.0


def hypergeometric_1f2(a, b1, b2, z):
    """Power series for ``1F2(a; b1, b2; z)``; broadcasts over its arguments."""
    a, b1, b2, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, b1, b2, z)))
    total = np.ones(a.shape)
    term = np.ones(a.shape)
    for t in range(F12_MAX_TERMS):
        term = term * (a + t) * z / ((b1 + t) * (b2 + t) * (t + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    else:
        raise SeriesDivergenceError(
            f"1F2 series not converged after {F12_MAX_TERMS} terms (last term {np.max(np.abs(term)):.3e})")
    return total if total.ndim else float(total)


def _index_arrays(indices):
    k = np.array([i.k for i in indices])
    l = np.array([i.l for i in indices])
    is_sin = np.array([i.trig == "sin" for i in indices])
    return k, l, is_sin


def _coefficients(r, theta, eps, indices) -> np.ndarray:
    """Matrix of ``c_{k,l}(x_j)`` / ``s_{k,l}(x_j)``: rows nodes, columns indices."""
    k, l, is_sin = _index_arrays(indices)
    p = k % 2
    m = 2 * l + p
    b = np.where(m == 0, 1.0, 2.0)
    t = np.where(k - 2 * l == 0, 0.5, 1.0)
    alpha = (k - 2 * l + p + 1) / 2.0
    beta1 = (k - 2 * l + 1).astype(float)
    beta2 = (k + 2 * l + p + 2) / 2.0
    r = np.asarray(r, dtype=float)[:, None]
    th = np.asarray(theta, dtype=float)[:, None]
    F = hypergeometric_1f2(alpha[None, :], beta1[None, :], beta2[None, :], eps**4 * r * r)
    trig = np.where(is_sin[None, :], np.sin(m[None, :] * th), np.cos(m[None, :] * th))
    return b * t * np.exp(-(eps * r) ** 2) * r ** k[None, :] * trig * F


def expansion_coefficient(idx: ExpansionIndex, r: float, theta: float, eps: float) -> float:
    """``c_{k,l}`` or ``s_{k,l}`` at a node with polar coordinates ``(r, theta)``."""
    return float(_coefficients(np.array([r]), np.array([theta]), eps, [idx])[0, 0])


def _chebyshev(n_max: int, r: np.ndarray):
    """``T_n(r)`` and ``T_n'(r)`` for ``n = 0..n_max``; shape (n_max + 1, P)."""
    T = np.empty((n_max + 1,) + r.shape)
    U = np.empty((n_max + 1,) + r.shape)
    T[0] = 1.0
    U[0] = 1.0
    if n_max >= 1:
        T[1] = r
        U[1] = 2.0 * r
    for n in range(1, n_max):
        T[n + 1] = 2.0 * r * T[n] - T[n - 1]
        U[n + 1] = 2.0 * r * U[n] - U[n - 1]
    dT = np.zeros_like(T)
    for n in range(1, n_max + 1):
        dT[n] = n * U[n - 1]
    return T, dT


def _expansion(points_unit: np.ndarray, eps: float, indices, gradient: bool = False):
    """Expansion functions at points in unit-disk coordinates.

    Returns values (P, m) and, if requested, gradients (P, m, 2) with respect
    to the unit-disk coordinates.
    """
    x, y = points_unit[:, 0], points_unit[:, 1]
    r = np.hypot(x, y)
    theta = np.arctan2(y, x)
    k, l, is_sin = _index_arrays(indices)
    p = k % 2
    m = 2 * l + p
    n = k - 2 * l
    T, dT = _chebyshev(int(n.max()) if len(n) else 0, r)
    E = np.exp(-(eps * r) ** 2)[:, None]
    rr = r[:, None]
    radial = E * rr ** (2 * l)[None, :] * T[n].T
    mt = m[None, :] * theta[:, None]
    trig = np.where(is_sin[None, :], np.sin(mt), np.cos(mt))
    values = radial * trig
    if not gradient:
        return values, None
    dtrig = np.where(is_sin[None, :], np.cos(mt), -np.sin(mt)) * m[None, :]
    grads = np.zeros(values.shape + (2,))
    tiny = r < 1e-14
    ok = ~tiny
    if np.any(ok):
        ro = rr[ok]
        twol = (2 * l)[None, :]
        rpow = ro ** twol
        with np.errstate(divide="ignore", invalid="ignore"):
            r_lower = np.where(twol > 0, ro ** np.maximum(twol - 1, 0), 0.0)
        drad = E[ok] * (-2.0 * eps**2 * ro * rpow * T[n][:, ok].T
                        + twol * r_lower * T[n][:, ok].T
                        + rpow * dT[n][:, ok].T)
        ang_over_r = E[ok] * ro ** np.maximum(twol - 1, 0) * T[n][:, ok].T
        # radial^{2l} T / r; 2l = 0 needs T_n(r)/r which only enters with m > 0
        ang_over_r = np.where(twol > 0, ang_over_r, E[ok] * T[n][:, ok].T / ro)
        c, s = np.cos(theta[ok])[:, None], np.sin(theta[ok])[:, None]
        dr_part = drad * trig[ok]
        dth_part = ang_over_r * dtrig[ok]
        grads[ok, :, 0] = c * dr_part - s * dth_part
        grads[ok, :, 1] = s * dr_part + c * dth_part
    if np.any(tiny):
        # only m = 1 functions (l = 0, k odd) have a nonzero gradient at the origin
        slope = np.where((m == 1), k * np.where(((k - 1) // 2) % 2 == 0, 1.0, -1.0), 0.0)
        grads[tiny, :, 0] = np.where(is_sin, 0.0, slope)[None, :]
        grads[tiny, :, 1] = np.where(is_sin, slope, 0.0)[None, :]
    return values, grads


def expansion_function_jet(idx: ExpansionIndex, r: float, theta: float, eps: float):
    """Value and Cartesian gradient of ``C_{k,l}``/``S_{k,l}`` at polar ``(r, theta)``."""
    pt = np.array([[r * np.cos(theta), r * np.sin(theta)]])
    v, g = _expansion(pt, eps, [idx], gradient=True)
    return float(v[0, 0]), g[0, 0]


@dataclass
class RbfQrBasis:
    """Truncated RBF-QR basis for one stencil.

    ``indices`` lists the expansion functions in column order: the ``n``
    retained (pivot) columns first, then the correction columns that ``R~``
    maps onto them.
    """

    eps: float
    nodes: np.ndarray
    center: np.ndarray
    scale: float
    eps_scaled: float
    indices: list
    Rtilde: np.ndarray
    k_max: int
    pivot_diag: np.ndarray
    n_poly = 0

    @property
    def n(self) -> int:
        return len(self.nodes)

    size = n

    @property
    def m(self) -> int:
        return len(self.indices)

    def to_unit(self, points) -> np.ndarray:
        return (np.atleast_2d(np.asarray(points, dtype=float)) - self.center) / self.scale

    def _combine(self, V):
        n = self.n
        if V.ndim == 2:
            return V[:, :n] + V[:, n:] @ self.Rtilde.T
        return V[:, :n, :] + np.einsum("pjd,ij->pid", V[:, n:, :], self.Rtilde)

    def values(self, points) -> np.ndarray:
        unit = self.to_unit(points)
        if np.any(np.hypot(unit[:, 0], unit[:, 1]) > 1.5):
            logger.warning("evaluating RBF-QR basis well outside its stencil disk")
        V, _ = _expansion(unit, self.eps_scaled, self.indices)
        return self._combine(V)

    def gradients(self, points) -> np.ndarray:
        V, G = _expansion(self.to_unit(points), self.eps_scaled, self.indices, gradient=True)
        return self._combine(G) / self.scale


def _degree_blocks(indices):
    blocks = {}
    for pos, idx in enumerate(indices):
        blocks.setdefault(idx.k, []).append(pos)
    return [blocks[k] for k in sorted(blocks)]


def _select_pivots(C: np.ndarray, indices, n: int):
    """Greedy QR with column pivoting restricted to each degree block.

    Returns the pivot column positions (degree nondecreasing) and the
    orthonormal factor, or ``None`` if ``C`` does not reach rank ``n``.
    """
    Q = np.zeros((C.shape[0], 0))
    sel = []
    diag = []
    for block in _degree_blocks(indices):
        B = C[:, block]
        ref = max(np.max(np.linalg.norm(B, axis=0)), 1e-300)
        Bp = B - Q @ (Q.T @ B)
        Bp = Bp - Q @ (Q.T @ Bp)
        qb, rb, piv = sla.qr(Bp, mode="economic", pivoting=True)
        dk = np.abs(np.diag(rb))
        rank = int(np.sum(dk > RANK_TOL * ref))
        rank = min(rank, n - len(sel))
        if rank:
            sel.extend(block[j] for j in piv[:rank])
            diag.extend(dk[:rank])
            Q = np.hstack([Q, qb[:, :rank]])
        if len(sel) == n:
            return sel, Q, np.array(diag)
    return None


def build_rbfqr_basis(nodes, eps: float, center=None, extra_degrees: int = 0) -> RbfQrBasis:
    """Build the RBF-QR basis of the Gaussian space on ``nodes`` for shape ``eps``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    n = len(nodes)
    if not eps > 0:
        raise ValueError("shape parameter must be positive")
    if len(np.unique(nodes, axis=0)) != n:
        raise RankDeficiencyError("stencil nodes must be distinct")
    center = nodes.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    rel = nodes - center
    radius = np.hypot(rel[:, 0], rel[:, 1])
    scale = float(radius.max()) if radius.max() > 0 else 1.0
    unit = rel / scale
    r, theta = radius / scale, np.arctan2(unit[:, 1], unit[:, 0])
    eps_s = eps * scale
    log_eps = log(eps_s)

    k_max = 0
    while (k_max + 1) * (k_max + 2) // 2 < n:
        k_max += 1
    found = None
    while found is None:
        indices = expansion_indices(k_max)
        C = _coefficients(r, theta, eps_s, indices)
        found = _select_pivots(C, indices, n)
        if found is None:
            if k_max >= K_MAX_CAP:
                raise RankDeficiencyError(f"coefficient matrix rank < {n} through degree {K_MAX_CAP}")
            k_max += 1
    sel, Q, pivot_diag = found
    top = max(indices[i].k for i in sel)

    # extend while the next degree still contributes above roundoff
    log_dmin = min(_log_scale_factor(indices[i].k, indices[i].l, log_eps) for i in sel)
    k_trunc = max(k_max, top)
    while k_trunc < K_MAX_CAP:
        j = k_trunc + 1
        ratio = max(_log_scale_factor(j, l, log_eps) for l in range(j // 2 + 1)) - log_dmin
        if ratio < log(TRUNCATION_TOL):
            break
        k_trunc = j
    k_trunc = min(k_trunc + extra_degrees, K_MAX_CAP + extra_degrees)
    indices = expansion_indices(k_trunc)
    C = _coefficients(r, theta, eps_s, indices)

    sel_set = set(sel)
    rest = [i for i in range(len(indices)) if i not in sel_set]
    R = Q.T @ C
    sel_deg = np.array([indices[i].k for i in sel])
    rest_deg = np.array([indices[i].k for i in rest])
    R1 = np.triu(R[:, sel])
    R2 = R[:, rest]
    # components of a dependent lower-degree column on later pivots are roundoff
    R2[sel_deg[:, None] > rest_deg[None, :]] = 0.0
    X = sla.solve_triangular(R1, R2, check_finite=False)
    log_d_sel = np.array([_log_scale_factor(indices[i].k, indices[i].l, log_eps) for i in sel])
    log_d_rest = np.array([_log_scale_factor(indices[i].k, indices[i].l, log_eps) for i in rest])
    log_ratio = log_d_rest[None, :] - log_d_sel[:, None]
    Rtilde = np.zeros_like(X)
    nz = X != 0
    Rtilde[nz] = X[nz] * np.exp(log_ratio[nz])
    if not np.all(np.isfinite(Rtilde)):
        raise RankDeficiencyError("non-finite correction matrix")
    ordered = [indices[i] for i in sel] + [indices[i] for i in rest]
    return RbfQrBasis(eps, nodes, center, scale, eps_s, ordered, Rtilde, k_trunc, pivot_diag)


def evaluate_psi(basis: RbfQrBasis, points) -> np.ndarray:
    """Matrix of ``psi_k(x)``: rows points, columns basis functions."""
    return basis.values(points)


def apply_boundary_operator_psi(basis: RbfQrBasis, points, normals=None, op: str = "value") -> np.ndarray:
    """Rows ``B psi_k(x_i)`` for ``op`` in {"value", "normal_derivative"}."""
    if op == "value":
        return basis.values(points)
    if op != "normal_derivative":
        raise ValueError(f"unknown boundary operator {op!r}")
    g = basis.gradients(points)
    return np.einsum("pkd,pd->pk", g, np.atleast_2d(np.asarray(normals, dtype=float)))
