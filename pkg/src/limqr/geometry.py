"""Domains, boundary discretizations and interior node generators."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
BC_KINDS = (DIRICHLET, NEUMANN)
CSV_HEADER = ("kind", "x", "y", "nx", "ny", "bc")

# advancing-front tuning: interior nodes closer than this many spacings to the
# boundary are dropped (calibrated on the square/disk reference counts)
FRONT_CLEARANCE = 0.5
HALTON_CLEARANCE = 0.3
GRID_ANISOTROPY = 1.3


@dataclass(frozen=True)
class Rectangle:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("rectangle needs xmin < xmax and ymin < ymax")

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def perimeter(self) -> float:
        return 2.0 * (self.width + self.height)

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return self.xmin, self.xmax, self.ymin, self.ymax

    def distance_to_boundary(self, points) -> np.ndarray:
        """Signed distance, positive inside."""
        p = np.atleast_2d(points)
        return np.minimum.reduce([p[:, 0] - self.xmin, self.xmax - p[:, 0],
                                  p[:, 1] - self.ymin, self.ymax - p[:, 1]])

    def boundary(self, h: float | None = None, counts: tuple[int, int] | None = None):
        """Equispaced perimeter nodes including the corners.

        ``counts`` gives the number of segments along x and y; by default they
        are ``round(width / h)`` and ``round(height / h)``.  Corner normals are
        the normalized diagonals (corners always carry Dirichlet data).
        """
        if counts is None:
            if h is None or h <= 0:
                raise ValueError("boundary spacing must be positive")
            counts = (max(1, round(self.width / h)), max(1, round(self.height / h)))
        mx, my = counts
        xs = np.linspace(self.xmin, self.xmax, mx + 1)
        ys = np.linspace(self.ymin, self.ymax, my + 1)
        pts, nrm = [], []
        for x in xs:  # bottom edge, left to right
            pts.append((x, self.ymin))
            nrm.append((0.0, -1.0))
        for y in ys[1:]:
            pts.append((self.xmax, y))
            nrm.append((1.0, 0.0))
        for x in xs[-2::-1]:
            pts.append((x, self.ymax))
            nrm.append((0.0, 1.0))
        for y in ys[-2:0:-1]:
            pts.append((self.xmin, y))
            nrm.append((-1.0, 0.0))
        pts = np.array(pts)
        nrm = np.array(nrm)
        s = 1.0 / math.sqrt(2.0)
        corners = {(self.xmin, self.ymin): (-s, -s), (self.xmax, self.ymin): (s, -s),
                   (self.xmax, self.ymax): (s, s), (self.xmin, self.ymax): (-s, s)}
        for i, p in enumerate(map(tuple, pts)):
            if p in corners:
                nrm[i] = corners[p]
        return pts, nrm


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def distance_to_boundary(self, points) -> np.ndarray:
        p = np.atleast_2d(points) - np.asarray(self.center)
        return self.radius - np.hypot(p[:, 0], p[:, 1])

    def boundary(self, h: float | None = None, count: int | None = None):
        if count is None:
            if h is None or h <= 0:
                raise ValueError("boundary spacing must be positive")
            count = max(3, math.ceil(self.perimeter / h))
        t = 2.0 * math.pi * np.arange(count) / count
        nrm = np.column_stack([np.cos(t), np.sin(t)])
        return np.asarray(self.center) + self.radius * nrm, nrm


Domain = Rectangle | Disk


@dataclass(frozen=True)
class BoundaryNode:
    position: np.ndarray
    normal: np.ndarray
    bc: str
    value: float


@dataclass
class NodeSet:
    """Interior collocation nodes plus boundary nodes with normals and BC tags."""

    interior: np.ndarray
    boundary: np.ndarray
    normals: np.ndarray
    bc: np.ndarray = None
    values: np.ndarray = None
    domain: Domain | None = field(default=None, compare=False)

    def __post_init__(self):
        self.interior = np.asarray(self.interior, dtype=float).reshape(-1, 2)
        self.boundary = np.asarray(self.boundary, dtype=float).reshape(-1, 2)
        self.normals = np.asarray(self.normals, dtype=float).reshape(-1, 2)
        nb = len(self.boundary)
        if self.bc is None:
            self.bc = np.full(nb, DIRICHLET, dtype=object)
        self.bc = np.asarray(self.bc, dtype=object)
        if self.values is None:
            self.values = np.zeros(nb)
        self.values = np.asarray(self.values, dtype=float)
        if not (len(self.normals) == len(self.bc) == len(self.values) == nb):
            raise ValueError("boundary arrays have inconsistent lengths")
        if not set(self.bc) <= set(BC_KINDS):
            raise ValueError(f"unknown boundary condition kinds {set(self.bc) - set(BC_KINDS)}")

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    @property
    def n_boundary(self) -> int:
        return len(self.boundary)

    @property
    def points(self) -> np.ndarray:
        """Interior nodes followed by boundary nodes."""
        return np.vstack([self.interior, self.boundary])

    @property
    def is_neumann(self) -> np.ndarray:
        return self.bc == NEUMANN

    def boundary_nodes(self) -> list[BoundaryNode]:
        return [BoundaryNode(p, n, b, v) for p, n, b, v in
                zip(self.boundary, self.normals, self.bc, self.values)]

    def min_separation(self) -> float:
        pts = self.points
        if len(pts) < 2:
            return math.inf
        d, _ = cKDTree(pts).query(pts, k=2)
        return float(d[:, 1].min())

    def validate(self, tol: float = 1e-10) -> None:
        if self.domain is not None and self.n_interior:
            if np.any(self.domain.distance_to_boundary(self.interior) <= 0):
                raise ValueError("interior node on or outside the boundary")
            if self.n_boundary and np.any(np.abs(self.domain.distance_to_boundary(self.boundary)) > tol):
                raise ValueError("boundary node off the domain boundary")
        if self.n_boundary and np.any(np.abs(np.hypot(*self.normals.T) - 1) > 1e-12):
            raise ValueError("boundary normals are not unit vectors")
        if self.min_separation() <= 0:
            raise ValueError("node set contains coincident points")

    def with_boundary_data(self, bc, values) -> "NodeSet":
        return replace(self, bc=np.asarray(bc, dtype=object), values=np.asarray(values, dtype=float))


def halton_points(count: int, skip: int = 1) -> np.ndarray:
    """First ``count`` Halton points (bases 2 and 3) starting at index ``skip``."""
    if count < 1:
        raise ValueError("count must be positive")
    if skip < 1:
        raise ValueError("skip must be at least 1 (index 0 is the corner (0, 0))")
    engine = qmc.Halton(d=2, scramble=False)
    engine.fast_forward(skip)
    return engine.random(count)


def _grid_shape(domain: Rectangle, n_interior: int) -> tuple[int, int]:
    """Interior grid dimensions closest to ``n_interior`` among near-square cell shapes.

    Shapes whose cell aspect ratio exceeds ``GRID_ANISOTROPY`` are only used
    when no near-square shape exists (very small counts).
    """
    best = None
    for ny in range(1, n_interior + 1):
        nx = max(1, round(n_interior / ny))
        cell = abs(math.log((domain.width / (nx + 1)) / (domain.height / (ny + 1))))
        key = (cell > math.log(GRID_ANISOTROPY), abs(nx * ny - n_interior), cell)
        if best is None or key < best[0]:
            best = (key, (nx, ny))
    return best[1]


def uniform_nodes(domain: Rectangle, nx: int, ny: int) -> NodeSet:
    """Tensor grid with ``nx`` x ``ny`` points; perimeter points become boundary nodes."""
    if nx < 2 or ny < 2 or nx * ny < 4:
        raise ValueError("uniform grid needs nx, ny >= 2")
    xs = np.linspace(domain.xmin, domain.xmax, nx)
    ys = np.linspace(domain.ymin, domain.ymax, ny)
    X, Y = np.meshgrid(xs[1:-1], ys[1:-1], indexing="xy")
    interior = np.column_stack([X.ravel(), Y.ravel()])
    bnd, nrm = domain.boundary(counts=(nx - 1, ny - 1))
    return NodeSet(interior, bnd, nrm, domain=domain)


def uniform_nodes_count(domain: Rectangle, n_interior: int) -> NodeSet:
    nx, ny = _grid_shape(domain, n_interior)
    return uniform_nodes(domain, nx + 2, ny + 2)


def _fill_box(bounds, radius_fn: Callable[[np.ndarray], float], seed: int, max_nodes: int) -> np.ndarray:
    """Advancing-front node placement over a box, sweeping upwards from its bottom edge.

    Potential dot positions (PDPs) are kept ordered by x.  The lowest PDP is
    promoted to a node, PDPs within the local radius are removed and five new
    PDPs are spread on the arc between the surviving left and right neighbours.
    """
    xmin, xmax, ymin, ymax = bounds
    rng = np.random.default_rng(seed)
    r0 = radius_fn(np.array([xmin, ymin]))
    ninit = max(2, int(math.ceil((xmax - xmin) / (0.1 * r0))))
    pdp = np.column_stack([np.linspace(xmin, xmax, ninit), ymin + 1e-4 * r0 * rng.random(ninit)])
    nodes = []
    fractions = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
    i = int(np.argmin(pdp[:, 1]))
    while pdp[i, 1] <= ymax and len(nodes) < max_nodes:
        p = pdp[i].copy()
        nodes.append(p)
        r = radius_fn(p)
        d2 = np.sum((pdp - p) ** 2, axis=1)
        far_left = np.nonzero(d2[:i] > r * r)[0]
        far_right = np.nonzero(d2[i + 1:] > r * r)[0]
        if len(far_left):
            il = far_left[-1]
            ang_l = math.atan2(pdp[il, 1] - p[1], pdp[il, 0] - p[0])
        else:
            il, ang_l = -1, math.pi
        if len(far_right):
            ir = i + 1 + far_right[0]
            ang_r = math.atan2(pdp[ir, 1] - p[1], pdp[ir, 0] - p[0])
        else:
            ir, ang_r = len(pdp), 0.0
        ang = ang_l - fractions * (ang_l - ang_r)
        new = np.column_stack([p[0] + r * np.cos(ang), p[1] + r * np.sin(ang)])
        new = new[(new[:, 0] >= xmin) & (new[:, 0] <= xmax)]
        pdp = np.vstack([pdp[:il + 1], new, pdp[ir:]])
        i = int(np.argmin(pdp[:, 1]))
    return np.array(nodes).reshape(-1, 2)


def quasi_uniform_nodes(domain: Domain, h: float, density: Callable | None = None,
                        boundary_h: float | None = None, seed: int = 0,
                        clearance: float = FRONT_CLEARANCE) -> NodeSet:
    """Quasi-uniform scattered interior nodes with local spacing ``h / density``.

    The interior fill advances from the bottom edge of the bounding box; nodes
    within ``clearance * h`` of the boundary are discarded.  The boundary is
    discretized separately with spacing ``boundary_h`` (default ``h``).
    """
    if not h > 0:
        raise ValueError("spacing must be positive")
    xmin, xmax, ymin, ymax = domain.bounds
    if h >= min(xmax - xmin, ymax - ymin):
        raise ValueError("spacing larger than the domain: no interior node fits")
    if density is None:
        radius_fn = lambda p: h  # noqa: E731
    else:
        radius_fn = lambda p: h / float(density(p))  # noqa: E731
    pad = h
    box = (xmin - pad, xmax + pad, ymin - pad, ymax + pad)
    max_nodes = int(10 * (box[1] - box[0]) * (box[3] - box[2]) / (0.25 * h * h)) + 100
    pts = _fill_box(box, radius_fn, seed, max_nodes)
    local_h = np.array([radius_fn(p) for p in pts]) if density is not None else h
    keep = domain.distance_to_boundary(pts) >= clearance * local_h
    interior = pts[keep]
    if len(interior) < 1:
        raise ValueError("no interior node fits for this spacing")
    bnd, nrm = domain.boundary(boundary_h or h)
    return NodeSet(interior, bnd, nrm, domain=domain)


def halton_nodes(domain: Domain, n_interior: int, boundary_h: float | None = None,
                 skip: int = 1) -> NodeSet:
    """Halton interior nodes mapped to the domain's bounding box.

    Points closer than ``0.3 * sqrt(area / n)`` to the boundary (or outside a
    disk) are skipped and the sequence continues until ``n_interior`` remain.
    """
    xmin, xmax, ymin, ymax = domain.bounds
    h = math.sqrt(domain.area / n_interior)
    out = []
    start = skip
    while len(out) < n_interior:
        batch = halton_points(2 * n_interior, start)
        start += len(batch)
        pts = np.column_stack([xmin + (xmax - xmin) * batch[:, 0], ymin + (ymax - ymin) * batch[:, 1]])
        out.extend(pts[domain.distance_to_boundary(pts) >= HALTON_CLEARANCE * h])
    interior = np.array(out[:n_interior])
    bnd, nrm = domain.boundary(boundary_h or h)
    return NodeSet(interior, bnd, nrm, domain=domain)


def repel_nodes_disk(h: float, neighbor_count: int = 5, iterations: int = 20, seed: int = 1,
                     jitter: float = 0.2, step: float = 0.1, disk: Disk | None = None) -> NodeSet:
    """Jittered grid on a disk relaxed by nearest-neighbour repulsion.

    Each iteration moves every interior node by at most ``step * h`` along the
    force ``sum r_i / |r_i|^3`` from its ``neighbor_count`` nearest nodes
    (boundary nodes included, but held fixed).  Moves that would bring a node
    closer than ``h / 4`` to the circle are rejected.
    """
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    if not h > 0:
        raise ValueError("spacing must be positive")
    disk = disk or Disk()
    cx, cy = disk.center
    g = np.arange(-disk.radius, disk.radius + h / 2, h)
    X, Y = np.meshgrid(cx + g, cy + g)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts = pts[disk.distance_to_boundary(pts) >= 0.5 * h]
    rng = np.random.default_rng(seed)
    pts = pts + jitter * h * rng.uniform(-1.0, 1.0, pts.shape)
    pts = pts[disk.distance_to_boundary(pts) >= 0.25 * h]
    bnd, nrm = disk.boundary(h)
    for _ in range(iterations):
        allpts = np.vstack([pts, bnd])
        d, idx = cKDTree(allpts).query(pts, k=neighbor_count + 1)
        rel = pts[:, None, :] - allpts[idx[:, 1:]]
        force = np.sum(rel / d[:, 1:, None] ** 3, axis=1)
        mag = np.hypot(force[:, 0], force[:, 1])
        scale = step * h * np.minimum(1.0, mag * h * h) / np.where(mag > 0, mag, 1.0)
        trial = pts + scale[:, None] * force
        ok = disk.distance_to_boundary(trial) >= 0.25 * h
        pts = np.where(ok[:, None], trial, pts)
    return NodeSet(pts, bnd, nrm, domain=disk)


def make_nodes(domain: Domain, distribution: str, n_interior: int, seed: int = 0) -> NodeSet:
    """Node set of the requested distribution with roughly ``n_interior`` interior nodes."""
    if distribution == "uniform":
        if not isinstance(domain, Rectangle):
            raise ValueError("uniform grids are only defined on rectangles")
        return uniform_nodes_count(domain, n_interior)
    h = math.sqrt(domain.area / n_interior)
    if isinstance(domain, Rectangle):
        # one boundary node per interior row/column
        nx, ny = _grid_shape(domain, n_interior)
        bh = min(domain.width / nx, domain.height / ny)
    else:
        bh = None
    if distribution == "halton":
        return halton_nodes(domain, n_interior, boundary_h=bh)
    if distribution == "quasi-uniform":
        return quasi_uniform_for_count(domain, n_interior, boundary_h=bh, seed=seed)
    if distribution == "repel":
        if not isinstance(domain, Disk):
            raise ValueError("repel node sets are only defined on disks")
        return _bisect_spacing(lambda h: repel_nodes_disk(h, seed=seed or 1, disk=domain), domain, n_interior)
    raise ValueError(f"unknown distribution {distribution!r}")


def _bisect_spacing(build: Callable[[float], NodeSet], domain: Domain, n_interior: int,
                    tol: float = 0.005, max_iter: int = 40) -> NodeSet:
    """Bisect the spacing ``h`` passed to ``build`` until the interior count is within ``tol``."""
    h0 = math.sqrt(domain.area / n_interior)
    lo, hi = 0.7 * h0, 1.4 * h0
    best = None
    for _ in range(max_iter):
        h = 0.5 * (lo + hi)
        ns = build(h)
        if best is None or abs(ns.n_interior - n_interior) < abs(best.n_interior - n_interior):
            best = ns
        if abs(ns.n_interior - n_interior) <= tol * n_interior:
            break
        if ns.n_interior > n_interior:
            lo = h
        else:
            hi = h
    return best


def quasi_uniform_for_count(domain: Domain, n_interior: int, boundary_h: float | None = None,
                            seed: int = 0, tol: float = 0.005, max_iter: int = 40) -> NodeSet:
    """Bisect the spacing until the quasi-uniform fill has about ``n_interior`` nodes."""
    return _bisect_spacing(lambda h: quasi_uniform_nodes(domain, h, boundary_h=boundary_h, seed=seed),
                           domain, n_interior, tol, max_iter)


def write_nodes_csv(nodeset: NodeSet, stream) -> None:
    """Write nodes as ``kind,x,y,nx,ny,bc`` rows, 17 significant digits."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(CSV_HEADER)
    fmt = lambda v: format(float(v), ".17g")  # noqa: E731
    for p in nodeset.interior:
        w.writerow(["interior", fmt(p[0]), fmt(p[1]), "", "", ""])
    for p, n, b in zip(nodeset.boundary, nodeset.normals, nodeset.bc):
        w.writerow(["boundary", fmt(p[0]), fmt(p[1]), fmt(n[0]), fmt(n[1]), b])


def read_nodes_csv(stream) -> NodeSet:
    rows = list(csv.DictReader(stream))
    if rows and tuple(rows[0].keys()) != CSV_HEADER:
        raise ValueError(f"unexpected node CSV header {tuple(rows[0].keys())}")
    interior = [(float(r["x"]), float(r["y"])) for r in rows if r["kind"] == "interior"]
    bnd = [r for r in rows if r["kind"] == "boundary"]
    if len(interior) + len(bnd) != len(rows):
        raise ValueError("node CSV rows must have kind interior or boundary")
    return NodeSet(np.array(interior).reshape(-1, 2),
                   np.array([(float(r["x"]), float(r["y"])) for r in bnd]).reshape(-1, 2),
                   np.array([(float(r["nx"]), float(r["ny"])) for r in bnd]).reshape(-1, 2),
                   bc=np.array([r["bc"] for r in bnd], dtype=object))


def nodes_to_csv_string(nodeset: NodeSet) -> str:
    buf = io.StringIO()
    write_nodes_csv(nodeset, buf)
    return buf.getvalue()
