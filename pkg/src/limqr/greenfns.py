"""Laplace fundamental solution and the Dirichlet Green's function of a disk.

Sign convention: ``G`` solves ``Lap_x G = delta(x - xi)`` inside the disk and
vanishes on its circle, so ``G <= 0`` and the Poisson kernel ``Q = dG/dn``
is positive.  With this choice every subregion obeys

    u(xi) = int_circle Q u dGamma + int_disk G Lap(u) dOmega.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
ON_CIRCLE_TOL = 1e-10


@dataclass(frozen=True)
class DiskSubregion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError(f"subregion radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SourceConfig:
    """Collocation point inside a subregion, with its image point."""

    xi: np.ndarray
    rho: float
    image: np.ndarray | None

    @classmethod
    def build(cls, xi, sub: DiskSubregion) -> "SourceConfig":
        xi = np.asarray(xi, dtype=float)
        offset = xi - sub.center
        rho = float(np.hypot(*offset))
        if rho >= sub.radius:
            raise ValueError("source point must lie strictly inside the subregion")
        image = None if rho == 0.0 else sub.center + (sub.radius**2 / rho**2) * offset
        return cls(xi, rho, image)


def _dist(x, y):
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return np.hypot(d[..., 0], d[..., 1])


def laplace_fundamental(x, xi):
    """``(1/2 pi) ln(1/|x - xi|)``; vectorized over the leading axes of ``x``."""
    r = _dist(x, xi)
    if np.any(r == 0):
        raise ValueError("fundamental solution evaluated at the source point")
    return -np.log(r) / TWO_PI


def laplace_fundamental_normal(x, n, xi):
    """Normal derivative of the fundamental solution at ``x`` along ``n``."""
    d = np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    if np.any(r2 == 0):
        raise ValueError("fundamental solution evaluated at the source point")
    n = np.asarray(n, dtype=float)
    return -(d[..., 0] * n[..., 0] + d[..., 1] * n[..., 1]) / (TWO_PI * r2)


def dgf_disk(x, cfg: SourceConfig, sub: DiskSubregion):
    """Dirichlet Green's function of the disk (nonpositive inside)."""
    x = np.asarray(x, dtype=float)
    r = _dist(x, cfg.xi)
    if np.any(r == 0):
        raise ValueError("Green's function evaluated at the source point")
    if np.any(_dist(x, sub.center) > sub.radius * (1 + ON_CIRCLE_TOL)):
        raise ValueError("Green's function evaluated outside the subregion")
    if cfg.image is None:
        return np.log(r / sub.radius) / TWO_PI
    r_img = _dist(x, cfg.image)
    return np.log((sub.radius * r) ** 2 / (cfg.rho * r_img) ** 2) / (2.0 * TWO_PI)


def dgf_disk_normal(x_on_circle, cfg: SourceConfig, sub: DiskSubregion):
    """Poisson kernel ``(R^2 - rho^2) / (2 pi R |x - xi|^2)`` on the circle."""
    x = np.asarray(x_on_circle, dtype=float)
    if np.any(np.abs(_dist(x, sub.center) - sub.radius) > ON_CIRCLE_TOL * max(1.0, sub.radius)):
        raise ValueError("Poisson kernel requires points on the subregion circle")
    d = x - cfg.xi
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return (sub.radius**2 - cfg.rho**2) / (TWO_PI * sub.radius * r2)
