"""Linear lower-order terms ``b(u, grad u) = a(x) u + c1(x) u_x + c2(x) u_y``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Coefficient = Optional[Callable[[np.ndarray], np.ndarray]]


def _eval(coef: Coefficient, points: np.ndarray) -> np.ndarray | None:
    if coef is None:
        return None
    return np.broadcast_to(np.asarray(coef(points), dtype=float), (len(points),))


@dataclass(frozen=True)
class LinearTerm:
    """Spatially varying linear operator acting on a field and its gradient.

    Each coefficient is ``None`` (absent) or a callable mapping an ``(M, 2)``
    array of points to ``M`` values.
    """

    u: Coefficient = None
    ux: Coefficient = None
    uy: Coefficient = None

    @property
    def is_zero(self) -> bool:
        return self.u is None and self.ux is None and self.uy is None

    @property
    def needs_gradient(self) -> bool:
        return self.ux is not None or self.uy is not None

    def apply(self, points: np.ndarray, values: np.ndarray, gradients: np.ndarray | None) -> np.ndarray:
        """Apply to basis columns: ``values`` (M, K), ``gradients`` (M, K, 2)."""
        out = np.zeros_like(values, dtype=float)
        a = _eval(self.u, points)
        if a is not None:
            out += a[:, None] * values
        for axis, coef in enumerate((self.ux, self.uy)):
            c = _eval(coef, points)
            if c is not None:
                out += c[:, None] * gradients[..., axis]
        return out

    @classmethod
    def zero(cls) -> "LinearTerm":
        return cls()
