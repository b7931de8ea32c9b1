"""Uniform 1-D meshes, the discrete elliptic operator, and Sobolev-type norms.

The elliptic operator is the 3-point negative Laplacian on interior nodes
with homogeneous Dirichlet values, or identity-minus-Laplacian on cell
centers with reflecting ghost cells (homogeneous Neumann).  Both variants
are symmetric and positive definite with respect to the h-weighted inner
product, and every norm below is built on that same quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class Grid:
    """Uniform mesh with ``n`` unknowns on ``[x_lo, x_hi]``.

    Dirichlet unknowns are the interior nodes (spacing ``h = L/(n+1)``);
    Neumann unknowns are cell centers (``h = L/n``).  Immutable; safe to
    share across workers.
    """

    n: int
    x_lo: float = 0.0
    x_hi: float = 1.0
    bc: str = DIRICHLET

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 unknowns, got n={self.n}")
        if not self.x_lo < self.x_hi:
            raise ValueError(f"empty domain [{self.x_lo}, {self.x_hi}]")
        if self.bc not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def h(self) -> float:
        if self.bc == DIRICHLET:
            return self.length / (self.n + 1)
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        """Coordinates of the unknowns, strictly increasing, inside the domain."""
        if self.bc == DIRICHLET:
            return self.x_lo + self.h * np.arange(1, self.n + 1)
        return self.x_lo + self.h * (np.arange(self.n) + 0.5)


@dataclass(frozen=True)
class Field:
    """Real values sampled on a grid.  Values are copied and frozen."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(
                f"field needs {self.grid.n} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def zeros(grid: Grid) -> Field:
    return Field(grid, np.zeros(grid.n))


def constant(grid: Grid, c: float) -> Field:
    return Field(grid, np.full(grid.n, float(c)))


def from_function(grid: Grid, fn: Callable[[np.ndarray], np.ndarray]) -> Field:
    return Field(grid, np.asarray(fn(grid.x), dtype=float))


def _require_same_grid(u: Field, v: Field) -> None:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")


# -- elliptic operator --------------------------------------------------------

def elliptic_values(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Apply the elliptic operator to raw values (hot path, no wrapping).

    Dirichlet: (2 v_i - v_{i-1} - v_{i+1}) / h^2 with zero ghost values.
    Neumann:   v + negative Laplacian with reflecting ghost cells.
    """
    h2 = grid.h * grid.h
    out = 2.0 * v
    out[:-1] -= v[1:]
    out[1:] -= v[:-1]
    if grid.bc == NEUMANN:
        out[0] -= v[0]
        out[-1] -= v[-1]
        out /= h2
        out += v
        return out
    out /= h2
    return out


def apply_elliptic(u: Field) -> Field:
    """Elliptic operator of the evolution: -Laplacian (Dirichlet) or
    identity-minus-Laplacian (Neumann), symmetric positive definite."""
    return Field(u.grid, elliptic_values(u.grid, u.values))


def elliptic_diagonals(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """(main, off) diagonals of the elliptic operator's tridiagonal matrix."""
    h2 = grid.h * grid.h
    main = np.full(grid.n, 2.0 / h2)
    off = np.full(grid.n - 1, -1.0 / h2)
    if grid.bc == NEUMANN:
        main[0] = 1.0 / h2
        main[-1] = 1.0 / h2
        main += 1.0
    return main, off


def second_diff_values(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Second difference (v_{i+1} - 2 v_i + v_{i-1}) / h^2 with bc ghosts."""
    a = elliptic_values(grid, v)
    if grid.bc == NEUMANN:
        return v - a
    return -a


# -- norms and inner products -------------------------------------------------

def l2_values(grid: Grid, v: np.ndarray) -> float:
    return float(np.sqrt(grid.h * np.dot(v, v)))


def inner_values(grid: Grid, v: np.ndarray, w: np.ndarray) -> float:
    return float(grid.h * np.dot(v, w))


def grad_sq_values(grid: Grid, v: np.ndarray) -> float:
    """Squared gradient seminorm h * sum((difference/h)^2), boundary
    differences included for Dirichlet, reflected away for Neumann."""
    d = np.diff(v)
    s = float(np.dot(d, d))
    if grid.bc == DIRICHLET:
        s += v[0] * v[0] + v[-1] * v[-1]
    return s / grid.h


def h1_sq_values(grid: Grid, v: np.ndarray) -> float:
    return grid.h * float(np.dot(v, v)) + grad_sq_values(grid, v)


def norm_l2(u: Field) -> float:
    """Quadrature-weighted L2 norm, sqrt(h * sum u_i^2)."""
    return l2_values(u.grid, u.values)


def inner_l2(u: Field, v: Field) -> float:
    """L2 inner product h * sum u_i v_i."""
    _require_same_grid(u, v)
    return inner_values(u.grid, u.values, v.values)


def norm_h1(u: Field) -> float:
    """H1 norm: L2 part plus gradient seminorm (bc-aware differences)."""
    return float(np.sqrt(h1_sq_values(u.grid, u.values)))


def norm_lp(u: Field, p: float) -> float:
    """Lp norm (h * sum |u_i|^p)^(1/p); p = inf delegates to the sup norm."""
    if p < 1.0:
        raise ValueError(f"Lp norm needs p >= 1, got {p}")
    if np.isinf(p):
        return norm_linf(u)
    vals = np.abs(u.values)
    return float((u.grid.h * np.sum(vals**p)) ** (1.0 / p))


def norm_linf(u: Field) -> float:
    return float(np.max(np.abs(u.values))) if u.grid.n else 0.0


def norm_h2(u: Field) -> float:
    """H2 norm: H1 norm plus the L2 norm of second differences."""
    grid = u.grid
    d2 = second_diff_values(grid, u.values)
    return float(np.sqrt(h1_sq_values(grid, u.values) + grid.h * np.dot(d2, d2)))


def h2_sq_values(grid: Grid, v: np.ndarray) -> float:
    d2 = second_diff_values(grid, v)
    return h1_sq_values(grid, v) + grid.h * float(np.dot(d2, d2))
