"""Uniform grids on [0, d] with Simpson quadrature and finite differences.

Conventions used throughout the package:

* Grids are uniform, include both endpoints, and have an odd number of
  points so that composite Simpson weights exist.
* Inner products are conjugate-linear in the first argument,
  <f|g> = integral of conj(f) * g, evaluated with the Simpson weights.
* Derivatives are second-order accurate everywhere: central differences
  at interior points, one-sided three/four-point stencils at the ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "make_grid",
    "grid_function",
    "inner_product",
    "norm",
    "differentiate",
    "write_gridfunction_csv",
    "read_gridfunction_csv",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform sampling of [0, d] with composite Simpson weights.

    Attributes
    ----------
    d : float
        Interval length.
    n_points : int
        Total number of samples, endpoints included.  Odd so the intervals
        pair into Simpson panels.
    x : np.ndarray
        Sample coordinates, x[0] = 0, x[-1] = d.
    spacing : float
        d / (n_points - 1).
    weights : np.ndarray
        Simpson quadrature weights, all positive, summing to d.
    """

    d: float
    n_points: int
    x: np.ndarray = field(repr=False)
    spacing: float
    weights: np.ndarray = field(repr=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.d == other.d and self.n_points == other.n_points

    def __hash__(self) -> int:
        return hash((self.d, self.n_points))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples of a function on a Grid, one value per grid point."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.grid.n_points


def make_grid(d: float, n_points: int) -> Grid:
    """Build a uniform grid on [0, d] with composite Simpson weights.

    n_points must be odd (the intervals pair into Simpson panels) and at
    least 3 (one panel).  Production pipelines use much finer grids; the
    CLI enforces its own minimum.
    """
    if not np.isfinite(d) or d <= 0:
        raise ValueError(f"interval length must be positive, got {d}")
    n_points = int(n_points)
    if n_points % 2 == 0:
        raise ValueError(f"n_points must be odd for Simpson weights, got {n_points}")
    if n_points < 3:
        raise ValueError(f"n_points must be at least 3, got {n_points}")
    x = np.linspace(0.0, float(d), n_points)
    spacing = d / (n_points - 1)
    w = np.full(n_points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= spacing / 3.0
    x.setflags(write=False)
    w.setflags(write=False)
    return Grid(d=float(d), n_points=n_points, x=x, spacing=spacing, weights=w)


def grid_function(grid: Grid, values: np.ndarray) -> GridFunction:
    """Wrap complex samples as a GridFunction, validating shape and finiteness."""
    v = np.asarray(values, dtype=complex)
    if v.shape != (grid.n_points,):
        raise ValueError(
            f"values shape {v.shape} does not match grid with {grid.n_points} points"
        )
    if not np.all(np.isfinite(v.real)) or not np.all(np.isfinite(v.imag)):
        raise ValueError("grid function contains non-finite samples")
    v = v.copy()
    v.setflags(write=False)
    return GridFunction(grid=grid, values=v)


def _require_same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid is not g.grid and f.grid != g.grid:
        raise ValueError("grid mismatch between grid functions")


def inner_product(f: GridFunction, g: GridFunction) -> complex:
    """Simpson-weighted <f|g> = integral conj(f) g, conjugate-linear in f."""
    _require_same_grid(f, g)
    return complex(np.sum(f.grid.weights * np.conj(f.values) * g.values))


def norm(f: GridFunction) -> float:
    """Quadrature L2 norm sqrt(<f|f>)."""
    return float(np.sqrt(np.sum(f.grid.weights * np.abs(f.values) ** 2)))


def differentiate(f: GridFunction, order: int) -> GridFunction:
    """First or second derivative, second-order accurate including endpoints."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    v = f.values
    h = f.grid.spacing
    g = np.empty_like(v)
    if order == 1:
        g[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
        g[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
        g[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    else:
        g[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
        g[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
        g[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return grid_function(f.grid, g)


def write_gridfunction_csv(f: GridFunction, path) -> None:
    """Write `x,re,im` rows at full double precision (17 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,re,im\n")
        for xj, vj in zip(f.grid.x, f.values):
            fh.write(f"{xj:.17g},{vj.real:.17g},{vj.imag:.17g}\n")


def read_gridfunction_csv(path, grid: Grid | None = None) -> GridFunction:
    """Read a `x,re,im` CSV; if `grid` is given the x column must match it."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValueError(f"expected 3 columns x,re,im in {path}")
    x, re, im = data[:, 0], data[:, 1], data[:, 2]
    if grid is None:
        n = len(x)
        if n < 3 or n % 2 == 0:
            raise ValueError(f"CSV sample count {n} is not a valid odd grid size")
        d = x[-1]
        grid = make_grid(d, n)
    if len(x) != grid.n_points or not np.allclose(x, grid.x, atol=1e-12 * max(1.0, grid.d)):
        raise ValueError(f"x column of {path} does not match the target grid")
    return grid_function(grid, re + 1j * im)
