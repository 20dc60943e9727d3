"""Grids on intervals and rectangles, cell-average fields and the discrete norm calculus.

Cell ``j`` along an axis of length ``L`` with ``N`` cells covers
``[j*h, (j+1)*h]`` with ``h = L/N``; values are cell averages.  Neumann
structure is realised by mirror ghost cells, so every boundary face carries
a zero normal difference.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

INF = math.inf


@dataclass(frozen=True)
class Grid:
    extents: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        extents = tuple(float(x) for x in np.atleast_1d(self.extents))
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "cells", cells)
        if len(extents) not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {len(extents)}")
        if len(cells) != len(extents):
            raise ValueError("extents and cells must have the same length")
        if any(not (L > 0 and math.isfinite(L)) for L in extents):
            raise ValueError(f"extents must be positive, got {extents}")
        if any(n < 4 for n in cells):
            raise ValueError(f"each axis needs at least 4 cells, got {cells}")

    @classmethod
    def interval(cls, length: float, cells: int) -> "Grid":
        return cls((length,), (cells,))

    @classmethod
    def rectangle(cls, lx: float, ly: float, nx: int, ny: int) -> "Grid":
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    def centers(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, each of shape ``cells``."""
        return tuple(np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij"))

    def locate(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing ``point``; points on the far boundary go to the last cell."""
        point = tuple(np.atleast_1d(point).astype(float))
        if len(point) != self.dim:
            raise ValueError(f"point {point} has wrong dimension for a {self.dim}D grid")
        idx = []
        for x, L, n in zip(point, self.extents, self.cells):
            if not (0.0 <= x <= L):
                raise ValueError(f"point {point} lies outside the closed box {self.extents}")
            idx.append(min(int(math.floor(x / (L / n))), n - 1))
        return tuple(idx)

    def header(self) -> dict:
        return {"dim": self.dim, "extents": list(self.extents), "cells": list(self.cells)}


@dataclass(frozen=True, eq=False)
class Field:
    """Immutable snapshot of one scalar value per cell."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        vals = vals.reshape(self.grid.cells)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "Field":
        return cls(grid, np.full(grid.cells, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        """Sample ``func(*coords)`` at cell centers."""
        return cls(grid, np.broadcast_to(func(*grid.mesh()), grid.cells))

    def _coerce(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return Field(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def mean(self) -> float:
        return float(self.values.mean())


def _check_same_grid(f: Field, g: Field) -> None:
    if f.grid != g.grid:
        raise ValueError(f"fields live on different grids: {f.grid} vs {g.grid}")


def integrate(f: Field) -> float:
    return float(f.values.sum() * f.grid.cell_volume)


def _lr(values: np.ndarray, vol: float, r: float) -> float:
    a = np.abs(values)
    peak = float(a.max()) if a.size else 0.0
    if r == INF:
        return peak
    if peak == 0.0:
        return 0.0
    # scaled by the peak to avoid overflow for large r
    return peak * float(((a / peak) ** r).sum() * vol) ** (1.0 / r)


def lr_norm(f: Field, r: float) -> float:
    """Discrete L^r norm; ``r = INF`` gives the max norm."""
    if not r >= 1:
        raise ValueError(f"L^r norm needs r >= 1, got {r}")
    return _lr(f.values, f.grid.cell_volume, r)


def face_gradient(f: Field, axis: int) -> np.ndarray:
    """Normal differences on all faces along ``axis`` (``N+1`` of them).

    The two boundary faces compare a cell with its mirror ghost, so they are
    exactly zero.
    """
    h = f.grid.spacing[axis]
    inner = np.diff(f.values, axis=axis) / h
    pad = [(0, 0)] * f.grid.dim
    pad[axis] = (1, 1)
    return np.pad(inner, pad)


def gradient(f: Field) -> tuple[Field, ...]:
    """Cell-centered gradient, one Field per axis.

    Each component is the mean of the two adjacent face differences, i.e. the
    centered difference ``(f[i+1] - f[i-1]) / 2h`` with mirror ghosts.
    """
    comps = []
    for axis in range(f.grid.dim):
        fg = face_gradient(f, axis)
        lo = [slice(None)] * f.grid.dim
        hi = [slice(None)] * f.grid.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        comps.append(Field(f.grid, 0.5 * (fg[tuple(lo)] + fg[tuple(hi)])))
    return tuple(comps)


def divergence(components: Sequence[Field]) -> Field:
    """Negative adjoint of :func:`gradient` with respect to the cell-volume inner product.

    With this choice ``integrate(divergence(w) * phi) == -sum_a integrate(w[a] * gradient(phi)[a])``
    holds to roundoff for every vector field ``w`` and scalar ``phi``.
    """
    grid = components[0].grid
    out = np.zeros(grid.cells)
    for axis, w in enumerate(components):
        _check_same_grid(components[0], w)
        h = grid.spacing[axis]
        a = np.moveaxis(w.values, axis, 0)
        d = np.zeros_like(a)
        # transpose of the centered stencil with mirror ghosts
        d[1:] += a[:-1] / (2 * h)
        d[:-1] -= a[1:] / (2 * h)
        d[0] -= a[0] / (2 * h)
        d[-1] += a[-1] / (2 * h)
        out += np.moveaxis(-d, 0, axis)
    return Field(grid, out)


def gradient_magnitude(f: Field) -> Field:
    comps = gradient(f)
    return Field(f.grid, np.sqrt(sum(c.values**2 for c in comps)))


def w1q_distance(f: Field, g: Field, q: float) -> float:
    """W^{1,q} distance as the q-sum of the L^q and gradient-L^q parts."""
    _check_same_grid(f, g)
    if not (1 <= q < INF):
        raise ValueError(f"q must lie in [1, inf), got {q}")
    d = f - g
    vol = f.grid.cell_volume
    return (_lr(d.values, vol, q) ** q + _lr(gradient_magnitude(d).values, vol, q) ** q) ** (1.0 / q)


# --- serialization -----------------------------------------------------------


def write_field(f: Field, path: str | Path) -> Path:
    """Write one row per cell: index per axis, then the value (17 significant digits)."""
    path = Path(path)
    axes = ["i", "j"][: f.grid.dim]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(axes + ["value"])
        for idx in np.ndindex(*f.grid.cells):
            w.writerow([*idx, f"{f.values[idx]:.17g}"])
    return path


def write_header(grid: Grid, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(grid.header(), indent=2) + "\n")
    return path


def read_field(csv_path: str | Path, header_path: str | Path) -> Field:
    hdr = json.loads(Path(header_path).read_text())
    grid = Grid(tuple(hdr["extents"]), tuple(hdr["cells"]))
    values = np.zeros(grid.cells)
    with Path(csv_path).open() as fh:
        rows = csv.reader(fh)
        next(rows)
        for row in rows:
            idx = tuple(int(x) for x in row[: grid.dim])
            values[idx] = float(row[grid.dim])
    return Field(grid, values)
