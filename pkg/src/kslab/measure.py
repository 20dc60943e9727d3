"""Nonnegative Radon measures on the closed box, heat mollification and weak-* gaps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import Field, Grid, _check_same_grid, integrate
from .semigroup import damped_propagate, heat_propagate

# clipped negative mass after mollification, relative to the total mass
CLIP_RTOL = 1e-10


@dataclass(frozen=True)
class Atom:
    location: tuple[float, ...]
    weight: float


@dataclass(frozen=True, eq=False)
class RadonMeasure:
    """Finitely many weighted atoms plus an optional cell-average density."""

    atoms: tuple[Atom, ...] = ()
    density: Field | None = None
    extents: tuple[float, ...] | None = None

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(tuple(np.atleast_1d(a[0]).astype(float)), float(a[1]))
                      for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        extents = self.extents
        if extents is None and self.density is not None:
            extents = self.density.grid.extents
        if extents is None:
            raise ValueError("an atom-only measure needs explicit box extents")
        extents = tuple(float(x) for x in extents)
        object.__setattr__(self, "extents", extents)
        for a in atoms:
            if a.weight < 0 or not math.isfinite(a.weight):
                raise ValueError(f"atom weights must be nonnegative, got {a.weight}")
            if len(a.location) != len(extents):
                raise ValueError(f"atom {a.location} has the wrong dimension")
            if any(not (0.0 <= x <= L) for x, L in zip(a.location, extents)):
                raise ValueError(f"atom {a.location} lies outside the closed box {extents}")
        if self.density is not None:
            if self.density.grid.extents != extents:
                raise ValueError("density grid does not match the measure's box")
            if self.density.min() < 0:
                raise ValueError("density must be nonnegative")
        if not self.total_mass > 0:
            raise ValueError("the measure must be nonzero")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def total_mass(self) -> float:
        m = sum(a.weight for a in self.atoms)
        if self.density is not None:
            m += integrate(self.density)
        return float(m)


@dataclass(frozen=True)
class TestFunction:
    """Cosine polynomial ``sum_c c * prod_i cos(pi k_i x_i / L_i)``.

    Every term has zero normal derivative on the box boundary.
    """

    __test__ = False  # keep pytest from collecting this class

    extents: tuple[float, ...]
    terms: tuple[tuple[float, tuple[int, ...]], ...] = field(default_factory=tuple)

    @classmethod
    def mode(cls, extents: Sequence[float], k: Sequence[int], coef: float = 1.0) -> "TestFunction":
        return cls(tuple(float(x) for x in extents), ((float(coef), tuple(int(i) for i in k)),))

    def __call__(self, *coords) -> np.ndarray:
        coords = [np.asarray(c, dtype=float) for c in coords]
        total = np.zeros(np.broadcast(*coords).shape)
        for c, k in self.terms:
            term = c
            for x, ki, L in zip(coords, k, self.extents):
                term = term * np.cos(np.pi * ki * x / L)
            total = total + term
        return total

    def cell_averages(self, grid: Grid) -> np.ndarray:
        """Exact average of the function over every cell."""
        if grid.extents != self.extents:
            raise ValueError("test function and grid live on different boxes")
        total = np.zeros(grid.cells)
        for c, k in self.terms:
            factors = []
            for axis, ki in enumerate(k):
                x = grid.centers(axis)
                h = grid.spacing[axis]
                a = np.pi * ki / grid.extents[axis]
                factors.append(np.cos(a * x) * np.sinc(a * h / (2 * np.pi)))
            term = factors[0]
            for extra in factors[1:]:
                term = np.multiply.outer(term, extra)
            total += c * term
        return total

    def sup_norm(self) -> float:
        """Sup norm; exact for single modes, sampled on a fine lattice otherwise."""
        if len(self.terms) == 1:
            return abs(self.terms[0][0])
        axes = [np.linspace(0.0, L, 257) for L in self.extents]
        return float(np.abs(self(*np.meshgrid(*axes, indexing="ij"))).max())

    def normalized(self) -> "TestFunction":
        s = self.sup_norm()
        return TestFunction(self.extents, tuple((c / s, k) for c, k in self.terms))


def default_dictionary(extents: Sequence[float], kmax: int = 4) -> list[TestFunction]:
    """All cosine modes with every ``k_i <= kmax``; includes the constant."""
    extents = tuple(float(x) for x in extents)
    return [TestFunction.mode(extents, k) for k in itertools.product(range(kmax + 1), repeat=len(extents))]


def pair(mu: RadonMeasure, phi: TestFunction) -> float:
    """``mu(phi)``: point values at atoms plus the exact integral against the density."""
    total = sum(a.weight * float(phi(*a.location)) for a in mu.atoms)
    if mu.density is not None:
        d = mu.density
        total += float((d.values * phi.cell_averages(d.grid)).sum() * d.grid.cell_volume)
    return float(total)


def deposit(mu: RadonMeasure, grid: Grid) -> Field:
    """Cell-average field carrying each atom's weight in the cell that contains it."""
    if grid.extents != mu.extents:
        raise ValueError("grid does not match the measure's box")
    values = np.zeros(grid.cells)
    for a in mu.atoms:
        values[grid.locate(a.location)] += a.weight / grid.cell_volume
    if mu.density is not None:
        _check_same_grid(mu.density, Field(grid, values))
        values = values + mu.density.values
    return Field(grid, values)


def _clip_negative(f: Field, mass: float) -> Field:
    vals = f.values
    neg = float(-vals[vals < 0].sum() * f.grid.cell_volume)
    if neg == 0.0:
        return f
    if neg > CLIP_RTOL * mass:
        raise ValueError(
            f"mollification undershoot {neg:.3e} exceeds {CLIP_RTOL:g} of the mass; "
            "the grid is too coarse for this eps (refine the grid or increase eps)"
        )
    pos = np.maximum(vals, 0.0)
    return Field(f.grid, pos * (mass / (pos.sum() * f.grid.cell_volume)))


def mollify(mu: RadonMeasure, eps: float, grid: Grid) -> Field:
    """Smooth, mass-preserving, nonnegative approximation ``e^{eps Delta} mu``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    m = mu.total_mass
    return _clip_negative(heat_propagate(deposit(mu, grid), eps), m)


def mollify_v0(v0: Field, eps: float) -> Field:
    """``e^{eps (Delta - 1)} v0``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if v0.min() < 0:
        raise ValueError("v0 must be nonnegative")
    out = damped_propagate(v0, eps)
    # roundoff only; the continuous semigroup is positivity preserving
    return Field(out.grid, np.maximum(out.values, 0.0))


def weak_star_gap(u: Field, mu: RadonMeasure, dictionary: Sequence[TestFunction] | None = None) -> float:
    """``max_phi |int u phi - mu(phi)|`` over sup-normalized test functions."""
    if dictionary is None:
        dictionary = default_dictionary(u.grid.extents)
    if not dictionary:
        raise ValueError("dictionary must not be empty")
    vol = u.grid.cell_volume
    gaps = [abs(float((u.values * phi.cell_averages(u.grid)).sum() * vol) - pair(mu, phi)) for phi in dictionary]
    return max(gaps)


# --- named initial data --------------------------------------------------------


def dirac(extents: Sequence[float], location: Sequence[float], mass: float = 1.0) -> RadonMeasure:
    return RadonMeasure((Atom(tuple(location), mass),), extents=tuple(extents))


def density_profile(grid: Grid, name: str, mass: float = 1.0) -> Field:
    """Named nonnegative densities scaled to the given mass.

    ``uniform``      constant ``mass / |Omega|``.
    ``cosine_bump``  ``1 + 0.5 prod_i cos(pi x_i / L_i)`` (positive, smooth, Neumann compatible).
    """
    if name == "uniform":
        shape = np.ones(grid.cells)
    elif name == "cosine_bump":
        prod = np.ones(grid.cells)
        for axis, x in enumerate(grid.mesh()):
            prod = prod * np.cos(np.pi * x / grid.extents[axis])
        shape = 1.0 + 0.5 * prod
    else:
        raise ValueError(f"unknown density profile {name!r}; expected 'uniform' or 'cosine_bump'")
    shape = shape * (mass / (shape.sum() * grid.cell_volume))
    return Field(grid, shape)


def preset_measure(name: str, grid: Grid, mass: float = 1.0) -> RadonMeasure:
    """Named measures: ``dirac``, ``two_atoms``, ``uniform``, ``cosine_bump``.

    Atoms are placed at cell centers (the center cell, or the cells at 1/4 and
    3/4 of each axis for ``two_atoms``).
    """
    def center_of(fracs):
        idx = tuple(min(int(f * n), n - 1) for f, n in zip(fracs, grid.cells))
        return tuple((i + 0.5) * h for i, h in zip(idx, grid.spacing))

    if name == "dirac":
        return RadonMeasure((Atom(center_of([0.5] * grid.dim), mass),), extents=grid.extents)
    if name == "two_atoms":
        a = Atom(center_of([0.25] * grid.dim), 0.5 * mass)
        b = Atom(center_of([0.75] * grid.dim), 0.5 * mass)
        return RadonMeasure((a, b), extents=grid.extents)
    if name in ("uniform", "cosine_bump"):
        return RadonMeasure(density=density_profile(grid, name, mass))
    raise ValueError(f"unknown measure preset {name!r}; expected dirac, two_atoms, uniform or cosine_bump")
