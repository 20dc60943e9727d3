"""Time integration of the epsilon-regularized flux-limited system.

One step of size ``dt``:

1. explicit first-order upwind update of ``u`` by the chemotactic face fluxes
   (conservative; nonnegative under the CFL bound),
2. exact diffusion of ``u`` through the cosine transform of the 3-point Neumann
   Laplacian,
3. exact damped propagation of ``v`` plus the source ``u/(1+eps u)`` frozen over
   the step (average of both end values) and integrated in closed form.

Steps 2 and 3 are positivity preserving for every ``dt``; only step 1
constrains the step size.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import Field, Grid, gradient, integrate
from .measure import RadonMeasure, mollify, mollify_v0
from .model import Sensitivity, alpha_threshold
from .semigroup import apply_multiplier, spectral_operator

log = logging.getLogger(__name__)

DT_FLOOR = 1e-12
POSITIVITY_TOL = 1e-12
MASS_RTOL = 1e-10


class InvariantViolation(RuntimeError):
    def __init__(self, t: float, min_u: float, min_v: float, mass_drift: float, what: str):
        self.t, self.min_u, self.min_v, self.mass_drift = t, min_u, min_v, mass_drift
        super().__init__(f"{what} at t={t:.6g}: min u={min_u:.3e}, min v={min_v:.3e}, relative mass drift={mass_drift:.3e}")


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    sens: Sensitivity
    eps: float
    t_end: float
    dt_safety: float = 0.5
    output_times: tuple[float, ...] = ()
    max_dt: float = math.inf

    def __post_init__(self):
        if not (0 < self.eps < 1):
            raise ValueError("eps must lie in (0,1)")
        if not (0 < self.dt_safety <= 1):
            raise ValueError("dt_safety must lie in (0,1]")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.max_dt > 0:
            raise ValueError("max_dt must be positive")
        times = tuple(sorted(float(t) for t in self.output_times))
        if any(t < 0 or t > self.t_end for t in times):
            raise ValueError(f"output times must lie in [0, t_end={self.t_end}]")
        object.__setattr__(self, "output_times", times)


@dataclass(frozen=True)
class SimState:
    t: float
    u: Field
    v: Field


def _face_velocities(v: np.ndarray, grid: Grid, sens: Sensitivity) -> list[np.ndarray]:
    """Drift velocity ``f(|grad v|^2) d_n v`` on interior faces, one array per axis."""
    vf = Field(grid, v)
    cell_grad = [g.values for g in gradient(vf)] if grid.dim > 1 else None
    out = []
    for axis in range(grid.dim):
        h = grid.spacing[axis]
        gn = np.diff(v, axis=axis) / h
        xi = gn**2
        if cell_grad is not None:
            for other in range(grid.dim):
                if other == axis:
                    continue
                g = cell_grad[other]
                lo = [slice(None)] * grid.dim
                hi = [slice(None)] * grid.dim
                lo[axis] = slice(None, -1)
                hi[axis] = slice(1, None)
                xi = xi + (0.5 * (g[tuple(lo)] + g[tuple(hi)])) ** 2
        out.append(sens(xi) * gn)
    return out


def _upwind_fluxes(u: np.ndarray, velocities: list[np.ndarray], grid: Grid) -> list[np.ndarray]:
    fluxes = []
    for axis, w in enumerate(velocities):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        upwind = np.where(w > 0, u[tuple(lo)], u[tuple(hi)])
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        # zero flux through the boundary faces
        fluxes.append(np.pad(w * upwind, pad))
    return fluxes


def chemotactic_flux(u: Field, v: Field, sens: Sensitivity) -> tuple[np.ndarray, ...]:
    """Face fluxes ``u f(|grad v|^2) grad v . e_axis`` with upwinded ``u``.

    Each array has ``N+1`` entries along its axis (all faces); the two
    boundary faces are zero.
    """
    if u.grid != v.grid:
        raise ValueError("u and v must share a grid")
    return tuple(_upwind_fluxes(u.values, _face_velocities(v.values, v.grid, sens), u.grid))


def _cfl(v: np.ndarray, cfg: SimConfig) -> float:
    grid = cfg.grid
    limit = math.inf
    for axis, w in enumerate(_face_velocities(v, grid, cfg.sens)):
        wmax = float(np.abs(w).max()) if w.size else 0.0
        if wmax > 0:
            limit = min(limit, grid.spacing[axis] / (2 * grid.dim * wmax))
    return limit * cfg.dt_safety


def cfl_limit(state: SimState, cfg: SimConfig) -> float:
    """Largest admissible explicit step, capped at the remaining time and floored at ``DT_FLOOR``."""
    return max(min(_cfl(state.v.values, cfg), cfg.t_end - state.t), DT_FLOOR)


class _Stepper:
    """Precomputed spectral multipliers for one grid; steps operate on raw arrays."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.lam = spectral_operator(cfg.grid, "stencil").eigenvalues
        self._cache_dt = None

    def _multipliers(self, dt: float):
        if self._cache_dt != dt:
            lam = self.lam
            self._heat = np.exp(-lam * dt)
            self._damp = np.exp(-(1.0 + lam) * dt)
            # int_0^dt e^{-(1+lam) s} ds
            self._phi = -np.expm1(-(1.0 + lam) * dt) / (1.0 + lam)
            self._cache_dt = dt
        return self._heat, self._damp, self._phi

    def source(self, u: np.ndarray) -> np.ndarray:
        return u / (1.0 + self.cfg.eps * u)

    def advance(self, u: np.ndarray, v: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
        grid = self.cfg.grid
        heat, damp, phi = self._multipliers(dt)
        if self.cfg.sens.k_f > 0:
            fluxes = _upwind_fluxes(u, _face_velocities(v, grid, self.cfg.sens), grid)
            div = sum(np.diff(F, axis=a) / grid.spacing[a] for a, F in enumerate(fluxes))
            u_adv = u - dt * div
        else:
            u_adv = u
        u_new = apply_multiplier(u_adv, heat)
        s = 0.5 * (self.source(u) + self.source(u_new))
        v_new = apply_multiplier(v, damp) + apply_multiplier(s, phi)
        return u_new, v_new


def step(state: SimState, cfg: SimConfig, dt: float) -> SimState:
    limit = cfl_limit(state, cfg)
    if not (0 < dt <= limit * (1 + 1e-12)):
        raise ValueError(f"dt={dt:.6g} violates the step limit {limit:.6g}")
    u, v = _Stepper(cfg).advance(state.u.values, state.v.values, dt)
    return SimState(state.t + dt, Field(cfg.grid, u), Field(cfg.grid, v))


@dataclass
class Trajectory:
    states: list[SimState]
    mass: float
    steps: int = 0
    mass_series: list[float] = field(default_factory=list)
    min_u_series: list[float] = field(default_factory=list)
    min_v_series: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def max_mass_drift(self) -> float:
        return max((abs(m - self.mass) / self.mass for m in self.mass_series), default=0.0)


def check_state(state: SimState, mass: float) -> tuple[float, float, float]:
    """Return (min u, min v, relative mass drift); raise InvariantViolation on failure."""
    min_u, min_v = state.u.min(), state.v.min()
    drift = abs(integrate(state.u) - mass) / mass
    if min_u < -POSITIVITY_TOL or min_v < -POSITIVITY_TOL:
        raise InvariantViolation(state.t, min_u, min_v, drift, "positivity lost")
    if drift > MASS_RTOL:
        raise InvariantViolation(state.t, min_u, min_v, drift, "mass drift")
    return min_u, min_v, drift


Observer = Callable[[SimState, SimState], None]


def initial_state(cfg: SimConfig, mu0: RadonMeasure, v0: Field) -> SimState:
    if v0.grid != cfg.grid:
        raise ValueError("v0 must live on the simulation grid")
    return SimState(0.0, mollify(mu0, cfg.eps, cfg.grid), mollify_v0(v0, cfg.eps))


def simulate(cfg: SimConfig, mu0: RadonMeasure, v0: Field, observer: Observer | None = None) -> Trajectory:
    """Run from the mollified data to ``cfg.t_end``, recording at ``cfg.output_times``.

    ``observer(prev, new)`` is called after every step.
    """
    n = cfg.grid.dim
    if not cfg.sens.alpha > alpha_threshold(n):
        warnings.warn(f"alpha={cfg.sens.alpha} is not above the threshold {alpha_threshold(n):g} for n={n}")
    state = initial_state(cfg, mu0, v0)
    mass = integrate(state.u)
    traj = Trajectory([], mass)
    stepper = _Stepper(cfg)
    pending = list(cfg.output_times) or [cfg.t_end]

    def record(s: SimState):
        min_u, min_v, _ = check_state(s, mass)
        traj.states.append(s)
        traj.mass_series.append(integrate(s.u))
        traj.min_u_series.append(min_u)
        traj.min_v_series.append(min_v)

    while pending and pending[0] <= 0.0:
        pending.pop(0)
        record(state)
    u, v, t = state.u.values, state.v.values, 0.0
    while pending:
        target = pending[0]
        dt = min(_cfl(v, cfg), cfg.max_dt, target - t)
        dt = max(dt, DT_FLOOR)
        u_new, v_new = stepper.advance(u, v, dt)
        t_new = target if target - t <= dt * (1 + 1e-12) else t + dt
        traj.steps += 1
        if observer is not None:
            observer(SimState(t, Field(cfg.grid, u), Field(cfg.grid, v)), SimState(t_new, Field(cfg.grid, u_new), Field(cfg.grid, v_new)))
        u, v, t = u_new, v_new, t_new
        while pending and pending[0] <= t:
            pending.pop(0)
            record(SimState(t, Field(cfg.grid, u), Field(cfg.grid, v)))
    log.debug("simulate: %d steps to t=%g", traj.steps, t)
    return traj
