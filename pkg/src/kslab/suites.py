"""Named verification bundles behind ``kslab verify`` and the canonical desk-scale setups."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import harness
from .domain import INF, Field, Grid, lr_norm
from .measure import RadonMeasure, density_profile, preset_measure
from .model import Sensitivity, sample_admissible, select_exponents, verify_exponent_properties
from .semigroup import damped_propagate, duhamel_solve, heat_propagate, spectral_operator
from .solver import SimConfig, simulate

# 1D rate runs: fine enough that the mollified atom is resolved at eps = 1e-5
RATE_CELLS = 1024
RATE_EPS = 1e-5
RATE_MAX_DT = 2e-5
RATE_WINDOW = (4e-4, 1e-2)


@dataclass
class SuiteReport:
    name: str
    checks: dict[str, dict] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def add(self, key: str, passed: bool, **detail):
        self.checks[key] = {"passed": bool(passed), **detail}

    def as_dict(self) -> dict:
        return harness._jsonable({"suite": self.name, "passed": self.passed, "seconds": self.seconds,
                                  "checks": self.checks})


def smooth_v0(grid: Grid) -> Field:
    """``1 + 0.5 prod_i cos(pi x_i / L_i)``: positive, smooth and Neumann compatible."""
    prod = np.ones(grid.cells)
    for axis, x in enumerate(grid.mesh()):
        prod = prod * np.cos(np.pi * x / grid.extents[axis])
    return Field(grid, 1.0 + 0.5 * prod)


def rate_setup_1d(k_f: float = 1.0, alpha: float = 0.3, t_end: float = RATE_WINDOW[1], max_dt: float = RATE_MAX_DT):
    """Unit Dirac mass at the center of [0, 1] with a smooth signal, for the rate experiments."""
    grid = Grid.interval(1.0, RATE_CELLS)
    cfg = SimConfig(grid, Sensitivity(k_f, alpha), RATE_EPS, t_end, max_dt=max_dt)
    return cfg, preset_measure("dirac", grid), smooth_v0(grid)


def ladder_setup(cells: int = 1024, t_end: float = 0.1):
    """Cosine-bump density with a smooth signal; eps is set per rung."""
    grid = Grid.interval(1.0, cells)
    cfg = SimConfig(grid, Sensitivity(1.0, 0.3), 1e-2, t_end, max_dt=1e-3)
    return cfg, RadonMeasure(density=density_profile(grid, "cosine_bump")), smooth_v0(grid)


# --- bundles -----------------------------------------------------------------------


def interpolation_check(count: int = 500, seed: int = 0, cells: int = 64) -> tuple[bool, float]:
    """Interpolation inequality with the exponent-calculus weight on random nonnegative fields.

    Returns (all hold within 1 + 1e-12, worst ratio lhs / rhs).
    """
    rng = np.random.default_rng(seed)
    grid = Grid.interval(rng.uniform(0.5, 2.0), cells)
    worst = 0.0
    for _ in range(count):
        r = float(rng.uniform(1.2, 12.0)) if rng.random() < 0.9 else INF
        s1 = float(rng.uniform(1.0001, min(r, 50.0) - 1e-4))
        theta = (s1 - 1.0) / ((1.0 - (0.0 if r == INF else 1.0 / r)) * s1)
        f = Field(grid, rng.exponential(size=cells) ** rng.uniform(0.5, 3.0))
        lhs = lr_norm(f, s1)
        rhs = lr_norm(f, 1) ** (1 - theta) * lr_norm(f, r) ** theta
        worst = max(worst, lhs / rhs)
    return worst <= 1.0 + 1e-12, worst


def suite_exponents(count: int = 1000, seed: int = 0) -> SuiteReport:
    rep = SuiteReport("exponents")
    rng = np.random.default_rng(seed)
    failures = []
    for _ in range(count):
        tup = sample_admissible(rng)
        report = verify_exponent_properties(select_exponents(*tup))
        if not all(report.values()):
            failures.append(tup)
    rep.add("random_tuples", not failures, tuples=count, failures=failures[:5])
    sel = select_exponents(2, 0.3, 1.2, 2.0)
    expected = {"delta1": 1 / 6, "delta2": 0.5, "delta3": 1 / 12, "s1": 12 / 7, "s2": 3.0, "s": 12 / 11, "theta": 5 / 6}
    err = max(abs(getattr(sel, k) - v) for k, v in expected.items())
    rep.add("worked_selection", err <= 1e-12, max_error=err)
    ok, worst = interpolation_check()
    rep.add("interpolation", ok, worst_ratio=worst)
    return rep


def suite_semigroup() -> SuiteReport:
    rep = SuiteReport("semigroup")
    grid = Grid.interval(1.0, 256)
    x = grid.centers(0)
    lam = spectral_operator(grid).eigenvalues
    err = 0.0
    for k in (1, 3, 7):
        mode = Field(grid, np.cos(np.pi * k * x))
        for t in (1e-3, 0.1, 1.0):
            exact = np.exp(-lam[k] * t) * mode.values
            err = max(err, float(np.abs(heat_propagate(mode, t).values - exact).max()))
    rep.add("eigenmode_decay", err <= 1e-12, max_error=err)

    rng = np.random.default_rng(1)
    f = Field(grid, rng.standard_normal(grid.cells))
    law = float(np.abs(heat_propagate(heat_propagate(f, 0.013), 0.021).values - heat_propagate(f, 0.034).values).max())
    rep.add("semigroup_law", law <= 1e-12, max_error=law)

    t, c = 1.0, 0.7
    z0 = Field.constant(grid, 0.0)
    const = duhamel_solve(z0, lambda s: Field.constant(grid, c), t, 1024)
    e1 = float(np.abs(const.values - c * (1 - math.exp(-t))).max())
    mode = Field(grid, np.cos(np.pi * x))
    single = duhamel_solve(z0, lambda s: mode, t, 1024)
    coef = -math.expm1(-(1 + lam[1]) * t) / (1 + lam[1])
    e2 = float(np.abs(single.values - coef * mode.values).max())
    rep.add("duhamel_closed_form", max(e1, e2) <= 1e-6, constant_error=e1, mode_error=e2)

    direct = damped_propagate(f, 0.05, method="direct").values
    fast = damped_propagate(f, 0.05).values
    d = float(np.abs(direct - fast).max())
    rep.add("direct_transform_agrees", d <= 1e-12, max_difference=d)
    return rep


def conservation_runs():
    """The three canned conservation runs: 1D Dirac, 1D two atoms, 2D Dirac on 128^2."""
    g1 = Grid.interval(1.0, 1024)
    times1 = tuple(np.geomspace(1e-3, 0.1, 6))
    c1 = SimConfig(g1, Sensitivity(1.0, 0.3), 1e-4, 0.1, output_times=times1)
    g2 = Grid.rectangle(1.0, 1.0, 128, 128)
    c2 = SimConfig(g2, Sensitivity(1.0, 0.3), 1e-3, 0.05, output_times=tuple(np.geomspace(2e-3, 0.05, 6)))
    return [
        ("dirac_1d", c1, preset_measure("dirac", g1), smooth_v0(g1)),
        ("two_atoms_1d", c1, preset_measure("two_atoms", g1), smooth_v0(g1)),
        ("dirac_2d", c2, preset_measure("dirac", g2), smooth_v0(g2)),
    ]


def suite_conservation() -> SuiteReport:
    rep = SuiteReport("conservation")
    for name, cfg, mu0, v0 in conservation_runs():
        traj = simulate(cfg, mu0, v0)
        drift, min_u = traj.max_mass_drift(), min(traj.min_u_series)
        rep.add(name, drift <= 1e-8 and min_u >= -1e-12, mass_drift=drift, min_u=min_u,
                snapshots=len(traj.states), steps=traj.steps)
    return rep


def _add_experiment(rep: SuiteReport, key: str, res: harness.ExperimentResult):
    rep.add(key, res.passed, exponent=res.fit.exponent if res.fit else None, predicted=res.predicted,
            checks=res.checks)


def suite_rates_1d() -> SuiteReport:
    rep = SuiteReport("rates-1d")
    for k_f in (0.0, 1.0):
        cfg, mu0, v0 = rate_setup_1d(k_f)
        res = harness.smoothing_experiment(cfg, mu0, 2.0, v0=v0, window=RATE_WINDOW)
        in_band = -0.30 <= res.fit.exponent <= -0.20
        rep.add(f"smoothing_kf{k_f:g}", res.passed and in_band, exponent=res.fit.exponent,
                sup_scaled_norm=res.info["sup_scaled_norm"])
    cfg, mu0, v0 = rate_setup_1d()
    res = harness.weak_star_experiment(cfg, mu0, v0=v0, window=RATE_WINDOW)
    rep.add("weak_star", res.passed and res.fit.exponent >= 0.4, exponent=res.fit.exponent)
    res = harness.v_continuity_experiment(cfg, mu0, v0, 1.5, window=RATE_WINDOW)
    rep.add("v_continuity", res.passed and res.fit.exponent >= 0.25, exponent=res.fit.exponent)
    _add_experiment(rep, "taxis_integral", harness.taxis_integral_experiment(cfg, mu0, 4.0, v0=v0, window=RATE_WINDOW))
    cfg, mu0, v0 = rate_setup_1d(t_end=1.0, max_dt=1e-3)
    res = harness.gradient_uniformity_check(cfg, mu0, v0, 1.5, q=1.5)
    rep.add("gradient_uniformity", res.passed, sup=res.info["sup"], first_decade_mean=res.info["first_decade_mean"],
            last_decade_mean=res.info["last_decade_mean"])
    return rep


def suite_rates_2d(cells: int = 256) -> SuiteReport:
    """2D smoothing and weak-* rates from a centered Dirac mass (predicted L^2 exponent -1/2)."""
    rep = SuiteReport("rates-2d")
    grid = Grid.rectangle(1.0, 1.0, cells, cells)
    window = (4e-4, 1e-2)
    cfg = SimConfig(grid, Sensitivity(1.0, 0.3), 1e-4, window[1], max_dt=1e-4)
    mu0, v0 = preset_measure("dirac", grid), smooth_v0(grid)
    res = harness.smoothing_experiment(cfg, mu0, 2.0, q=1.5, v0=v0, window=window, samples=12)
    _add_experiment(rep, "smoothing", res)
    res = harness.weak_star_experiment(cfg, mu0, v0=v0, window=window, samples=12)
    _add_experiment(rep, "weak_star", res)
    return rep


SUITES = {
    "exponents": suite_exponents,
    "semigroup": suite_semigroup,
    "conservation": suite_conservation,
    "rates-1d": suite_rates_1d,
    "rates-2d": suite_rates_2d,
}


def run_suite(name: str) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; available suites: {', '.join(SUITES)}")
    start = time.perf_counter()
    rep = SUITES[name]()
    rep.seconds = time.perf_counter() - start
    return rep


def ladder_run(eps_list=(1e-2, 1e-3, 1e-4)):
    cfg, mu0, v0 = ladder_setup()
    return harness.eps_ladder(replace(cfg, eps=eps_list[0]), mu0, v0, eps_list)
