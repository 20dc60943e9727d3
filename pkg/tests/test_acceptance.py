"""Acceptance criteria 1-11, one test each.

Each test prints a single ``[PASS]``/``[FAIL]`` line (visible even with output
capture) and then asserts the criterion at its stated tolerance and runtime.
"""

import math
import time

import numpy as np
import pytest

from kslab import harness
from kslab.domain import Field, Grid, lr_norm
from kslab.model import sample_admissible, select_exponents, verify_exponent_properties
from kslab.semigroup import duhamel_solve, heat_propagate, spectral_operator
from kslab.solver import simulate
from kslab.suites import RATE_WINDOW, conservation_runs, ladder_setup, rate_setup_1d


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, passed: bool, detail: str, seconds: float):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail} ({seconds:.2f} s)")
    return emit


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def test_c01_exponent_calculus(report):
    with Timer() as tm:
        rng = np.random.default_rng(20240601)
        bad = 0
        for _ in range(1000):
            if not all(verify_exponent_properties(select_exponents(*sample_admissible(rng))).values()):
                bad += 1
    ok = bad == 0 and tm.seconds < 1.0
    report(1, "exponent calculus", ok, f"{1000 - bad}/1000 tuples pass", tm.seconds)
    assert bad == 0
    assert tm.seconds < 1.0


def test_c02_worked_selection(report):
    with Timer() as tm:
        sel = select_exponents(2, 0.3, 1.2, 2.0)
        got = (sel.delta1, sel.delta2, sel.delta3, sel.s1, sel.s2, sel.s, sel.theta)
        want = (1 / 6, 1 / 2, 1 / 12, 12 / 7, 3, 12 / 11, 5 / 6)
        err = max(abs(a - b) for a, b in zip(got, want))
    report(2, "worked selection", err <= 1e-12, f"max error {err:.1e}", tm.seconds)
    assert err <= 1e-12


def test_c03_semigroup_exactness(report):
    with Timer() as tm:
        grid = Grid.interval(1.0, 512)
        x = grid.centers(0)
        lam = spectral_operator(grid).eigenvalues
        mode_err = 0.0
        for k in (1, 2, 5, 11):
            mode = Field(grid, np.cos(np.pi * k * x))
            for t in (1e-4, 1e-2, 0.5):
                mode_err = max(mode_err, float(np.abs(heat_propagate(mode, t).values
                                                      - math.exp(-lam[k] * t) * mode.values).max()))
        f = Field(grid, np.random.default_rng(3).standard_normal(512))
        law_err = float(np.abs(heat_propagate(heat_propagate(f, 0.02), 0.03).values
                               - heat_propagate(f, 0.05).values).max())
        zero = Field.constant(grid, 0.0)
        const = duhamel_solve(zero, lambda s: Field.constant(grid, 1.3), 1.0, 1024)
        d1 = float(np.abs(const.values - 1.3 * (1 - math.exp(-1.0))).max())
        mode = Field(grid, np.cos(np.pi * x))
        single = duhamel_solve(zero, lambda s: mode, 1.0, 1024)
        c = (1 - math.exp(-(1 + lam[1]))) / (1 + lam[1])
        d2 = float(np.abs(single.values - c * mode.values).max())
    ok = mode_err <= 1e-12 and law_err <= 1e-12 and max(d1, d2) <= 1e-6 and tm.seconds < 5
    report(3, "semigroup exactness", ok,
           f"mode {mode_err:.1e}, law {law_err:.1e}, Duhamel {max(d1, d2):.1e}", tm.seconds)
    assert mode_err <= 1e-12 and law_err <= 1e-12
    assert max(d1, d2) <= 1e-6
    assert tm.seconds < 5


def test_c04_conservation_positivity(report):
    with Timer() as tm:
        drift, min_u = [], []
        for name, cfg, mu0, v0 in conservation_runs():
            traj = simulate(cfg, mu0, v0)
            drift.append(traj.max_mass_drift())
            min_u.append(min(traj.min_u_series))
    ok = max(drift) <= 1e-8 and min(min_u) >= -1e-12 and tm.seconds < 120
    report(4, "conservation and positivity", ok, f"max drift {max(drift):.1e}, min u {min(min_u):.1e}", tm.seconds)
    assert max(drift) <= 1e-8
    assert min(min_u) >= -1e-12
    assert tm.seconds < 120


def test_c05_smoothing_rate(report):
    with Timer() as tm:
        results = {}
        for k_f in (0.0, 1.0):
            cfg, mu0, v0 = rate_setup_1d(k_f)
            results[k_f] = harness.smoothing_experiment(cfg, mu0, 2.0, v0=v0, window=RATE_WINDOW)
    exps = {k: r.fit.exponent for k, r in results.items()}
    sups = {k: r.info["sup_scaled_norm"] for k, r in results.items()}
    ok = all(-0.30 <= e <= -0.20 for e in exps.values()) and all(map(math.isfinite, sups.values())) \
        and tm.seconds < 60
    report(5, "smoothing rate", ok,
           ", ".join(f"k_f={k:g}: slope {exps[k]:.4f}, sup t^1/4 |u|_2 = {sups[k]:.4f}" for k in exps), tm.seconds)
    for e in exps.values():
        assert -0.30 <= e <= -0.20
    assert all(map(math.isfinite, sups.values()))
    assert tm.seconds < 60


def test_c06_weak_star(report):
    with Timer() as tm:
        cfg, mu0, v0 = rate_setup_1d(1.0)
        res = harness.weak_star_experiment(cfg, mu0, v0=v0, window=RATE_WINDOW)
    decreasing = res.checks["monotone_to_zero"]
    ok = decreasing and res.fit.exponent >= 0.4 and tm.seconds < 60
    report(6, "weak-* continuity", ok, f"slope {res.fit.exponent:.4f}, decreasing as t -> 0: {decreasing}",
           tm.seconds)
    assert decreasing
    assert res.fit.exponent >= 0.4
    assert tm.seconds < 60


def test_c07_signal_continuity(report):
    with Timer() as tm:
        cfg, mu0, v0 = rate_setup_1d(1.0)
        res = harness.v_continuity_experiment(cfg, mu0, v0, 1.5, window=RATE_WINDOW)
    decays = res.checks["monotone_to_floor"]
    ok = decays and res.fit.exponent >= 0.25 and tm.seconds < 60
    report(7, "signal continuity", ok, f"slope {res.fit.exponent:.4f} (slowest predicted 1/3)", tm.seconds)
    assert decays
    assert res.fit.exponent >= 0.25
    assert tm.seconds < 60


def test_c08_taxis_integral(report):
    with Timer() as tm:
        cfg, mu0, v0 = rate_setup_1d(1.0, alpha=0.3)
        res = harness.taxis_integral_experiment(cfg, mu0, 4.0, v0=v0, window=RATE_WINDOW)
    ok = res.fit.exponent >= 0.525 and tm.seconds < 60
    report(8, "taxis integral", ok, f"slope {res.fit.exponent:.4f} (bound 0.625)", tm.seconds)
    assert res.fit.exponent >= 0.525
    assert tm.seconds < 60


def test_c09_gradient_uniformity(report):
    with Timer() as tm:
        cfg, mu0, v0 = rate_setup_1d(1.0, t_end=1.0, max_dt=1e-3)
        res = harness.gradient_uniformity_check(cfg, mu0, v0, 1.5, q=1.5, window=(1e-4, 1.0))
    info = res.info
    ok = math.isfinite(info["sup"]) and info["last_decade_mean"] <= 2 * info["first_decade_mean"] \
        and tm.seconds < 60
    report(9, "gradient uniformity", ok,
           f"sup {info['sup']:.4f}, first decade {info['first_decade_mean']:.4f}, "
           f"last decade {info['last_decade_mean']:.4f}", tm.seconds)
    assert math.isfinite(info["sup"])
    assert info["last_decade_mean"] <= 2 * info["first_decade_mean"]
    assert tm.seconds < 60


def test_c10_interpolation_holder(report):
    with Timer() as tm:
        rng = np.random.default_rng(99)
        grid = Grid.interval(1.0, 128)
        worst_interp = worst_holder = 0.0
        for _ in range(500):
            f = Field(grid, rng.exponential(size=128) ** rng.uniform(0.3, 3.0))
            r = float(rng.uniform(1.1, 20.0))
            s1 = float(rng.uniform(1.0 + 1e-6, r))
            theta = (s1 - 1) / ((1 - 1 / r) * s1)
            rhs = lr_norm(f, 1) ** (1 - theta) * lr_norm(f, r) ** theta
            worst_interp = max(worst_interp, lr_norm(f, s1) / rhs)
            g = Field(grid, rng.exponential(size=128))
            p = float(rng.uniform(1.01, 10.0))
            worst_holder = max(worst_holder, lr_norm(f * g, 1) / (lr_norm(f, p) * lr_norm(g, p / (p - 1))))
    ok = worst_interp <= 1 + 1e-12 and worst_holder <= 1 + 1e-12 and tm.seconds < 5
    report(10, "interpolation and Hoelder", ok,
           f"worst ratios {worst_interp:.6f} (interpolation), {worst_holder:.6f} (Hoelder)", tm.seconds)
    assert worst_interp <= 1 + 1e-12
    assert worst_holder <= 1 + 1e-12
    assert tm.seconds < 5


def test_c11_eps_ladder(report):
    with Timer() as tm:
        cfg, mu0, v0 = ladder_setup()
        res = harness.eps_ladder(cfg, mu0, v0, [1e-2, 1e-3, 1e-4])
    strict = all(b < a for a, b in zip(res.u_l1, res.u_l1[1:])) and all(b < a for a, b in zip(res.v_w1q, res.v_w1q[1:]))
    ok = res.passed and strict and tm.seconds < 120
    report(11, "eps ladder", ok,
           f"u L1 {[f'{d:.3e}' for d in res.u_l1]}, v W1q {[f'{d:.3e}' for d in res.v_w1q]}", tm.seconds)
    assert res.passed and strict
    assert tm.seconds < 120
