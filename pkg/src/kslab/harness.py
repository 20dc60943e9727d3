"""Experiment drivers: log-log rate fits of norms along simulated trajectories.

Every experiment returns an :class:`ExperimentResult` holding the sampled
series, the fit, the predicted exponent and a dict of named checks.  The
solver invariants (mass, positivity) are re-checked on every trajectory.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .domain import INF, Field, gradient_magnitude, lr_norm, w1q_distance
from .measure import RadonMeasure, TestFunction, default_dictionary, mollify_v0, weak_star_gap
from .model import (
    alpha_clamp,
    lr_decay_exponent,
    select_gamma,
    signal_exponent,
    taxis_exponent,
)
from .solver import POSITIVITY_TOL, SimConfig, SimState, Trajectory, simulate

CALIBRATION_SLACK = 0.05
CHEMOTACTIC_SLACK = 0.1
LADDER_NOISE = 0.2
DEFAULT_SAMPLES = 20


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    samples: int


def fit_decay_rate(times: Sequence[float], values: Sequence[float]) -> RateFit:
    """Ordinary least squares of ``log(value)`` on ``log(t)``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-D sequences of equal length")
    if t.size < 5:
        raise ValueError(f"need at least 5 samples, got {t.size}")
    if np.any(t <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("times and values must be positive and finite")
    if not t.min() < t.max():
        raise ValueError("times must span a nondegenerate window")
    x, ly = np.log(t), np.log(y)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * x + icpt)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    r2 = 1.0 if ss_tot == 0.0 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return RateFit(float(slope), float(icpt), r2, (float(t.min()), float(t.max())), int(t.size))


@dataclass
class ExperimentResult:
    name: str
    times: np.ndarray
    values: np.ndarray
    fit: RateFit | None
    predicted: float | None
    checks: dict[str, bool] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> dict:
        return {
            "name": self.name,
            "fit": asdict(self.fit) if self.fit is not None else None,
            "predicted_exponent": self.predicted,
            "checks": dict(self.checks),
            "passed": self.passed,
            "info": _jsonable(self.info),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def log_times(t_min: float, t_max: float, samples: int = DEFAULT_SAMPLES) -> tuple[float, ...]:
    if not 0 < t_min < t_max:
        raise ValueError(f"need 0 < t_min < t_max, got ({t_min}, {t_max})")
    return tuple(float(t) for t in np.geomspace(t_min, t_max, samples))


def default_window(cfg: SimConfig) -> tuple[float, float]:
    """``[4 eps, 0.1]``: below 4 eps the mollifier dominates, above 0.1 the relaxation of v does."""
    return (4.0 * cfg.eps, 0.1)


def _run(cfg: SimConfig, mu0: RadonMeasure, v0: Field | None, window, samples, observer=None):
    times = log_times(*(window or default_window(cfg)), samples)
    run_cfg = replace(cfg, t_end=times[-1], output_times=times)
    if v0 is None:
        v0 = Field.constant(cfg.grid, 0.0)
    traj = simulate(run_cfg, mu0, v0, observer)
    return np.array(times), traj


def _invariant_checks(traj: Trajectory) -> dict[str, bool]:
    return {
        "mass_conserved": traj.max_mass_drift() <= 1e-8,
        "u_nonnegative": min(traj.min_u_series) >= -POSITIVITY_TOL,
        "v_nonnegative": min(traj.min_v_series) >= -POSITIVITY_TOL,
    }


def _nondecreasing(values: np.ndarray, rtol: float = 1e-9) -> bool:
    return bool(np.all(np.diff(values) >= -rtol * np.abs(values[1:])))


def smoothing_experiment(
    cfg: SimConfig,
    mu0: RadonMeasure,
    r: float,
    *,
    q: float = 1.5,
    v0: Field | None = None,
    window: tuple[float, float] | None = None,
    samples: int = DEFAULT_SAMPLES,
) -> ExperimentResult:
    """Decay of ``||u(t)||_{L^r}`` from measure data against ``t^{-(n/2)(1-1/gamma)}``."""
    n = cfg.grid.dim
    gamma = select_gamma(n, cfg.sens.alpha, q, r)
    predicted = lr_decay_exponent(n, gamma)
    times, traj = _run(cfg, mu0, v0, window, samples)
    norms = np.array([lr_norm(s.u, r) for s in traj.states])
    fit = fit_decay_rate(times, norms)
    scaled = times ** (-predicted) * norms
    sup_scaled = float(scaled.max())
    slack = CALIBRATION_SLACK if cfg.sens.k_f == 0 else CHEMOTACTIC_SLACK
    checks = _invariant_checks(traj)
    checks["bounded"] = math.isfinite(sup_scaled)
    checks["rate_bound"] = fit.exponent >= predicted - slack
    return ExperimentResult(
        "smoothing", times, norms, fit, predicted, checks,
        {"r": r, "gamma": gamma, "q": q, "k_f": cfg.sens.k_f, "sup_scaled_norm": sup_scaled, "slack": slack,
         "steps": traj.steps},
    )


def weak_star_experiment(
    cfg: SimConfig,
    mu0: RadonMeasure,
    dictionary: Sequence[TestFunction] | None = None,
    *,
    r: float = INF,
    v0: Field | None = None,
    window: tuple[float, float] | None = None,
    samples: int = DEFAULT_SAMPLES,
) -> ExperimentResult:
    """Weak-* gap ``max_phi |int u(t) phi - mu0(phi)|`` as ``t`` decreases to 0."""
    n = cfg.grid.dim
    if dictionary is None:
        dictionary = default_dictionary(cfg.grid.extents)
    predicted = taxis_exponent(n, r)
    times, traj = _run(cfg, mu0, v0, window, samples)
    gaps = np.array([weak_star_gap(s.u, mu0, dictionary) for s in traj.states])
    checks = _invariant_checks(traj)
    floor = 1e-13 * mu0.total_mass
    if np.all(gaps <= floor):
        fit = None
        checks["vanishing_gap"] = True
    else:
        fit = fit_decay_rate(times, np.maximum(gaps, floor))
        checks["monotone_to_zero"] = _nondecreasing(gaps)
        checks["rate_bound"] = fit.exponent >= predicted - CHEMOTACTIC_SLACK
    return ExperimentResult("weak_star", times, gaps, fit, predicted, checks,
                            {"r": r, "dictionary_size": len(dictionary), "steps": traj.steps})


def v_continuity_experiment(
    cfg: SimConfig,
    mu0: RadonMeasure,
    v0: Field,
    q: float,
    *,
    window: tuple[float, float] | None = None,
    samples: int = DEFAULT_SAMPLES,
) -> ExperimentResult:
    """``||v(t) - v0||_{W^{1,q}}`` against the slowest predicted power ``1/2 - (n/2)(1 - 1/q)``."""
    n = cfg.grid.dim
    predicted = signal_exponent(n, q)
    times, traj = _run(cfg, mu0, v0, window, samples)
    dist = np.array([w1q_distance(s.v, v0, q) for s in traj.states])
    floor = w1q_distance(mollify_v0(v0, cfg.eps), v0, q)
    checks = _invariant_checks(traj)
    if np.all(dist <= 1e-12 * max(1.0, v0.max())):
        # stationary data: nothing to fit
        fit = None
        checks["vanishing_distance"] = True
    else:
        checks["monotone_to_floor"] = _nondecreasing(dist)
        checks["above_floor"] = bool(dist[0] >= floor)
        fit = fit_decay_rate(times, dist)
        checks["rate_bound"] = fit.exponent >= predicted - CHEMOTACTIC_SLACK
    return ExperimentResult("v_continuity", times, dist, fit, predicted, checks,
                            {"q": q, "mollification_floor": floor, "steps": traj.steps})


def taxis_integrand(state: SimState, exponent: float) -> float:
    """``|| u |grad v|^exponent ||_{L^1}``."""
    g = gradient_magnitude(state.v).values
    return float((state.u.values * g**exponent).sum() * state.u.grid.cell_volume)


def taxis_integral_experiment(
    cfg: SimConfig,
    mu0: RadonMeasure,
    r: float,
    *,
    v0: Field | None = None,
    window: tuple[float, float] | None = None,
    samples: int = DEFAULT_SAMPLES,
) -> ExperimentResult:
    """Growth of ``int_0^t ||u |grad v|^{1-2 alpha}||_{L^1}`` (trapezoid along the steps)."""
    n = cfg.grid.dim
    a = alpha_clamp(cfg.sens.alpha)
    power = 1.0 - 2.0 * a
    predicted = taxis_exponent(n, r)
    acc = {"I": 0.0, "by_time": {}}

    def observe(prev: SimState, new: SimState):
        acc["I"] += 0.5 * (new.t - prev.t) * (taxis_integrand(prev, power) + taxis_integrand(new, power))
        acc["by_time"][new.t] = acc["I"]

    times, traj = _run(cfg, mu0, v0, window, samples, observe)
    integral = np.array([acc["by_time"][s.t] for s in traj.states])
    fit = fit_decay_rate(times, integral)
    checks = _invariant_checks(traj)
    checks["rate_bound"] = fit.exponent >= predicted - CHEMOTACTIC_SLACK
    return ExperimentResult("taxis_integral", times, integral, fit, predicted, checks,
                            {"r": r, "alpha_eff": a, "power": power, "steps": traj.steps})


def _lp(values: np.ndarray, vol: float, p: float) -> float:
    # also the quasi-norm for 0 < p < 1
    if p == INF:
        return float(np.abs(values).max())
    return float(np.sum(np.abs(values) ** p) * vol) ** (1.0 / p)


def gradient_uniformity_check(
    cfg: SimConfig,
    mu0: RadonMeasure,
    v0: Field,
    p: float,
    *,
    q: float | None = None,
    window: tuple[float, float] = (1e-4, 1.0),
    samples: int = 41,
) -> ExperimentResult:
    """``sup_t ||grad v(t)||_{L^p}`` and a no-growth test comparing the first and last decade.

    The no-growth test is only asserted when ``p <= q``.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    times, traj = _run(cfg, mu0, v0, window, samples)
    vol = cfg.grid.cell_volume
    norms = np.array([_lp(gradient_magnitude(s.v).values, vol, p) for s in traj.states])
    t0 = times[0]
    first = norms[times <= 10 * t0 * (1 + 1e-12)]
    last = norms[times >= times[-1] / 10 * (1 - 1e-12)]
    first_mean, last_mean = float(first.mean()), float(last.mean())
    checks = _invariant_checks(traj)
    checks["finite"] = bool(np.all(np.isfinite(norms)))
    asserted = q is None or p <= q
    if asserted:
        checks["no_growth"] = last_mean <= 2.0 * first_mean
    return ExperimentResult("gradient_uniformity", times, norms, None, None, checks,
                            {"p": p, "q": q, "sup": float(norms.max()), "first_decade_mean": first_mean,
                             "last_decade_mean": last_mean, "asserted": asserted, "steps": traj.steps})


# --- epsilon ladder ----------------------------------------------------------------


def worker_count(jobs: int) -> int:
    cap = os.environ.get("KSLAB_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(jobs, limit))


def map_parallel(func: Callable, items: Sequence) -> list:
    """Order-preserving map over a process pool capped by ``KSLAB_THREADS``."""
    workers = worker_count(len(items))
    if workers == 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _final_state(args) -> SimState:
    cfg, mu0, v0 = args
    traj = simulate(replace(cfg, output_times=(cfg.t_end,)), mu0, v0)
    return traj.states[-1]


@dataclass
class LadderResult:
    eps: list[float]
    u_l1: list[float]
    v_w1q: list[float]
    checks: dict[str, bool]
    q: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [(self.eps[k], self.eps[k + 1], self.u_l1[k], self.v_w1q[k]) for k in range(len(self.u_l1))]


def _decreasing_within(d: Sequence[float], noise: float) -> bool:
    return all(d[k + 1] < (1.0 + noise) * d[k] for k in range(len(d) - 1))


def eps_ladder(cfg: SimConfig, mu0: RadonMeasure, v0: Field, eps_list: Sequence[float], q: float = 1.5) -> LadderResult:
    """Distances at ``t_end`` between consecutive regularizations.

    Consecutive ``u`` distances in L^1 and ``v`` distances in W^{1,q} must
    shrink along the ladder, up to ``LADDER_NOISE`` relative noise.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must hold at least two strictly decreasing values")
    finals = map_parallel(_final_state, [(replace(cfg, eps=e), mu0, v0) for e in eps_list])
    u_d = [lr_norm(b.u - a.u, 1) for a, b in zip(finals, finals[1:])]
    v_d = [w1q_distance(b.v, a.v, q) for a, b in zip(finals, finals[1:])]
    checks = {
        "u_l1_decreasing": _decreasing_within(u_d, LADDER_NOISE),
        "v_w1q_decreasing": _decreasing_within(v_d, LADDER_NOISE),
    }
    return LadderResult(eps_list, u_d, v_d, checks, q)


# --- output --------------------------------------------------------------------------


def loglog_svg(times, values, title: str, fit: RateFit | None = None, width: int = 480, height: int = 320) -> str:
    """Minimal log-log line plot with an optional fitted power law overlay."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = (t > 0) & (y > 0)
    t, y = t[keep], y[keep]
    pad = 48
    if t.size == 0:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"><text x="10" y="20">{title}: no positive data</text></svg>\n'
    lx, ly = np.log10(t), np.log10(y)
    x0, x1 = lx.min(), lx.max() if lx.max() > lx.min() else lx.min() + 1
    y0, y1 = ly.min(), ly.max() if ly.max() > ly.min() else ly.min() + 1

    def px(a):
        return pad + (a - x0) / (x1 - x0) * (width - 2 * pad)

    def py(b):
        return height - pad - (b - y0) / (y1 - y0) * (height - 2 * pad)

    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(lx, ly))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{pad}" y="20" font-size="13" font-family="sans-serif">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{pad}" y="{height - pad + 16}" font-size="10">1e{x0:.2f}</text>',
        f'<text x="{width - pad - 40}" y="{height - pad + 16}" font-size="10">1e{x1:.2f}</text>',
        f'<text x="4" y="{height - pad}" font-size="10">1e{y0:.2f}</text>',
        f'<text x="4" y="{pad + 4}" font-size="10">1e{y1:.2f}</text>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{pts}"/>',
    ]
    if fit is not None:
        a, b = x0, x1
        ya = (fit.exponent * a * np.log(10) + fit.intercept) / np.log(10)
        yb = (fit.exponent * b * np.log(10) + fit.intercept) / np.log(10)
        parts.append(f'<line x1="{px(a):.2f}" y1="{py(ya):.2f}" x2="{px(b):.2f}" y2="{py(yb):.2f}" '
                     f'stroke="firebrick" stroke-dasharray="4 3"/>')
        parts.append(f'<text x="{width - pad - 150}" y="20" font-size="11">slope {fit.exponent:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_experiment(result: ExperimentResult, outdir: str | Path, svg: bool = True) -> list[Path]:
    """Emit ``<name>.csv`` (t, value), ``<name>.json`` and optionally ``<name>.svg``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{result.name}.csv"
    with csv_path.open("w") as fh:
        fh.write("t,value\n")
        for t, y in zip(result.times, result.values):
            fh.write(f"{t:.17g},{y:.17g}\n")
    json_path = outdir / f"{result.name}.json"
    json_path.write_text(json.dumps(result.summary(), indent=2, sort_keys=True) + "\n")
    paths = [csv_path, json_path]
    if svg:
        svg_path = outdir / f"{result.name}.svg"
        svg_path.write_text(loglog_svg(result.times, result.values, result.name, result.fit))
        paths.append(svg_path)
    return paths


def write_ladder(result: LadderResult, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / "eps_ladder.csv"
    with csv_path.open("w") as fh:
        fh.write("eps_a,eps_b,u_l1,v_w1q\n")
        for row in result.rows():
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    json_path = outdir / "eps_ladder.json"
    json_path.write_text(json.dumps(_jsonable({"eps": result.eps, "u_l1": result.u_l1, "v_w1q": result.v_w1q,
                                               "q": result.q, "checks": result.checks, "passed": result.passed}),
                                    indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]
