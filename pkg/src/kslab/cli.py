"""``kslab`` command line: params, simulate, experiment, verify.

Exit codes: 0 when every assertion passed, 1 when one failed, 2 for bad input
(inadmissible parameters, config errors, unknown names).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, harness
from .config import (
    ConfigError,
    RawConfig,
    apply_overrides,
    build_measure,
    build_sim_config,
    build_v0,
    echo,
    load_config,
)
from .domain import write_field, write_header
from .model import InadmissibleError, describe
from .solver import InvariantViolation, simulate
from .suites import SUITES, run_suite

EXPERIMENTS = {
    # name -> default bundled config
    "smoothing": "rates_1d",
    "weak-star": "rates_1d",
    "v-continuity": "rates_1d",
    "taxis": "rates_1d",
    "gradient": "gradient_1d",
    "eps-ladder": "ladder_1d",
}


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str = __version__
    seed: int = 0
    started: str = ""
    finished: str = ""
    wall_time: float = 0.0
    outputs: list[str] = field(default_factory=list)
    assertions: dict[str, bool] = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return bool(self.assertions) and all(self.assertions.values())

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        data = harness._jsonable(asdict(self))
        data["passed"] = self.passed
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def _rel(paths, outdir: Path) -> list[str]:
    return sorted(str(Path(p).relative_to(outdir)) for p in paths)


# --- params ------------------------------------------------------------------------


def cmd_params(args) -> int:
    try:
        out = describe(args.n, args.alpha, args.q, args.r)
    except InadmissibleError as exc:
        print(json.dumps({"admissible": False, "error": str(exc)}, indent=2))
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        return _fail(str(exc))
    out = {"admissible": True, **out}
    if out["alpha_clamped"]:
        out["note"] = f"alpha = {args.alpha} clamped to alpha_eff = {out['alpha_eff']:g} for exponent bookkeeping"
    print(json.dumps(harness._jsonable(out), indent=2, sort_keys=True))
    return 0


# --- simulate ----------------------------------------------------------------------


def _load(args, default: str | None = None) -> RawConfig:
    source = getattr(args, "config", None) or default
    return apply_overrides(load_config(source), args.set or [])


def cmd_simulate(args) -> int:
    try:
        raw = _load(args)
        cfg = build_sim_config(raw)
        mu0 = build_measure(raw, cfg.grid)
        v0 = build_v0(raw, cfg.grid)
    except ConfigError as exc:
        return _fail(str(exc))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    man = RunManifest("simulate", echo(raw), seed=int(raw.number("seed", 0)), started=_now())
    start = time.perf_counter()
    files = [write_header(cfg.grid, outdir / "grid.json")]
    try:
        traj = simulate(cfg, mu0, v0)
    except InvariantViolation as exc:
        man.error = str(exc)
        man.assertions = {"invariants_hold": False}
    else:
        for k, s in enumerate(traj.states):
            files.append(write_field(s.u, outdir / f"u_{k:04d}.csv"))
            files.append(write_field(s.v, outdir / f"v_{k:04d}.csv"))
        man.assertions = {
            "mass_conserved": traj.max_mass_drift() <= 1e-8,
            "u_nonnegative": min(traj.min_u_series) >= -1e-12,
            "v_nonnegative": min(traj.min_v_series) >= -1e-12,
            "all_snapshots_recorded": len(traj.states) == len(cfg.output_times or (cfg.t_end,)),
        }
        man.series = {
            "times": traj.times,
            "mass": traj.mass_series,
            "min_u": traj.min_u_series,
            "min_v": traj.min_v_series,
            "steps": traj.steps,
        }
        times_csv = outdir / "times.csv"
        times_csv.write_text("index,t\n" + "".join(f"{k},{t:.17g}\n" for k, t in enumerate(traj.times)))
        files.append(times_csv)
    man.wall_time = time.perf_counter() - start
    man.finished = _now()
    man.outputs = _rel(files, outdir)
    man.write(outdir)
    print(json.dumps({"out": str(outdir), "passed": man.passed, "assertions": man.assertions}, indent=2))
    return 0 if man.passed else 1


# --- experiment --------------------------------------------------------------------


def _window(raw: RawConfig):
    if not raw.has("experiment.window"):
        return None
    lo, hi = raw.numbers("experiment.window")
    return (lo, hi)


def run_experiment(name: str, raw: RawConfig):
    cfg = build_sim_config(raw)
    mu0 = build_measure(raw, cfg.grid)
    v0 = build_v0(raw, cfg.grid)
    samples = int(raw.number("experiment.samples", harness.DEFAULT_SAMPLES))
    window = _window(raw)
    q = raw.number("experiment.q", 1.5)
    if name == "smoothing":
        return harness.smoothing_experiment(cfg, mu0, raw.number("experiment.r", 2.0), q=q, v0=v0,
                                            window=window, samples=samples)
    if name == "weak-star":
        return harness.weak_star_experiment(cfg, mu0, r=raw.number("experiment.r", float("inf")), v0=v0,
                                            window=window, samples=samples)
    if name == "v-continuity":
        return harness.v_continuity_experiment(cfg, mu0, v0, q, window=window, samples=samples)
    if name == "taxis":
        return harness.taxis_integral_experiment(cfg, mu0, raw.number("experiment.r", 4.0), v0=v0,
                                                 window=window, samples=samples)
    if name == "gradient":
        return harness.gradient_uniformity_check(cfg, mu0, v0, raw.number("experiment.p", q), q=q,
                                                 window=window or (1e-4, 1.0), samples=samples)
    if name == "eps-ladder":
        eps_list = raw.numbers("experiment.eps_list", [1e-2, 1e-3, 1e-4])
        return harness.eps_ladder(cfg, mu0, v0, eps_list, q=q)
    raise KeyError(name)


def cmd_experiment(args) -> int:
    if args.name not in EXPERIMENTS:
        return _fail(f"unknown experiment {args.name!r}; available: {', '.join(EXPERIMENTS)}")
    try:
        raw = _load(args, EXPERIMENTS[args.name])
        started = _now()
        start = time.perf_counter()
        result = run_experiment(args.name, raw)
    except ValueError as exc:
        # config errors and inadmissible exponents
        return _fail(str(exc))
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    outdir = Path(args.out)
    if isinstance(result, harness.LadderResult):
        files = harness.write_ladder(result, outdir)
        assertions = dict(result.checks)
        summary = {"u_l1": result.u_l1, "v_w1q": result.v_w1q}
    else:
        files = harness.write_experiment(result, outdir, svg=not args.no_svg)
        assertions = dict(result.checks)
        summary = result.summary()
    man = RunManifest(f"experiment {args.name}", echo(raw), seed=int(raw.number("seed", 0)), started=started,
                      finished=_now(), wall_time=time.perf_counter() - start, outputs=_rel(files, outdir),
                      assertions=assertions)
    man.write(outdir)
    print(json.dumps(harness._jsonable({"experiment": args.name, "passed": man.passed, "summary": summary}),
                     indent=2, sort_keys=True))
    return 0 if man.passed else 1


# --- verify ------------------------------------------------------------------------


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        return _fail(f"unknown suite {args.suite!r}; available suites: {', '.join(SUITES)}")
    report = run_suite(args.suite)
    text = json.dumps(report.as_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"kslab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("params", help="admissible exponent ranges and the exponent selection")
    sp.add_argument("-n", type=int, required=True, help="space dimension")
    sp.add_argument("-a", "--alpha", type=float, required=True)
    sp.add_argument("-q", type=float, default=None)
    sp.add_argument("-r", type=float, default=None, help="accepts 'inf'")
    sp.set_defaults(func=cmd_params)

    overrides = dict(action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")

    sp = sub.add_parser("simulate", help="run one simulation and write snapshots plus a manifest")
    sp.add_argument("config", help="config file, or the name of a bundled config")
    sp.add_argument("--out", required=True)
    sp.add_argument("--set", **overrides)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("experiment", help="run one rate experiment")
    sp.add_argument("name", help=", ".join(EXPERIMENTS))
    sp.add_argument("--config", default=None, help="defaults to the bundled config for the experiment")
    sp.add_argument("--out", required=True)
    sp.add_argument("--set", **overrides)
    sp.add_argument("--no-svg", action="store_true")
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("suite", help=", ".join(SUITES))
    sp.add_argument("--out", default=None, help="also write the JSON summary here")
    sp.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
