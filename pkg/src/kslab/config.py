"""Flat ``key = value`` run configuration.

Grammar (one entry per line)::

    # comment
    grid.cells = 1024          # trailing comments are allowed
    mu0.atoms = [[0.5, 1.0]]   # JSON values are accepted where lists are needed

Keys are dotted names; values are numbers, comma-separated number lists,
bare words, or JSON.  Unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import Field, Grid
from .measure import Atom, RadonMeasure, density_profile, preset_measure
from .model import Sensitivity
from .solver import SimConfig

KNOWN_KEYS = {
    "grid.extents", "grid.cells",
    "sens.k_f", "sens.alpha",
    "eps", "dt_safety", "t_end", "max_dt", "seed",
    "output.times", "output.count", "output.t_min", "output.spacing",
    "mu0.preset", "mu0.mass", "mu0.atoms", "mu0.density", "mu0.density_mass",
    "v0.profile", "v0.level", "v0.amplitude",
    "experiment.r", "experiment.q", "experiment.p", "experiment.window", "experiment.samples",
    "experiment.eps_list",
}


class ConfigError(ValueError):
    def __init__(self, key: str | None, line: int | None, message: str):
        self.key, self.line = key, line
        where = []
        if key:
            where.append(f"key '{key}'")
        if line:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


@dataclass
class RawConfig:
    entries: dict[str, tuple[str, int | None]]

    def has(self, key: str) -> bool:
        return key in self.entries

    def line(self, key: str) -> int | None:
        return self.entries[key][1] if key in self.entries else None

    def text(self, key: str, default: str | None = None) -> str:
        if key not in self.entries:
            if default is None:
                raise ConfigError(key, None, "missing required key")
            return default
        return self.entries[key][0]

    def number(self, key: str, default: float | None = None) -> float:
        if key not in self.entries:
            if default is None:
                raise ConfigError(key, None, "missing required key")
            return default
        raw, line = self.entries[key]
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(key, line, f"expected a number, got {raw!r}") from None

    def numbers(self, key: str, default: list[float] | None = None) -> list[float]:
        if key not in self.entries:
            if default is None:
                raise ConfigError(key, None, "missing required key")
            return default
        raw, line = self.entries[key]
        try:
            if raw.startswith("["):
                vals = json.loads(raw)
            else:
                vals = [float(x) for x in raw.split(",") if x.strip()]
            return [float(x) for x in vals]
        except (ValueError, TypeError):
            raise ConfigError(key, line, f"expected a list of numbers, got {raw!r}") from None

    def json(self, key: str):
        raw, line = self.entries[key]
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(key, line, f"invalid JSON ({exc.msg})") from None


def parse_config(text: str) -> RawConfig:
    entries: dict[str, tuple[str, int | None]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, lineno, "unknown key")
        if not value:
            raise ConfigError(key, lineno, "empty value")
        if key in entries:
            raise ConfigError(key, lineno, f"duplicate key (first set on line {entries[key][1]})")
        entries[key] = (value, lineno)
    return RawConfig(entries)


def apply_overrides(cfg: RawConfig, overrides: list[str]) -> RawConfig:
    """``key=value`` strings from the command line replace file entries."""
    entries = dict(cfg.entries)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(None, None, f"override {item!r} must look like key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, None, "unknown key")
        entries[key] = (value, None)
    return RawConfig(entries)


def bundled_config_path(name: str) -> Path | None:
    stem = name[:-4] if name.endswith(".cfg") else name
    candidate = resources.files("kslab") / "configs" / f"{stem}.cfg"
    return Path(str(candidate)) if candidate.is_file() else None


def load_config(path_or_name: str) -> RawConfig:
    """Read a config file, falling back to the bundled configs by name."""
    path = Path(path_or_name)
    if not path.is_file():
        bundled = bundled_config_path(path.name)
        if bundled is None:
            raise ConfigError(None, None, f"config {path_or_name!r} not found")
        path = bundled
    return parse_config(path.read_text())


def _wrap(key: str, cfg: RawConfig, func, *args):
    try:
        return func(*args)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(key, cfg.line(key), str(exc)) from None


def build_grid(cfg: RawConfig) -> Grid:
    cells = [int(c) for c in cfg.numbers("grid.cells")]
    extents = cfg.numbers("grid.extents", [1.0] * len(cells))
    if len(extents) == 1 and len(cells) == 2:
        extents = extents * 2
    return _wrap("grid.cells", cfg, Grid, tuple(extents), tuple(cells))


def build_output_times(cfg: RawConfig, t_end: float) -> tuple[float, ...]:
    if cfg.has("output.times"):
        return tuple(cfg.numbers("output.times"))
    count = int(cfg.number("output.count", 10))
    spacing = cfg.text("output.spacing", "log")
    if spacing == "log":
        t_min = cfg.number("output.t_min", t_end / 100)
        if not 0 < t_min < t_end:
            raise ConfigError("output.t_min", cfg.line("output.t_min"), "must lie in (0, t_end)")
        return tuple(float(t) for t in np.geomspace(t_min, t_end, count))
    if spacing == "linear":
        return tuple(float(t) for t in np.linspace(t_end / count, t_end, count))
    raise ConfigError("output.spacing", cfg.line("output.spacing"), "expected 'log' or 'linear'")


def build_sim_config(cfg: RawConfig) -> SimConfig:
    grid = build_grid(cfg)
    sens = _wrap("sens.alpha", cfg, Sensitivity, cfg.number("sens.k_f"), cfg.number("sens.alpha"))
    t_end = cfg.number("t_end")
    kwargs = dict(
        grid=grid,
        sens=sens,
        eps=cfg.number("eps"),
        t_end=t_end,
        dt_safety=cfg.number("dt_safety", 0.5),
        output_times=build_output_times(cfg, t_end),
        max_dt=cfg.number("max_dt", math.inf),
    )
    try:
        return SimConfig(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        key = next((k for k in ("eps", "dt_safety", "t_end", "max_dt") if msg.startswith(k)), "output.times")
        raise ConfigError(key, cfg.line(key), msg) from None


def build_measure(cfg: RawConfig, grid: Grid) -> RadonMeasure:
    mass = cfg.number("mu0.mass", 1.0)
    if cfg.has("mu0.atoms"):
        raw = cfg.json("mu0.atoms")
        try:
            atoms = tuple(Atom(tuple(float(x) for x in a[:-1]), float(a[-1])) for a in raw)
        except (TypeError, ValueError, IndexError):
            raise ConfigError("mu0.atoms", cfg.line("mu0.atoms"), "expected [[x, (y,) weight], ...]") from None
        density = None
        dname = cfg.text("mu0.density", "none")
        if dname != "none":
            density = _wrap("mu0.density", cfg, density_profile, grid, dname, cfg.number("mu0.density_mass", 1.0))
        return _wrap("mu0.atoms", cfg, RadonMeasure, atoms, density, grid.extents)
    preset = cfg.text("mu0.preset", "dirac")
    return _wrap("mu0.preset", cfg, preset_measure, preset, grid, mass)


def build_v0(cfg: RawConfig, grid: Grid) -> Field:
    """Signal profiles: ``zero``, ``constant`` (``v0.level``) or ``cosine_bump``.

    ``cosine_bump`` is ``level + amplitude * prod_i cos(pi x_i / L_i)`` and must
    stay nonnegative.
    """
    profile = cfg.text("v0.profile", "zero")
    level = cfg.number("v0.level", 1.0)
    amp = cfg.number("v0.amplitude", 0.5)
    if profile == "zero":
        return Field.constant(grid, 0.0)
    if profile == "constant":
        return Field.constant(grid, level)
    if profile == "cosine_bump":
        prod = np.ones(grid.cells)
        for axis, x in enumerate(grid.mesh()):
            prod = prod * np.cos(np.pi * x / grid.extents[axis])
        vals = level + amp * prod
        if vals.min() < 0:
            raise ConfigError("v0.amplitude", cfg.line("v0.amplitude"), "v0 must be nonnegative")
        return Field(grid, vals)
    raise ConfigError("v0.profile", cfg.line("v0.profile"), "expected zero, constant or cosine_bump")


def echo(cfg: RawConfig) -> dict[str, str]:
    return {k: v for k, (v, _) in sorted(cfg.entries.items())}
