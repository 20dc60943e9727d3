import json

import pytest

from kslab import cli
from kslab.config import (
    ConfigError,
    apply_overrides,
    build_measure,
    build_sim_config,
    build_v0,
    load_config,
    parse_config,
)
from kslab.solver import InvariantViolation

GOOD = """\
# comment line
grid.extents = 1.0
grid.cells = 64      # trailing comment
sens.k_f = 1.0
sens.alpha = 0.3
eps = 1e-2
t_end = 0.05
output.times = 0.01, 0.02, 0.03, 0.04, 0.05
mu0.atoms = [[0.25, 0.5], [0.75, 0.5]]
v0.profile = cosine_bump
"""


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# --- config ------------------------------------------------------------------------------


def test_parse_good_config():
    raw = parse_config(GOOD)
    cfg = build_sim_config(raw)
    assert cfg.grid.cells == (64,)
    assert cfg.output_times == (0.01, 0.02, 0.03, 0.04, 0.05)
    mu0 = build_measure(raw, cfg.grid)
    assert mu0.total_mass == pytest.approx(1.0)
    assert build_v0(raw, cfg.grid).min() == pytest.approx(0.5, abs=1e-3)


def test_parse_error_names_key_and_line():
    with pytest.raises(ConfigError) as info:
        parse_config(GOOD + "grid.cels = 4\n")
    assert info.value.key == "grid.cels" and info.value.line == 11
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("eps = 0.1\nnot a pair\n")
    with pytest.raises(ConfigError, match="key 'eps', line 6"):
        build_sim_config(parse_config(GOOD.replace("eps = 1e-2", "eps = lots")))


def test_eps_out_of_range_config():
    raw = parse_config(GOOD.replace("eps = 1e-2", "eps = 1.5"))
    with pytest.raises(ConfigError, match=r"eps must lie in \(0,1\)") as info:
        build_sim_config(raw)
    assert info.value.line == 6


def test_missing_grid_is_an_error():
    raw = parse_config("\n".join(l for l in GOOD.splitlines() if not l.startswith("grid.")))
    with pytest.raises(ConfigError, match="grid.cells"):
        build_sim_config(raw)


def test_duplicate_keys_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("eps = 0.1\neps = 0.2\n")


def test_overrides_replace_values():
    raw = apply_overrides(parse_config(GOOD), ["eps=0.05", "grid.cells = 32"])
    cfg = build_sim_config(raw)
    assert cfg.eps == 0.05 and cfg.grid.cells == (32,)
    with pytest.raises(ConfigError):
        apply_overrides(raw, ["nonsense"])


def test_bundled_configs_all_build():
    for name in ("dirac_1d", "two_atoms_1d", "dirac_2d", "rates_1d", "gradient_1d", "ladder_1d"):
        raw = load_config(name)
        cfg = build_sim_config(raw)
        build_measure(raw, cfg.grid)
        build_v0(raw, cfg.grid)


def test_unknown_config_name():
    with pytest.raises(ConfigError, match="not found"):
        load_config("no_such_config")


# --- params -----------------------------------------------------------------------------------


def test_params_worked_selection(capsys):
    code, out, _ = run(capsys, "params", "-n", "2", "-a", "0.3", "-q", "1.2", "-r", "2")
    assert code == 0
    data = json.loads(out)
    assert data["selection"]["s"] == pytest.approx(12 / 11, abs=1e-12)
    assert data["selection"]["theta"] == pytest.approx(5 / 6, abs=1e-12)
    assert all(data["properties"].values())


def test_params_below_threshold(capsys):
    code, out, err = run(capsys, "params", "-n", "3", "-a", "0.2")
    assert code != 0
    assert "threshold 0.25" in err
    assert json.loads(out)["admissible"] is False


def test_params_clamp_noted(capsys):
    code, out, _ = run(capsys, "params", "-n", "1", "-a", "5", "-q", "2")
    data = json.loads(out)
    assert code == 0 and data["alpha_eff"] == pytest.approx(0.499) and "clamped" in data["note"]


def test_params_infinite_r(capsys):
    code, out, _ = run(capsys, "params", "-n", "1", "-a", "0.4", "-q", "2", "-r", "inf")
    data = json.loads(out)
    assert code == 0 and data["selection"]["r"] == "inf"


# --- simulate --------------------------------------------------------------------------------


def test_simulate_bundled_dirac(capsys, tmp_path):
    out = tmp_path / "run"
    code, _, _ = run(capsys, "simulate", "dirac_1d", "--out", str(out))
    assert code == 0
    snaps = sorted(out.glob("u_*.csv"))
    assert len(snaps) >= 5
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] and all(man["assertions"].values())
    listed = set(man["outputs"])
    assert {p.name for p in out.iterdir()} - {"manifest.json"} == listed
    assert man["config"]["mu0.preset"] == "dirac" and man["seed"] == 0
    assert len(man["series"]["mass"]) == len(snaps) and man["wall_time"] > 0
    assert man["started"] and man["finished"] and man["version"]


def test_simulate_is_byte_reproducible(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(GOOD)
    for d in ("a", "b"):
        assert run(capsys, "simulate", str(cfg), "--out", str(tmp_path / d))[0] == 0
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert len(files) == 11
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_csv_has_17_digits(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(GOOD)
    run(capsys, "simulate", str(cfg), "--out", str(tmp_path / "o"))
    row = (tmp_path / "o" / "u_0000.csv").read_text().splitlines()[5]
    assert len(row.split(",")[1].replace(".", "").lstrip("0").split("e")[0]) >= 16


def test_simulate_rejects_bad_eps(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "dirac_1d", "--out", str(tmp_path), "--set", "eps=1.5")
    assert code == 2 and "eps must lie in (0,1)" in err


def test_simulate_missing_grid(capsys, tmp_path):
    cfg = tmp_path / "nogrid.cfg"
    cfg.write_text("\n".join(l for l in GOOD.splitlines() if not l.startswith("grid.")))
    code, _, err = run(capsys, "simulate", str(cfg), "--out", str(tmp_path / "o"))
    assert code != 0 and "grid" in err


def test_simulate_exit_code_tracks_assertions(capsys, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise InvariantViolation(0.1, -1.0, 0.0, 0.0, "positivity lost")

    monkeypatch.setattr(cli, "simulate", broken)
    code, _, _ = run(capsys, "simulate", "dirac_1d", "--out", str(tmp_path))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 1 and man["passed"] is False and "positivity" in man["error"]


# --- experiment -----------------------------------------------------------------------------


def test_experiment_smoothing(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "smoothing", "--out", str(tmp_path))
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"smoothing.csv", "smoothing.json", "smoothing.svg", "manifest.json"}
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["assertions"] and man["passed"]
    assert -0.30 <= json.loads(out)["summary"]["fit"]["exponent"] <= -0.20


def test_experiment_override_and_unknown(capsys, tmp_path):
    code, out, _ = run(capsys, "experiment", "taxis", "--out", str(tmp_path), "--set", "experiment.samples=8",
                       "--no-svg")
    assert code == 0 and len((tmp_path / "taxis_integral.csv").read_text().splitlines()) == 9
    code, _, err = run(capsys, "experiment", "sideways", "--out", str(tmp_path))
    assert code == 2 and "smoothing" in err


def test_experiment_ladder(capsys, tmp_path):
    code, _, _ = run(capsys, "experiment", "eps-ladder", "--out", str(tmp_path), "--set", "grid.cells=256",
                     "--set", "t_end=0.05")
    assert code == 0
    assert (tmp_path / "eps_ladder.csv").exists() and (tmp_path / "manifest.json").exists()


# --- verify -------------------------------------------------------------------------------------


def test_verify_exponents(capsys):
    code, out, _ = run(capsys, "verify", "exponents")
    data = json.loads(out)
    assert code == 0 and data["passed"] and data["checks"]["random_tuples"]["tuples"] == 1000


def test_verify_conservation(capsys, tmp_path):
    dest = tmp_path / "summary.json"
    code, out, _ = run(capsys, "verify", "conservation", "--out", str(dest))
    data = json.loads(dest.read_text())
    assert code == 0 and len(data["checks"]) == 3
    assert all(c["mass_drift"] <= 1e-8 for c in data["checks"].values())


def test_verify_rates_1d(capsys):
    code, out, _ = run(capsys, "verify", "rates-1d")
    assert code == 0 and json.loads(out)["passed"]


def test_verify_unknown_suite(capsys):
    code, _, err = run(capsys, "verify", "speed")
    assert code == 2
    for name in ("exponents", "semigroup", "conservation", "rates-1d", "rates-2d"):
        assert name in err
