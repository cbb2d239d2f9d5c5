import json
import math

import numpy as np
import pytest

from vlasov_riesz.cli import main
from vlasov_riesz.config import (
    ConfigError,
    apply_override,
    config_hash,
    parse_config,
    serialize_config,
)

SIM_CONFIG = """
[grid]
d = 1
Lx = 6.0
Lv = 6.0
nx = 32
nv = 32

[kernel]
form = "multiplier"
kappa = 1.0
beta = 1.0

[integrator]
dt = 1e-2
t_end = 0.1
sigma = 0.0

[initial_data]
generator = "gaussian"
x_width = 0.8
v_width = 0.9

[diagnostics]
interval = 1

[output]
snapshots = true
"""

BLOWUP_CONFIG = """
[grid]
d = 3

[kernel]
form = "kernel_sum"
terms = [[1.0, 2.0]]

[initial_data]
generator = "concentrated"
eps_x = 0.1
eps_v = 0.1

[blowup]
checks = ["sigma_zero"]
"""


# -- config layer ---------------------------------------------------------------

def test_config_round_trip_identity():
    cfg = parse_config(SIM_CONFIG)
    text = serialize_config(cfg)
    again = parse_config(text)
    assert again == cfg
    assert serialize_config(again) == text
    assert config_hash(again) == config_hash(cfg)


def test_config_round_trip_with_nested_table():
    cfg = parse_config(SIM_CONFIG + "\n[blowup.verify]\nenergy_tol = 1e-3\n")
    assert cfg.blowup["verify"]["energy_tol"] == 1e-3
    assert parse_config(serialize_config(cfg)) == cfg


def test_config_missing_field_reports_path():
    cfg = parse_config(SIM_CONFIG.replace("nx = 32\n", ""))
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert "grid.nx" in str(err.value)


def test_config_rejects_unknown_section_and_generator():
    with pytest.raises(ConfigError):
        parse_config("[gird]\nd = 1\n")
    cfg = parse_config(SIM_CONFIG.replace('"gaussian"', '"landau"'))
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    assert "generator" in str(err.value)


def test_config_override_dotted_path():
    cfg = parse_config(SIM_CONFIG)
    apply_override(cfg, "integrator.dt=5e-3")
    apply_override(cfg, 'kernel.form="multiplier"')
    assert cfg.integrator["dt"] == 5e-3
    with pytest.raises(ConfigError):
        apply_override(cfg, "nonsense")
    with pytest.raises(ConfigError):
        apply_override(cfg, "nope.dt=1")


def test_config_kernel_validation_against_dim():
    bad = SIM_CONFIG.replace("beta = 1.0", "beta = 2.5")
    with pytest.raises(ConfigError):
        parse_config(bad).validate()


# -- CLI ------------------------------------------------------------------------

def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_simulate_free_transport(tmp_path, capsys):
    cfgp = write(tmp_path, SIM_CONFIG.replace("kappa = 1.0", "kappa = 0.0"))
    out = tmp_path / "out"
    code = main(["simulate", "--config", cfgp, "--output", str(out)])
    assert code == 0
    csv = (out / "timeseries.csv").read_text().splitlines()
    assert csv[0].startswith("time,mass,kinetic")
    assert len(csv) == 12  # header + t=0 + 10 steps
    kin = [float(line.split(",")[2]) for line in csv[1:]]
    assert abs(kin[-1] - kin[0]) <= 1e-10 * kin[0]
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["status"] == "completed"
    assert "config_hash" in meta and "code_version" in meta
    assert "riesz_normalization" in meta
    side = json.loads((out / "final_state.json").read_text())
    raw = np.fromfile(out / "final_state.bin", dtype=side["dtype"])
    assert list(raw.reshape(side["shape"]).shape) == [32, 32]


def test_cli_simulate_deterministic_output(tmp_path):
    cfgp = write(tmp_path, SIM_CONFIG)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["simulate", "--config", cfgp, "--output", str(out1), "--seed", "7"]) == 0
    assert main(["simulate", "--config", cfgp, "--output", str(out2), "--seed", "7"]) == 0
    assert (out1 / "timeseries.csv").read_bytes() == (out2 / "timeseries.csv").read_bytes()


def test_cli_simulate_halt_exit_code(tmp_path):
    text = SIM_CONFIG.replace("kappa = 1.0", "kappa = 8.0")
    text += "\n"
    cfgp = write(tmp_path, text)
    code = main([
        "simulate", "--config", cfgp, "--output", str(tmp_path / "halt"),
        "--override", "integrator.halt_density_factor=1.000000001",
        "--override", "integrator.t_end=0.05",
    ])
    assert code == 2


def test_cli_missing_config_field_exit_1(tmp_path, capsys):
    cfgp = write(tmp_path, SIM_CONFIG.replace("dt = 1e-2\n", ""))
    code = main(["simulate", "--config", cfgp, "--output", str(tmp_path / "x")])
    assert code == 1
    assert "integrator.dt" in capsys.readouterr().err


def test_cli_check_blowup_manev(tmp_path, capsys):
    cfgp = write(tmp_path, BLOWUP_CONFIG)
    code = main(["check-blowup", "--config", cfgp])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    rep = report["sigma_zero"]
    assert rep["condition_met"] is True
    assert rep["predicted_crossing_time"] > 0
    assert rep["inputs_digest"]["provenance"] == "closed-form quadrature"


def test_cli_check_blowup_sigma_positive(tmp_path, capsys):
    text = BLOWUP_CONFIG.replace('terms = [[1.0, 2.0]]', 'terms = [[1.0, 2.5]]')
    text = text.replace('checks = ["sigma_zero"]',
                        'checks = ["sigma_positive"]\nsigma = 0.5\ndelta = "scan"')
    cfgp = write(tmp_path, text)
    code = main(["check-blowup", "--config", cfgp, "--output", str(tmp_path / "rep")])
    assert code == 0
    rep = json.loads((tmp_path / "rep" / "blowup_report.json").read_text())
    assert rep["sigma_positive"]["condition_met"] is True
    assert rep["sigma_positive"]["predicted_crossing_time"] > 0


def test_cli_gronwall_table(capsys):
    code = main(["gronwall", "--c1", "1", "--c2", "2", "--c3", "1",
                 "--h0", "1", "--h0p", "0", "--t-max", "1", "--points", "5"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,bound"
    assert len(lines) == 6
    t0_val = float(lines[1].split(",")[1])
    assert t0_val == pytest.approx(1.0, abs=1e-12)


def test_cli_verify_identities_pass_and_fail(tmp_path, capsys):
    cfgp = write(tmp_path, SIM_CONFIG)
    assert main(["verify-identities", "--config", cfgp]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    # absurd tolerance forces an identity failure -> exit 3
    text = SIM_CONFIG + "\n[blowup.verify]\ntilde_tol = 1e-18\nvirial_tol = 1e-18\n"
    cfgp2 = write(tmp_path, text, "strict.toml")
    assert main(["verify-identities", "--config", cfgp2]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_cli_convert_kernel_both_ways(capsys):
    assert main(["convert-kernel", "--d", "3", "--c", "1.0", "--alpha", "2.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["multiplier"]["beta"] == pytest.approx(1.0)
    # r(3, 1) = Gamma(1) / (2 pi^{3/2} Gamma(1/2))
    assert out["riesz_normalization"] == pytest.approx(
        math.gamma(1.0) / (2 * np.pi**1.5 * math.gamma(0.5)), rel=1e-12)
    assert main(["convert-kernel", "--d", "3", "--kappa", "12.566370614359172",
                 "--beta", "2.0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kernel"]["c"] == pytest.approx(1.0, rel=1e-12)
    assert out["kernel"]["alpha"] == pytest.approx(1.0)


def test_cli_simulate_writes_blowup_report_for_kernel_runs(tmp_path):
    text = SIM_CONFIG.replace(
        '[kernel]\nform = "multiplier"\nkappa = 1.0\nbeta = 1.0',
        '[kernel]\nform = "kernel_sum"\nterms = [[1.0, 0.5]]',
    )
    text += "\n[blowup]\nchecks = [\"sigma_zero\"]\n"
    cfgp = write(tmp_path, text)
    out = tmp_path / "out"
    code = main(["simulate", "--config", cfgp, "--output", str(out)])
    assert code == 0
    rep = json.loads((out / "blowup_report.json").read_text())
    assert rep["sigma_zero"]["condition_met"] is None  # no supercritical term in d=1


def test_config_kernel_mollify_eps_round_trip():
    text = SIM_CONFIG.replace("beta = 1.0", "beta = 1.0\nmollify_eps = 0.1")
    cfg = parse_config(text)
    spec = cfg.build_kernel()
    assert spec.mollify_eps == 0.1
    assert parse_config(serialize_config(cfg)) == cfg


def test_cli_verify_identities_sigma_positive(tmp_path, capsys):
    text = SIM_CONFIG.replace("sigma = 0.0", "sigma = 0.4")
    text = text.replace("Lv = 6.0", "Lv = 8.0")
    cfgp = write(tmp_path, text, "fp.toml")
    assert main(["verify-identities", "--config", cfgp]) == 0
    out = capsys.readouterr().out
    assert "energy ledger" in out and "virial ledger" in out
