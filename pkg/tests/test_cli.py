import csv
from pathlib import Path

import pytest

from qacs.cli import (EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE,
                      SWEEP_HEADER, _parse_values_arg, load_config, main)
from qacs.model import ConfigError, ScenarioConfig


def test_load_config_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    cfg, plan, quad = load_config(str(path))
    default = ScenarioConfig()
    assert cfg == default
    assert cfg.n_mbs_antennas == 4 and cfg.n_fap_antennas == 2
    assert cfg.n_macro_mts == 50 and cfg.n_femto_mts == 5
    assert cfg.p_mbs == 50.0 and cfg.p_fap == 20.0
    assert cfg.noise_femto == -104.0 and cfg.noise_macro == -104.0
    assert cfg.macro_radius == 1000.0 and cfg.femto_radius == 20.0
    assert plan.frames == 1_000_000 and plan.batch_size == 10_000
    assert quad.abs_tol == 1e-9 and quad.rel_tol == 1e-7


def test_load_config_cases(tmp_path):
    path = tmp_path / "case.ini"
    path.write_text("[scenario]\nmbs_fap_distance = 100  # close placement\n")
    cfg, _, _ = load_config(str(path))
    assert cfg.mbs_fap_distance == 100.0
    cfg, _, _ = load_config(str(path), overrides=("scenario.mbs_fap_distance=800",))
    assert cfg.mbs_fap_distance == 800.0


def test_load_config_file_and_override_equivalence(tmp_path):
    path = tmp_path / "full.ini"
    path.write_text(
        "[scenario]\ngamma_f_req = 25\n[pathloss]\nfap_to_femto_slope_db = 22\n"
        "[sim]\nframes = 12345\nbatch_size = 1000\n")
    via_file = load_config(str(path))
    empty = tmp_path / "none.ini"
    empty.write_text("")
    via_set = load_config(str(empty), overrides=(
        "scenario.gamma_f_req=25", "pathloss.fap_to_femto_slope_db=22",
        "sim.frames=12345", "sim.batch_size=1000"))
    assert via_file == via_set


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nn_femto_mts = many\n")
    with pytest.raises(ConfigError, match="n_femto_mts"):
        load_config(str(bad))
    unknown = tmp_path / "unknown.ini"
    unknown.write_text("[scenario]\nbandwidth = 5\n")
    with pytest.raises(ConfigError, match="bandwidth"):
        load_config(str(unknown))
    malformed = tmp_path / "malformed.ini"
    malformed.write_text("[scenario\nx = 1\n")
    with pytest.raises(ConfigError, match="line"):
        load_config(str(malformed))
    with pytest.raises(ConfigError, match="section.key"):
        load_config(None, overrides=("frames=5",))


def test_parse_values_arg():
    assert _parse_values_arg("0:30:5") == [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
    assert _parse_values_arg("10") == [10.0]
    from qacs.cli import UsageError
    with pytest.raises(UsageError):
        _parse_values_arg("0:10")


def test_main_usage_error_exit_code():
    assert main(["sweep", "--axis", "gamma_f"]) == EXIT_USAGE  # missing --values


def test_main_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[scenario]\nn_femto_mts = 0\n")
    code = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG


def test_simulate_writes_report(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["simulate", "--out", str(out), "--frames", "4000", "--seed", "5",
                 "--set", "sim.batch_size=2000",
                 "--set", "scenario.mbs_fap_distance=100"])
    assert code == EXIT_OK
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "key,value"
    keys = [line.split(",")[0] for line in report[1:]]
    assert keys[:6] == ["r_f_analytic", "r_m_analytic", "r_f_empirical",
                        "r_m_empirical", "r_f_ci", "r_m_ci"]
    assert (out / "pmf.csv").exists()


def test_sweep_csv_contract_and_byte_stability(tmp_path):
    args = ["sweep", "--axis", "gamma_f", "--values", "10:20:5",
            "--frames", "3000", "--seed", "17",
            "--set", "sim.batch_size=1000",
            "--set", "scenario.mbs_fap_distance=100"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(out1)]) == EXIT_OK
    assert main(args + ["--out", str(out2)]) == EXIT_OK
    f1 = (out1 / "sweep_gamma_f.csv").read_bytes()
    f2 = (out2 / "sweep_gamma_f.csv").read_bytes()
    assert f1 == f2
    lines = f1.decode().splitlines()
    assert lines[0] == ",".join(SWEEP_HEADER)
    assert len(lines) == 1 + 3  # header + one row per value
    assert f1.endswith(b"\n")
    with open(out1 / "sweep_gamma_f.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["axis_value_db"]) for r in rows] == [10.0, 15.0, 20.0]
    assert all(float(r["r_f_empirical"]) > 0 for r in rows)


def test_cli_threads_do_not_change_bytes(tmp_path):
    base = ["sweep", "--axis", "gamma_m", "--values", "10", "--frames", "4000",
            "--seed", "3", "--set", "sim.batch_size=1000",
            "--set", "scenario.mbs_fap_distance=100"]
    outs = []
    for threads, name in ((1, "t1"), (4, "t4")):
        out = tmp_path / name
        assert main(base + ["--out", str(out), "--threads", str(threads)]) == EXIT_OK
        outs.append((out / "sweep_gamma_m.csv").read_bytes())
    assert outs[0] == outs[1]


def test_analyze_writes_analytics(tmp_path):
    out = tmp_path / "out"
    code = main(["analyze", "--out", str(out),
                 "--set", "scenario.mbs_fap_distance=100"])
    assert code == EXIT_OK
    text = (out / "analytics.csv").read_text()
    assert text.startswith("key,value\n")
    assert "pmf_nq_0" in text and "pmf_nb_4" in text


@pytest.mark.slow
def test_validate_default_config_passes(tmp_path):
    out = tmp_path / "val"
    code = main(["validate", "--out", str(out), "--frames", "60000",
                 "--set", "sim.batch_size=10000",
                 "--set", "scenario.mbs_fap_distance=100"])
    assert code == EXIT_OK
    lines = (out / "validation.csv").read_text().splitlines()
    assert lines[0] == "check,status,detail"
    assert all(",pass," in line or line.startswith("check") for line in lines)


@pytest.mark.slow
def test_validate_corrupted_tolerance_fails(tmp_path):
    out = tmp_path / "val"
    code = main(["validate", "--out", str(out), "--frames", "20000",
                 "--set", "sim.batch_size=10000",
                 "--set", "sim.quad_abs_tol=10",
                 "--set", "scenario.mbs_fap_distance=100"])
    assert code == EXIT_NUMERIC
