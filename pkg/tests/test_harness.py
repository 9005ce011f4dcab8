import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from warpcone.actions import rotation_action, trivial_action
from warpcone.cli import main
from warpcone.harness import (
    ConfigError,
    cone_slice_discrepancy,
    load_scenario,
    parse_scenario,
    report,
    run_scenario,
    scenario_to_ini,
)
from warpcone.spaces import torus_grid

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.ini"))
FAST = [c for c in CONFIGS if c.stem not in ("schreier_family", "faithful_golden")]


def _experiment(path):
    return load_scenario(path).experiment


@pytest.mark.parametrize("cfg", FAST, ids=lambda p: p.stem)
def test_shipped_configs_pass(cfg, tmp_path):
    assert main([_experiment(cfg), "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / f"{cfg.stem}.csv").exists()
    assert (tmp_path / f"{cfg.stem}.manifest").exists()


def test_quotient_scenario_reports_zero(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "quotient_antipodal")
    main(["quotient-check", "--config", str(cfg), "--out", str(tmp_path)])
    head, row = (tmp_path / "quotient_antipodal.csv").read_text().splitlines()
    assert row.split(",")[2] == "0.0"


def test_failure_witness_recorded(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "faithful_plus")
    main(["faithful-radius", "--config", str(cfg), "--out", str(tmp_path)])
    rows = (tmp_path / "faithful_plus.csv").read_text().splitlines()[1:]
    assert rows and all(r.endswith("failure,s@16") for r in rows)


def test_manifest_round_trip(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "kernel_z8")
    scen = load_scenario(cfg)
    res = run_scenario(scen, tmp_path)
    again = load_scenario(res.manifest_path)
    for attr in ("name", "experiment", "seed", "space", "action", "params"):
        assert getattr(again, attr) == getattr(scen, attr)
    res2 = run_scenario(again, tmp_path / "second")
    assert res2.csv_path.read_bytes() == res.csv_path.read_bytes()


@pytest.mark.parametrize("cfg", FAST, ids=lambda p: p.stem)
def test_byte_identical_reruns(cfg, tmp_path):
    a = run_scenario(load_scenario(cfg), tmp_path / "a")
    b = run_scenario(load_scenario(cfg), tmp_path / "b")
    assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
    assert a.manifest_path.read_bytes() == b.manifest_path.read_bytes()


def test_assertion_failure_exit_code(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(
        "[scenario]\nname = bad\nexperiment = faithful-radius\nseed = 0\n"
        "[space]\nkind = torus\nresolution = 16\nwrap = plus\nstar_distance = 0.5\n"
        "[action]\nkind = rotation\nangles = golden\nmoduli = 0\n"
        "[params]\nN = 1\nschedule = 4\nexpect = faithful\n"
    )
    assert main(["faithful-radius", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    man = (tmp_path / "bad.manifest").read_text()
    assert "status = fail" in man and "finite faithfulness radius" in man


def test_config_errors(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[scenario]\nname = c\nexperiment = quotient-check\n[params]\nL = two\n")
    assert main(["quotient-check", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "params.L" in err and "line 5" in err
    cfg.write_text("[scenario]\nname = c\nexperiment = warp-drive\n")
    assert main(["warp-metric", "--config", str(cfg)]) == 2
    cfg.write_text("not an ini file\n")
    assert main(["warp-metric", "--config", str(cfg)]) == 2
    assert main(["warp-metric", "--config", str(tmp_path / "missing.ini")]) == 2
    assert main(["no-such-experiment"]) == 2


def test_subcommand_must_match(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "quotient_antipodal")
    assert main(["cone-slice", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_seed_mandatory_for_random_steps(tmp_path):
    text = (
        "[scenario]\nname = k\nexperiment = kernel-check\n"
        "[space]\nkind = torus\nresolution = 8\n[action]\nkind = rotation\nangles = 1/8\nmoduli = 8\n"
        "[params]\ntrials = 5\n"
    )
    with pytest.raises(ConfigError):
        run_scenario(parse_scenario(text), tmp_path)
    assert run_scenario(parse_scenario(text), tmp_path, seed=4).status == "pass"


def test_cap_exit_code(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "warp_rotation")
    assert main(["warp-metric", "--config", str(cfg), "--out", str(tmp_path), "--cap", "4"]) == 2


def test_cone_slice_trivial_exact():
    act = trivial_action(torus_grid(12))
    for theta, disc, tol in cone_slice_discrepancy(act, 4, 10.0):
        assert disc <= 1e-12


def test_cone_slice_mesh_halving():
    coarse = max(d for _, d, _ in cone_slice_discrepancy(trivial_action(torus_grid(8)), 4, 10.0))
    fine = max(d for _, d, _ in cone_slice_discrepancy(trivial_action(torus_grid(16)), 4, 10.0))
    assert fine <= coarse / 2 + 1e-12


def test_cone_slice_rotation_within_tolerance():
    act = rotation_action(torus_grid(32), [(5**0.5 - 1) / 2])
    for theta, disc, tol in cone_slice_discrepancy(act, 4, 16.0):
        assert disc <= tol


def test_report(tmp_path):
    for stem in ("quotient_antipodal", "embed_profinite"):
        cfg = next(c for c in CONFIGS if c.stem == stem)
        run_scenario(load_scenario(cfg), tmp_path)
    s, l = report(tmp_path)
    lines = s.read_text().splitlines()
    assert lines[0] == "scenario,experiment,status,rows"
    assert "embed_profinite,embed-profinite,pass,18" in lines
    long = l.read_text().splitlines()
    assert long[0] == "scenario,row,column,value" and len(long) > 18


def test_console_script(tmp_path):
    cfg = next(c for c in CONFIGS if c.stem == "embed_profinite")
    out = subprocess.run([sys.executable, "-m", "warpcone.cli", "embed-profinite", "--config", str(cfg), "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "pass" in out.stdout


def test_scenario_ini_keeps_case():
    scen = parse_scenario("[scenario]\nname = a\nexperiment = quotient-check\n[params]\nL = 3\n")
    assert "L = 3" in scenario_to_ini(scen)
