import csv
import json
import math

import numpy as np
import pytest

from qhdyson.cli import main
from qhdyson.config import load_config, parse_config
from qhdyson.errors import ConfigInvalid, SingularityOnGrid
from qhdyson.io import read_series_csv
from qhdyson.scenario import (
    EXIT_BREAKDOWN,
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    ScenarioError,
    bundled_names,
    evaluate,
    output_dir,
    resolve,
    run_scenario,
    sweep,
    with_parameter,
)
from qhdyson.verify import displacement_branch, verify_paper, window_flip_error


def s1(**over):
    raw = {"name": "s1", "model": "spinchain", "params": {"family": "s1", "delta0": 1.0},
           "grid": {"t0": 0.0, "t1": 1.0, "steps": 100}}
    raw.update(over)
    return raw


def general(t1=1.0, steps=100, kappa=0.5):
    return {"name": "gen", "model": "spinchain",
            "params": {"lambda": 1.0, "kappa": kappa, "rho0": {"dim": 2, "re": [1, 0, 0, 1]}},
            "grid": {"t0": 0.0, "t1": t1, "steps": steps}}


def write(tmp_path, raw, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


# --- configuration


def test_unknown_model_names_field():
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(s1(model="unknown"))
    assert exc.value.path == "model"


@pytest.mark.parametrize("raw, path", [
    (s1(extra=1), "extra"),
    (s1(grid={"t0": 0, "t1": 1, "steps": 10, "dt": 0.1}), "grid.dt"),
    (s1(params={"family": "s1", "colour": 1}), "params.colour"),
    (s1(grid={"t0": 0, "t1": 1, "steps": 2}), "grid.steps"),
    (s1(grid={"t0": 0, "t1": 1, "steps": 10.5}), "grid.steps"),
    (s1(grid={"t0": 0, "t1": math.inf, "steps": 10}), "grid.t1"),
    (s1(checks=["nope"]), "checks[0]"),
    (s1(checks=["det_rho", "det_rho"]), "checks[1]"),
    (s1(tolerances={"det_rho": -1.0}), "tolerances.det_rho"),
    (s1(params={"family": "s2"}, checks=["eta_squared"]), "checks[0]"),
    (s1(params={"family": "s1", "kappa": 1.0}), "params.kappa"),
    (s1(params={"family": "s9"}), "params.family"),
])
def test_strict_schema(raw, path):
    with pytest.raises(ConfigInvalid) as exc:
        parse_config(raw)
    assert exc.value.path == path


def test_origin_checks_need_zero_start():
    with pytest.raises(ConfigInvalid):
        parse_config(s1(grid={"t0": -0.5, "t1": 0.5, "steps": 10}, checks=["kappa_ode"]))
    cfg = parse_config(s1(grid={"t0": -0.5, "t1": 0.5, "steps": 10}))
    assert "kappa_ode" not in cfg.checks


def test_grid_crossing_pole():
    with pytest.raises(SingularityOnGrid):
        parse_config(s1(grid={"t0": 0.0, "t1": 2.0, "steps": 100}))


def test_default_checks_follow_family():
    assert "positivity" in parse_config(s1()).checks
    cfg = parse_config(s1(params={"family": "s3"}))
    assert "inadmissible" in cfg.checks and "eta_squared" not in cfg.checks


def test_oscillator_must_start_at_zero():
    raw = dict(resolve("paper-oscillator").raw)
    raw["grid"] = {"t0": 0.5, "t1": 1.0, "steps": 10}
    with pytest.raises(ConfigInvalid):
        parse_config(raw)


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    with pytest.raises(ConfigInvalid):
        load_config(path)


# --- running


def test_bundled_scenarios_listed():
    names = bundled_names()
    assert "paper-spinchain-s1" in names and "paper-oscillator" in names
    with pytest.raises(ConfigInvalid):
        resolve("no-such-scenario")


def test_explicit_scenario_passes(tmp_path):
    rep = run_scenario(resolve("paper-spinchain-s1-explicit"), out_dir=tmp_path)
    assert rep.verdict == "pass" and rep.exit_code == EXIT_OK
    data = json.loads((tmp_path / "paper-spinchain-s1-explicit" / "report.json").read_text())
    assert {c["name"] for c in data["checks"]} == {"eta_squared", "dyson_residual", "quasi_residual", "det_rho"}


def test_report_is_deterministic(tmp_path):
    cfg = parse_config(s1())
    a = run_scenario(cfg, out_dir=tmp_path / "a")
    b = run_scenario(cfg, out_dir=tmp_path / "b")
    assert a.to_dict(timestamp=False) == b.to_dict(timestamp=False)
    assert (tmp_path / "a/s1/trajectory.csv").read_bytes() == (tmp_path / "b/s1/trajectory.csv").read_bytes()
    ja = json.loads((tmp_path / "a/s1/report.json").read_text())
    jb = json.loads((tmp_path / "b/s1/report.json").read_text())
    ja.pop("timestamp"), jb.pop("timestamp")
    assert ja == jb


def test_trajectory_csv_round_trip(tmp_path):
    cfg = parse_config(s1())
    run_scenario(cfg, out_dir=tmp_path)
    data = read_series_csv(tmp_path / "s1" / "trajectory.csv")
    assert np.array_equal(data["t"], cfg.grid.times)
    assert data["kappa"] == pytest.approx(2 * np.tan(cfg.grid.times), abs=1e-14)
    with open(tmp_path / "s1" / "trajectory.csv") as fh:
        assert next(csv.reader(fh))[0] == "t"


def test_tolerance_override_exposes_floor():
    rep, _ = evaluate(parse_config(s1()), tolerance_override=1e-16)
    assert rep.verdict == "fail"
    assert rep.check("positivity").verdict == "pass"  # lower bounds keep their own tolerance


def test_failed_check_verdict():
    rep, _ = evaluate(parse_config(s1(tolerances={"metric_ode": 1e-15}, checks=["metric_ode"])))
    assert rep.exit_code == EXIT_FAIL


def test_breakdown_skips_remaining_checks():
    rep, _ = evaluate(parse_config(general(t1=12.0, steps=1200, kappa=3.0)))
    assert rep.verdict == "breakdown" and rep.exit_code == EXIT_BREAKDOWN
    assert "PositivityLost" in rep.error
    assert {c.verdict for c in rep.checks} == {"skipped"}


def test_general_mode_passes():
    rep, _ = evaluate(parse_config(general()))
    assert rep.verdict == "pass"
    assert rep.check("control_nonunitarity").value >= 1e-2


def test_non_breakdown_errors_are_wrapped():
    raw = dict(resolve("paper-oscillator").raw)
    raw["params"] = dict(raw["params"], beta=0.3)
    with pytest.raises(ScenarioError):
        evaluate(parse_config(raw))


def test_output_dir_precedence(monkeypatch, tmp_path):
    cfg = parse_config(s1())
    monkeypatch.delenv("QH_OUT", raising=False)
    assert str(output_dir(cfg)) == "qh-out"
    monkeypatch.setenv("QH_OUT", str(tmp_path / "env"))
    assert output_dir(cfg) == tmp_path / "env"
    assert output_dir(parse_config(s1(outputs=str(tmp_path / "cfg")))) == tmp_path / "cfg"
    assert output_dir(cfg, tmp_path / "cli") == tmp_path / "cli"


# --- sweeps


def test_with_parameter():
    raw = s1()
    assert with_parameter(raw, "dt", 0.02)["grid"]["steps"] == 50
    assert with_parameter(raw, "delta0", 2.0)["params"]["delta0"] == 2.0
    assert raw["params"]["delta0"] == 1.0
    with pytest.raises(ConfigInvalid):
        with_parameter(raw, "dt", 0.3)


def test_sweep_delta0_window(tmp_path):
    cfg = parse_config(s1(grid={"t0": 0.0, "t1": 0.5, "steps": 10}, checks=["positivity"]))
    values = [0.5 + 0.25 * k for k in range(21)]
    rows = sweep(cfg, "delta0", values, out_dir=tmp_path)
    inside = [r["delta0"] for r in rows if r["verdict"] == "pass"]
    assert inside == [v for v in values if 3 - math.sqrt(5) < v < 3 + math.sqrt(5)]
    assert min(inside) - 0.25 < 3 - math.sqrt(5) and max(inside) + 0.25 > 3 + math.sqrt(5)
    table = (tmp_path / "s1-sweep-delta0.csv").read_text().splitlines()
    assert table[0].startswith("delta0,verdict,positivity,positivity_verdict")
    assert len(table) == 22


def test_sweep_dt_rk4_ratio():
    cfg = parse_config(s1(checks=["metric_ode"]))
    rows = sweep(cfg, "dt", [1e-2, 5e-3, 2.5e-3], write=False)
    errs = [r["metric_ode"] for r in rows]
    for a, b in zip(errs, errs[1:]):
        assert a / b == pytest.approx(16.0, rel=0.1)


def test_sweep_parallel_matches_serial():
    cfg = parse_config(s1(checks=["metric_ode", "det_drift"]))
    serial = sweep(cfg, "delta0", [1.0, 2.0, 6.0], write=False)
    parallel = sweep(cfg, "delta0", [1.0, 2.0, 6.0], workers=2, write=False)
    assert serial == parallel


def test_sweep_errors():
    cfg = parse_config(s1())
    with pytest.raises(ConfigInvalid):
        sweep(cfg, "delta0", [], write=False)
    with pytest.raises(ConfigInvalid):
        sweep(cfg, "colour", [1], write=False)
    rows = sweep(parse_config(general(t1=12.0, steps=1200, kappa=3.0)), "kappa", [0.5, 3.0], write=False)
    assert [r["verdict"] for r in rows] == ["pass", "breakdown"]


# --- verify


def test_global_checks():
    assert window_flip_error() <= 0.01
    assert displacement_branch() <= 1e-12


def test_verify_paper_passes(tmp_path):
    rep = verify_paper(out_dir=tmp_path)
    assert rep.verdict == "pass", [c for c in rep.checks if c.verdict != "pass"]
    assert rep.check("paper-spinchain-s1/det_drift").value <= 1e-8
    assert (tmp_path / "verify" / "report.json").is_file()


# --- command line


def test_cli_list(capsys):
    assert main(["list"]) == EXIT_OK
    assert "paper-spinchain-s1" in capsys.readouterr().out.split()


def test_cli_run(tmp_path, capsys):
    assert main(["run", "paper-spinchain-s1-explicit", "--out", str(tmp_path)]) == EXIT_OK
    assert "pass" in capsys.readouterr().out
    assert (tmp_path / "paper-spinchain-s1-explicit" / "report.json").is_file()


def test_cli_run_dt_override(tmp_path):
    path = write(tmp_path, s1(checks=["metric_ode"]))
    assert main(["run", str(path), "--dt", "0.02", "--out", str(tmp_path)]) == EXIT_OK
    data = json.loads((tmp_path / "s1" / "report.json").read_text())
    assert data["provenance"]["grid"]["steps"] == 50


def test_cli_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setenv("QH_OUT", str(tmp_path / "out"))
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["run", str(write(tmp_path, s1(model="unknown")))]) == EXIT_CONFIG
    failing = s1(checks=["metric_ode"], tolerances={"metric_ode": 1e-15})
    assert main(["run", str(write(tmp_path, failing))]) == EXIT_FAIL
    broken = general(t1=12.0, steps=1200, kappa=3.0)
    assert main(["run", str(write(tmp_path, broken))]) == EXIT_BREAKDOWN
    assert (tmp_path / "out" / "gen" / "report.json").is_file()
    raw = dict(resolve("paper-oscillator").raw, name="gate")
    raw["params"] = dict(raw["params"], beta=0.3)
    assert main(["run", str(write(tmp_path, raw))]) == EXIT_CONFIG


def test_cli_sweep(tmp_path, capsys):
    path = write(tmp_path, s1(grid={"t0": 0.0, "t1": 0.5, "steps": 10}, checks=["positivity"]))
    code = main(["sweep", str(path), "--param", "delta0", "--values", "1.0,6.0", "--out", str(tmp_path)])
    assert code == EXIT_FAIL
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["delta0=1.0", "pass"]
    assert main(["sweep", str(path), "--param", "delta0", "--values", ","]) == EXIT_CONFIG
