"""Scenario execution: residual reports, CSV artifacts, parameter sweeps."""

from __future__ import annotations

import copy
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from . import __version__
from .config import ScenarioConfig, load_config, parse_config
from .errors import ConfigInvalid, NumericalBreakdown, QHError
from .io import write_json, write_series_csv, write_table_csv
from .runners import make_runner

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3


class ScenarioError(QHError):
    """A module error raised while running a named scenario."""

    def __init__(self, scenario: str, cause: Exception):
        super().__init__(f"scenario {scenario!r}: {type(cause).__name__}: {cause}")
        self.scenario = scenario
        self.cause = cause


@dataclass(frozen=True)
class CheckResult:
    name: str
    kind: str
    value: float | None
    tolerance: float
    verdict: str  # pass, fail or skipped

    @classmethod
    def judge(cls, name: str, kind: str, value: float, tolerance: float) -> CheckResult:
        if not math.isfinite(value):
            ok = False
        elif kind == "upper":
            ok = value <= tolerance
        else:
            ok = value >= tolerance
        return cls(name, kind, float(value), float(tolerance), "pass" if ok else "fail")

    def to_dict(self) -> dict:
        v = self.value
        if v is not None and not math.isfinite(v):
            v = str(v)
        return {"name": self.name, "kind": self.kind, "value": v,
                "tolerance": self.tolerance, "verdict": self.verdict}


@dataclass
class ResidualReport:
    scenario: str
    model: str
    checks: list[CheckResult]
    provenance: dict
    error: str | None = None
    artifacts: list[str] = field(default_factory=list)
    timestamp: str = ""

    @property
    def verdict(self) -> str:
        if self.error is not None:
            return "breakdown"
        return "pass" if all(c.verdict == "pass" for c in self.checks) else "fail"

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_OK, "fail": EXIT_FAIL, "breakdown": EXIT_BREAKDOWN}[self.verdict]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self, timestamp: bool = True) -> dict:
        out = {
            "scenario": self.scenario,
            "model": self.model,
            "verdict": self.verdict,
            "checks": [c.to_dict() for c in self.checks],
            "provenance": self.provenance,
            "error": self.error,
            "artifacts": self.artifacts,
        }
        if timestamp:
            out["timestamp"] = self.timestamp
        return out


def provenance(cfg: ScenarioConfig) -> dict:
    g = cfg.grid
    return {"scenario_sha256": cfg.digest(),
            "grid": {"t0": g.t0, "t1": g.t1, "steps": g.steps},
            "code_version": __version__}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def evaluate(cfg: ScenarioConfig, tolerance_override: float | None = None):
    """Run every configured check. Returns ``(report, columns)`` without writing files."""
    results: list[CheckResult] = []
    error = None
    columns = {}
    try:
        runner = make_runner(cfg)
        for name in cfg.checks:
            spec = cfg.spec(name)
            tol = spec.tolerance
            if tolerance_override is not None and spec.kind == "upper":
                tol = tolerance_override
            results.append(CheckResult.judge(name, spec.kind, runner.value(name), tol))
        columns = runner.columns()
    except NumericalBreakdown as exc:
        error = f"{type(exc).__name__}: {exc}"
        done = {r.name for r in results}
        for name in cfg.checks:
            if name not in done:
                spec = cfg.spec(name)
                results.append(CheckResult(name, spec.kind, None, spec.tolerance, "skipped"))
    except QHError as exc:
        raise ScenarioError(cfg.name, exc) from exc
    report = ResidualReport(cfg.name, cfg.model, results, provenance(cfg), error, timestamp=_now())
    return report, columns


def output_dir(cfg: ScenarioConfig | None, override=None) -> Path:
    """``--out`` first, then the scenario's ``outputs``, then ``$QH_OUT``, then ``./qh-out``."""
    if override:
        return Path(override)
    if cfg is not None and cfg.outputs:
        return Path(cfg.outputs)
    return Path(os.environ.get("QH_OUT") or "qh-out")


def run_scenario(cfg: ScenarioConfig, out_dir=None, write: bool = True,
                 tolerance_override: float | None = None) -> ResidualReport:
    """Execute a scenario; with ``write`` the CSV and JSON land in ``<out>/<name>/``."""
    report, columns = evaluate(cfg, tolerance_override)
    if write:
        target = output_dir(cfg, out_dir) / cfg.name
        if columns:
            write_series_csv(target / "trajectory.csv", cfg.grid.times, columns)
            report.artifacts.append("trajectory.csv")
        write_json(target / "report.json", report.to_dict())
    return report


# ---------------------------------------------------------------------------
# bundled scenarios


def bundled_names() -> list[str]:
    root = resources.files("qhdyson") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    path = resources.files("qhdyson") / "scenarios" / f"{name}.json"
    if not path.is_file():
        raise ConfigInvalid("scenario", f"no bundled scenario named {name!r}")
    return Path(str(path))


def resolve(source) -> ScenarioConfig:
    """Load a scenario from a path, or by bundled name when no such file exists."""
    path = Path(source)
    if path.is_file():
        return load_config(path)
    if path.suffix == "" and path.name == str(source):
        return load_config(bundled_path(str(source)))
    raise ConfigInvalid("scenario", f"no such file: {source}")


# ---------------------------------------------------------------------------
# sweeps

GRID_PARAMS = ("dt", "steps", "t0", "t1")


def with_parameter(raw: dict, param: str, value) -> dict:
    """Copy of ``raw`` with one parameter replaced. ``dt`` sets ``grid.steps``."""
    raw = copy.deepcopy(raw)
    grid = raw.get("grid")
    if param in GRID_PARAMS:
        if not isinstance(grid, dict):
            raise ConfigInvalid("grid", "missing")
        if param == "dt":
            span = float(grid["t1"]) - float(grid["t0"])
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigInvalid("dt", f"expected a positive step, got {value!r}")
            steps = round(span / value)
            if steps < 1 or abs(steps * value - span) > 1e-9 * span:
                raise ConfigInvalid("dt", f"{value!r} does not divide the span {span!r}")
            grid["steps"] = steps
        else:
            grid[param] = value
        return raw
    params = raw.setdefault("params", {})
    if not isinstance(params, dict):
        raise ConfigInvalid("params", "expected an object")
    params[param] = value
    return raw


def _sweep_row(cfg: ScenarioConfig, param: str, value) -> dict:
    try:
        report, _ = evaluate(cfg)
    except ScenarioError as exc:
        return {param: value, "verdict": "error", "error": str(exc)}
    row = {param: value, "verdict": report.verdict}
    for c in report.checks:
        row[c.name] = c.value if c.value is not None else ""
        row[f"{c.name}_verdict"] = c.verdict
    if report.error:
        row["error"] = report.error
    return row


def sweep(cfg: ScenarioConfig, param: str, values: list, workers: int = 1,
          out_dir=None, write: bool = True) -> list[dict]:
    """One report row per value, in the order given.

    Every variant is parsed before anything runs, so a bad value fails the
    whole sweep up front. Rows are independent; ``workers > 1`` runs them in
    separate processes.
    """
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigInvalid("values", "expected a non-empty list")
    variants = [parse_config(with_parameter(cfg.raw, param, v), cfg.name) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, variants, [param] * len(values), values))
    else:
        rows = [_sweep_row(v, param, val) for v, val in zip(variants, values)]
    if write:
        write_table_csv(output_dir(cfg, out_dir) / f"{cfg.name}-sweep-{param}.csv", rows)
    return rows
