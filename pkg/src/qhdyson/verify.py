"""Full reproduction suite: every bundled scenario plus cross-scenario checks."""

from __future__ import annotations

import hashlib
import math

import numpy as np

from . import __version__
from .config import parse_config
from .errors import QHError
from .io import write_json
from .oscillator import hermiticity_constraints
from .propagator import TimeGrid, evolve_hermitian, evolve_metric
from .scenario import (
    CheckResult,
    ResidualReport,
    _now,
    bundled_names,
    bundled_path,
    output_dir,
    resolve,
    run_scenario,
    with_parameter,
)
from .spinchain import closed_family, explicit_triple, positivity_window

WINDOW_GRID = np.round(np.arange(-1000, 1001) * 0.01, 10)


def window_flip_error() -> float:
    """Distance of the tan-family admissibility flips from ``3 -+ sqrt5``."""
    flips = positivity_window("tan", WINDOW_GRID).flips()
    if len(flips) != 2:
        return math.inf
    edges = (3 - math.sqrt(5), 3 + math.sqrt(5))
    return max(abs(a - b) for a, b in zip(sorted(flips), edges))


def window_max_min_eig(kind: str) -> float:
    """Largest ``min eig rho(0)`` over the sampled ``delta0``; not positive means never admissible."""
    return float(positivity_window(kind, WINDOW_GRID).min_eig.max())


def metric_ode_order(dt: float = 1e-3) -> float:
    """``|log2(e(dt) / e(dt/2)) - 4|`` for the RK4 metric of the s1 family at ``t = 1``."""
    fam = closed_family("tan", 1.0)
    errs = []
    for h in (dt, dt / 2):
        grid = TimeGrid(0.0, 1.0, round(1.0 / h))
        traj = evolve_metric(lambda t: fam.hamiltonian(t), fam.metric(0.0), grid)
        errs.append(np.abs(traj.values[-1] - fam.metric(1.0)).max())
    return abs(math.log2(errs[0] / errs[1]) - 4.0)


def midpoint_order(dt: float = 1e-2) -> float:
    """``|log2(e1 / e2) - 2|`` from three propagators of the explicit s1 ``h`` at ``dt, dt/2, dt/4``."""
    finals = []
    for k in range(3):
        grid = TimeGrid(0.0, 1.0, round(2**k / dt))
        finals.append(evolve_hermitian(lambda t: explicit_triple(t).h, grid).values[-1])
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    return abs(math.log2(e1 / e2) - 2.0)


def truncation_gain(dim: int = 80) -> float:
    """Ratio of the mapped-state TDSE residual of the bundled oscillator at its own ``dim`` and at ``dim``."""
    base = resolve("paper-oscillator")
    vals = []
    for raw in (base.raw, with_parameter(base.raw, "dim", dim)):
        cfg = parse_config(dict(raw, checks=["tdse_psi"]), "paper-oscillator")
        vals.append(run_scenario(cfg, write=False).check("tdse_psi").value)
    return vals[0] / vals[1]


def displacement_branch(samples: int = 200, seed: int = 7) -> float:
    """``max |const1 - (alpha - conj(beta))|`` on ``lam = -conj(gamma)``.

    On that branch the gamma terms cancel, so the first Hermiticity condition
    forces ``alpha = conj(beta)``: ``H`` itself would be Hermitian.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        alpha, beta, gamma, gamma_dot = rng.normal(size=4) + 1j * rng.normal(size=4)
        omega = rng.uniform(0.1, 3.0)
        c1, _ = hermiticity_constraints(alpha, beta, omega, gamma, -np.conj(gamma),
                                        gamma_dot, -np.conj(gamma_dot))
        worst = max(worst, abs(c1 - (alpha - np.conj(beta))))
    return float(worst)


GLOBAL_CHECKS = [
    # name, kind, tolerance, function
    ("window/tan_flips", "upper", 0.01, window_flip_error),
    ("window/sec_max_min_eig", "upper", 1e-10, lambda: window_max_min_eig("sec")),
    ("window/tanh_max_min_eig", "upper", 1e-10, lambda: window_max_min_eig("tanh")),
    ("convergence/metric_ode_order", "upper", 0.5, metric_ode_order),
    ("convergence/midpoint_order", "upper", 0.5, midpoint_order),
    ("convergence/truncation_gain", "lower", 10.0, truncation_gain),
    ("obstruction/displacement_branch", "upper", 1e-12, displacement_branch),
]


def verify_paper(tolerance_override: float | None = None, out_dir=None,
                 write: bool = True) -> ResidualReport:
    """Run every bundled scenario and the global checks; failures show up as verdicts."""
    checks: list[CheckResult] = []
    errors = []
    digest = hashlib.sha256()
    for name in bundled_names():
        digest.update(bundled_path(name).read_bytes())
        try:
            cfg = resolve(name)
            rep = run_scenario(cfg, out_dir=out_dir, write=write, tolerance_override=tolerance_override)
        except QHError as exc:
            errors.append(f"{name}: {exc}")
            checks.append(CheckResult(f"{name}/run", "upper", None, 0.0, "fail"))
            continue
        if rep.error:
            errors.append(f"{name}: {rep.error}")
        for c in rep.checks:
            checks.append(CheckResult(f"{name}/{c.name}", c.kind, c.value, c.tolerance, c.verdict))
    for name, kind, tol, fn in GLOBAL_CHECKS:
        if tolerance_override is not None and kind == "upper":
            tol = tolerance_override
        try:
            checks.append(CheckResult.judge(name, kind, fn(), tol))
        except QHError as exc:
            errors.append(f"{name}: {exc}")
            checks.append(CheckResult(name, kind, None, tol, "fail"))
    prov = {"scenario_sha256": digest.hexdigest(), "grid": None, "code_version": __version__}
    report = ResidualReport("verify", "all", checks, prov, "; ".join(errors) or None, timestamp=_now())
    if write:
        write_json(output_dir(None, out_dir) / "verify" / "report.json", report.to_dict())
    return report


def summary(report: ResidualReport) -> str:
    """One line per check, then the overall verdict."""
    width = max(len(c.name) for c in report.checks)
    lines = []
    for c in report.checks:
        value = "-" if c.value is None else f"{c.value:.3e}"
        rel = "<=" if c.kind == "upper" else ">="
        lines.append(f"{c.verdict.upper():7s} {c.name:{width}s}  {value:>10s} {rel} {c.tolerance:.1e}")
    passed = sum(c.verdict == "pass" for c in report.checks)
    lines.append(f"{passed}/{len(report.checks)} checks pass; verdict: {report.verdict}")
    if report.error:
        lines.append(f"errors: {report.error}")
    return "\n".join(lines)

