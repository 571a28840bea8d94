"""Strict JSON scenario configuration.

A scenario file looks like::

    {
      "name": "paper-spinchain-s1",
      "model": "spinchain",
      "params": {"family": "s1", "delta0": 1.0, "lambda": 1.0},
      "grid": {"t0": 0.0, "t1": 1.0, "steps": 1000},
      "tolerances": {"metric_ode": 1e-6},
      "checks": ["metric_ode", "det_drift"],
      "outputs": "out"
    }

Unknown keys anywhere are rejected with the offending path. ``checks``
defaults to every check that applies to the model; ``tolerances`` overrides
the catalog defaults per check.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .errors import ConfigInvalid
from .io import matrix_from_json
from .propagator import TimeGrid
from .spinchain import FAMILY_ALIASES, MAX_SITES, closed_family
from .timefunc import Constant, TimeFunction, from_dict, parse_complex

MODELS = ("oscillator", "spinchain")
TOP_KEYS = {"name", "description", "model", "params", "grid", "tolerances", "checks", "outputs"}
GRID_KEYS = {"t0", "t1", "steps"}


class CheckSpec(NamedTuple):
    # "upper": pass iff value <= tolerance; "lower": pass iff value >= tolerance
    kind: str
    tolerance: float
    doc: str


OSCILLATOR_CHECKS = {
    "constrain_residual": CheckSpec("upper", 1e-8, "|alpha + omega gamma + i gamma'| with gamma' by finite differences"),
    "hermiticity_h": CheckSpec("upper", 1e-10, "||h - h^dagger||_F of the Hermitian counterpart"),
    "offdiag_h": CheckSpec("upper", 1e-10, "off-diagonal Frobenius norm of h"),
    "imag_f": CheckSpec("upper", 1e-12, "|Im f|"),
    "tdse_phi": CheckSpec("upper", 1e-6, "TDSE residual of phi against h on interior nodes"),
    "tdse_psi": CheckSpec("upper", 1e-5, "TDSE residual of Psi = eta^-1 phi against H"),
    "propagated_phi": CheckSpec("upper", 1e-6, "||u(t,0) phi(0) - phi(t)|| with u from midpoint exponentials"),
    "unitarity": CheckSpec("upper", 1e-8, "||u^dagger u - I||_F"),
    "conservation": CheckSpec("upper", 1e-8, "drift of <Psi|rho Psi>"),
    "quadrature_X": CheckSpec("upper", 1e-8, "||eta^-1 x eta - X|| on the interior block"),
    "quadrature_P": CheckSpec("upper", 1e-8, "||eta^-1 p eta - P|| on the interior block"),
    "htilde": CheckSpec("upper", 1e-8, "||eta^-1 h eta - Htilde|| on the interior block"),
    "htilde_relation": CheckSpec("upper", 1e-8, "||H + i eta^-1 eta' - Htilde|| on the interior block"),
    "dyson_counterpart": CheckSpec("upper", 1e-8, "||eta H eta^-1 + i eta' eta^-1 - h|| on the interior block"),
    "spectrum_htilde": CheckSpec("upper", 1e-7, "lowest eigenvalues of Htilde against omega n + f"),
}

FAMILY_CHECKS = {
    "positivity": CheckSpec("lower", 1e-10, "min eigenvalue of rho(t0)"),
    "inadmissible": CheckSpec("upper", 1e-10, "min eigenvalue of rho(t0) (expected not positive)"),
    "det_formula": CheckSpec("upper", 1e-12, "|det rho(0) - listed quadratic in delta0|"),
    "kappa_ode": CheckSpec("upper", 1e-6, "RK4 kappa against the closed form"),
    "constraint_residual": CheckSpec("upper", 1e-8, "constraint residual of the integrated entries"),
    "metric_entries": CheckSpec("upper", 1e-8, "integrated entries against the closed-form metric"),
    "quasi_residual": CheckSpec("upper", 1e-10, "||H^dagger rho - rho H - i rho'||_F for the closed-form metric"),
    "metric_ode": CheckSpec("upper", 1e-6, "RK4 metric against the closed form, entrywise"),
    "det_drift": CheckSpec("upper", 1e-8, "drift of det rho along the RK4 metric"),
    "det_rho": CheckSpec("upper", 1e-12, "|det rho(t) - det rho(0)| in extended precision"),
    "eta_squared": CheckSpec("upper", 1e-12, "||eta^2 - rho||_F of the explicit map"),
    "dyson_residual": CheckSpec("upper", 1e-10, "||h - eta H eta^-1 - i eta' eta^-1||_F"),
    "unitarity": CheckSpec("upper", 1e-8, "||u^dagger u - I||_F for the explicit h"),
    "conservation": CheckSpec("upper", 1e-8, "drift of <Psi|rho Psi> along Psi = U(t,t0) Psi0"),
    "conservation_direct": CheckSpec("upper", 1e-8, "drift of <Psi|rho Psi> along direct RK4 for H"),
    "tdse_mapped": CheckSpec("upper", 1e-5, "TDSE residual of the mapped Psi against H"),
    "metric_unitarity": CheckSpec("upper", 1e-7, "||U^dagger rho(t) U - rho(t0)||_F"),
    "control_nonunitarity": CheckSpec("lower", 1e-2, "drift of <Psi|Psi> without the metric"),
}

GENERAL_CHECKS = {
    "metric_quasi_fd": CheckSpec("upper", 1e-6, "quasi-Hermiticity residual with rho' by finite differences"),
    "hermitian_drift": CheckSpec("upper", 1e-10, "largest anti-Hermitian part removed from rho per step"),
    "det_drift": FAMILY_CHECKS["det_drift"],
    "min_eig": CheckSpec("lower", 1e-10, "smallest eigenvalue of rho along the trajectory"),
    "conservation_direct": FAMILY_CHECKS["conservation_direct"],
    "control_nonunitarity": FAMILY_CHECKS["control_nonunitarity"],
}

# checks that need the explicit Hermitian map of the tan family
EXPLICIT_CHECKS = {"eta_squared", "dyson_residual", "unitarity", "conservation", "tdse_mapped",
                   "metric_unitarity"}
# checks whose initial data sit at t = 0
ORIGIN_CHECKS = {"kappa_ode", "constraint_residual", "metric_entries"}


def catalog(model: str, mode: str | None = None) -> dict[str, CheckSpec]:
    if model == "oscillator":
        return OSCILLATOR_CHECKS
    return FAMILY_CHECKS if mode == "family" else GENERAL_CHECKS


@dataclass(frozen=True)
class OscillatorConfig:
    omega: TimeFunction
    alpha: TimeFunction
    beta: TimeFunction | None
    gamma0: complex
    dim: int
    buffer: int
    theta0: complex
    phi0: float


@dataclass(frozen=True)
class SpinChainConfig:
    N: int
    lam: TimeFunction
    kappa: TimeFunction | None
    family: str | None
    delta0: float
    rho0: np.ndarray | None
    psi0: np.ndarray

    @property
    def mode(self) -> str:
        return "family" if self.family else "general"


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    model: str
    params: Any
    grid: TimeGrid
    tolerances: dict
    checks: tuple
    outputs: str | None
    raw: dict = field(repr=False, compare=False)

    @property
    def mode(self) -> str | None:
        return getattr(self.params, "mode", None)

    def spec(self, check: str) -> CheckSpec:
        base = catalog(self.model, self.mode)[check]
        return base._replace(tolerance=self.tolerances.get(check, base.tolerance))

    def digest(self) -> str:
        """sha256 of the canonical (sorted-key, compact) JSON of the scenario."""
        text = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _reject_unknown(raw: dict, allowed, path: str) -> None:
    for key in raw:
        if key not in allowed:
            raise ConfigInvalid(f"{path}.{key}" if path else key, "unknown key")


def _number(raw, path, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigInvalid(path, "expected a number")
    if not math.isfinite(raw):
        raise ConfigInvalid(path, "expected a finite number")
    if integer:
        if int(raw) != raw:
            raise ConfigInvalid(path, "expected an integer")
        return int(raw)
    return float(raw)


def _grid(raw) -> TimeGrid:
    if not isinstance(raw, dict):
        raise ConfigInvalid("grid", "expected {t0, t1, steps}")
    _reject_unknown(raw, GRID_KEYS, "grid")
    for key in GRID_KEYS:
        if key not in raw:
            raise ConfigInvalid(f"grid.{key}", "missing")
    t0 = _number(raw["t0"], "grid.t0")
    t1 = _number(raw["t1"], "grid.t1")
    steps = _number(raw["steps"], "grid.steps", integer=True)
    if t1 <= t0:
        raise ConfigInvalid("grid.t1", "must exceed grid.t0")
    if steps < 4:
        raise ConfigInvalid("grid.steps", "need at least 4 steps")
    return TimeGrid(t0, t1, steps)


def _oscillator(raw: dict) -> OscillatorConfig:
    _reject_unknown(raw, {"omega", "alpha", "beta", "gamma0", "dim", "buffer", "theta0", "phi0"}, "params")
    for key in ("omega", "alpha"):
        if key not in raw:
            raise ConfigInvalid(f"params.{key}", "missing")
    dim = _number(raw.get("dim", 40), "params.dim", integer=True)
    if dim < 8:
        raise ConfigInvalid("params.dim", "must be at least 8")
    buffer = _number(raw.get("buffer", max(10, dim // 4)), "params.buffer", integer=True)
    if not 0 <= buffer < dim:
        raise ConfigInvalid("params.buffer", f"must be in [0, {dim})")
    beta = raw.get("beta")
    return OscillatorConfig(
        omega=from_dict(raw["omega"], "params.omega"),
        alpha=from_dict(raw["alpha"], "params.alpha"),
        beta=None if beta is None else from_dict(beta, "params.beta"),
        gamma0=parse_complex(raw.get("gamma0", 0.0), "params.gamma0"),
        dim=dim,
        buffer=buffer,
        theta0=parse_complex(raw.get("theta0", 0.5), "params.theta0"),
        phi0=_number(raw.get("phi0", 0.0), "params.phi0"),
    )


def _spinchain(raw: dict) -> SpinChainConfig:
    _reject_unknown(raw, {"N", "lambda", "kappa", "family", "delta0", "rho0", "psi0"}, "params")
    n = _number(raw.get("N", 1), "params.N", integer=True)
    if not 1 <= n <= MAX_SITES:
        raise ConfigInvalid("params.N", f"must be in 1..{MAX_SITES}")
    lam = from_dict(raw["lambda"], "params.lambda") if "lambda" in raw else Constant(1.0)
    family = raw.get("family")
    if family is not None:
        if not isinstance(family, str) or FAMILY_ALIASES.get(family, family) not in FAMILY_ALIASES.values():
            raise ConfigInvalid("params.family", f"unknown family {family!r}")
        family = FAMILY_ALIASES.get(family, family)
        if n != 1:
            raise ConfigInvalid("params.N", "closed-form families need N = 1")
        for key in ("kappa", "rho0"):
            if key in raw:
                raise ConfigInvalid(f"params.{key}", "fixed by the family; remove it")
        kappa = None
        rho0 = None
        delta0 = _number(raw.get("delta0", 1.0), "params.delta0")
    else:
        for key in ("kappa", "rho0"):
            if key not in raw:
                raise ConfigInvalid(f"params.{key}", "missing (required without a family)")
        if "delta0" in raw:
            raise ConfigInvalid("params.delta0", "only meaningful with a family")
        kappa = from_dict(raw["kappa"], "params.kappa")
        rho0 = matrix_from_json(raw["rho0"], "params.rho0")
        if rho0.shape[0] != 2**n:
            raise ConfigInvalid("params.rho0.dim", f"expected {2**n} for N = {n}")
        delta0 = float("nan")
    dim = 2**n
    if "psi0" in raw:
        vals = raw["psi0"]
        if not isinstance(vals, list) or len(vals) != dim:
            raise ConfigInvalid("params.psi0", f"expected a list of {dim} amplitudes")
        psi0 = np.array([parse_complex(v, f"params.psi0[{i}]") for i, v in enumerate(vals)])
        if not np.any(psi0):
            raise ConfigInvalid("params.psi0", "must be nonzero")
    else:
        psi0 = np.zeros(dim, dtype=complex)
        psi0[0] = 1.0
    return SpinChainConfig(n, lam, kappa, family, delta0, rho0, psi0)


def _checks(raw, cfg_model, mode, params, grid) -> tuple:
    table = catalog(cfg_model, mode)
    if raw is None:
        names = list(table)
        if mode == "family":
            # the default set is what the family supports
            admissible = params.family == "tan"
            names = [c for c in names if c != ("inadmissible" if admissible else "positivity")]
            if not admissible:
                names = [c for c in names if c not in EXPLICIT_CHECKS]
            if grid.t0 != 0.0:
                names = [c for c in names if c not in ORIGIN_CHECKS]
        return tuple(names)
    if not isinstance(raw, list) or not raw:
        raise ConfigInvalid("checks", "expected a non-empty list of check names")
    seen = []
    for i, name in enumerate(raw):
        if name not in table:
            raise ConfigInvalid(f"checks[{i}]", f"unknown check {name!r} for this model")
        if name in seen:
            raise ConfigInvalid(f"checks[{i}]", f"duplicate check {name!r}")
        if mode == "family":
            if name in EXPLICIT_CHECKS and params.family != "tan":
                raise ConfigInvalid(f"checks[{i}]", f"{name} needs the explicit map of the tan family")
            if name in ORIGIN_CHECKS and grid.t0 != 0.0:
                raise ConfigInvalid(f"checks[{i}]", f"{name} integrates from t=0; set grid.t0 = 0")
        seen.append(name)
    return tuple(seen)


def parse_config(raw: dict, source: str = "<scenario>") -> ScenarioConfig:
    """Validate a decoded scenario. Fails before any computation."""
    if not isinstance(raw, dict):
        raise ConfigInvalid("<root>", "expected a JSON object")
    raw = copy.deepcopy(raw)
    _reject_unknown(raw, TOP_KEYS, "")
    model = raw.get("model")
    if model not in MODELS:
        raise ConfigInvalid("model", f"expected one of {', '.join(MODELS)}, got {model!r}")
    name = raw.get("name", Path(source).stem)
    if not isinstance(name, str) or not name or "/" in name:
        raise ConfigInvalid("name", "expected a non-empty name without '/'")
    if "grid" not in raw:
        raise ConfigInvalid("grid", "missing")
    grid = _grid(raw["grid"])
    p = raw.get("params", {})
    if not isinstance(p, dict):
        raise ConfigInvalid("params", "expected an object")
    params = _oscillator(p) if model == "oscillator" else _spinchain(p)
    mode = getattr(params, "mode", None)
    checks = _checks(raw.get("checks"), model, mode, params, grid)

    tol_raw = raw.get("tolerances", {})
    if not isinstance(tol_raw, dict):
        raise ConfigInvalid("tolerances", "expected an object")
    table = catalog(model, mode)
    tolerances = {}
    for key, val in tol_raw.items():
        if key not in table:
            raise ConfigInvalid(f"tolerances.{key}", "unknown check")
        val = _number(val, f"tolerances.{key}")
        if val <= 0:
            raise ConfigInvalid(f"tolerances.{key}", "must be positive")
        tolerances[key] = val

    outputs = raw.get("outputs")
    if outputs is not None and not isinstance(outputs, str):
        raise ConfigInvalid("outputs", "expected a directory path")
    if "description" in raw and not isinstance(raw["description"], str):
        raise ConfigInvalid("description", "expected a string")

    # singular coefficients must stay clear of the grid
    if model == "oscillator":
        if grid.t0 != 0.0:
            raise ConfigInvalid("grid.t0", "gamma(0) is an initial value; the grid must start at 0")
        grid.guard_functions(params.omega, params.alpha, params.beta)
    else:
        kappa = closed_family(params.family, params.delta0).kappa_fn if params.family else params.kappa
        grid.guard_functions(params.lam, kappa)
    return ScenarioConfig(name, model, params, grid, tolerances, checks, outputs, raw)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(str(path), f"invalid JSON: {exc}") from None
    return parse_config(raw, source=str(path))
