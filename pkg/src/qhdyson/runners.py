"""Model pipelines behind the scenario checks.

Each runner computes lazily and caches, so a scenario that asks for several
checks sharing one trajectory integrates it once. ``value(name)`` returns
the scalar compared against the check tolerance; ``columns()`` returns the
per-node series computed so far, ready for CSV.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .config import ScenarioConfig
from .densemat import posdef_check, spectrum
from .io import matrix_columns
from .oscillator import (
    CoherentSolution,
    OscillatorParams,
    build_eta,
    build_H,
    eta_dot,
    gamma_solve,
    ground_solution,
    h_solved,
    hermitian_form,
    interior,
    mapped_solution,
    quadrature_operators,
    quadratures_and_htilde,
)
from .propagator import (
    Trajectory,
    apply,
    evolve_hermitian,
    evolve_metric,
    evolve_state,
    map_evolution,
    tdse_residual,
)
from .quadrature import derivative4
from .relations import MetricPair, OperatorTriple, dyson_residual, quasi_residual
from .spinchain import (
    SpinChainParams,
    build_hamiltonian,
    closed_family,
    explicit_triple,
    family_det,
    h1,
    kappa_ode_solve,
    metric_entries,
    quadratic_det0,
)

MAX_PROBES = 100


def _expectations(psi: np.ndarray, rho: np.ndarray | None) -> np.ndarray:
    """``<psi_k | rho_k psi_k>`` per node; ``rho=None`` means the identity."""
    if rho is None:
        return np.einsum("ki,ki->k", psi.conj(), psi).real
    return np.einsum("ki,kij,kj->k", psi.conj(), rho, psi).real


def _drift(vals: np.ndarray) -> float:
    return float(np.abs(vals - vals[0]).max())


def _padded(series, n: int) -> np.ndarray:
    # interior-node residuals back onto every node, NaN at the ends
    out = np.full(n, np.nan)
    out[2:-2] = series.values
    return out


class Runner:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.times = cfg.grid.times
        self._columns: dict[str, np.ndarray] = {}

    def value(self, name: str) -> float:
        return float(getattr(self, f"check_{name}")())

    def columns(self) -> dict[str, np.ndarray]:
        return dict(self._columns)

    def _record(self, **cols) -> None:
        for k, v in cols.items():
            self._columns.setdefault(k, np.asarray(v))


class FamilyRunner(Runner):
    """``N = 1`` chain on one of the closed-form solution families."""

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        p = cfg.params
        self.fam = closed_family(p.family, p.delta0)
        self.lam = p.lam
        self.psi0 = p.psi0 / np.linalg.norm(p.psi0)
        t = self.times
        self._record(kappa=np.asarray(self.fam.kappa(t), dtype=float))
        self._record(**matrix_columns("rho", self.rho_closed))

    def H(self, t: float) -> np.ndarray:
        return h1(t, complex(self.lam(t)), float(self.fam.kappa(t)))

    @cached_property
    def rho_closed(self) -> np.ndarray:
        return self.fam.metric(self.times)

    @cached_property
    def min_eig0(self) -> float:
        return posdef_check(self.fam.metric(self.grid.t0)).min_eigenvalue

    @property
    def admissible(self) -> bool:
        return self.min_eig0 > 0

    @cached_property
    def entries(self):
        t = self.times
        f = self.fam
        return metric_entries(f.kappa_dot(t), f.kappa(t), f.alpha0, f.delta0, f.gamma0, self.grid)

    @cached_property
    def metric_traj(self) -> Trajectory:
        traj = evolve_metric(self.H, self.fam.metric(self.grid.t0), self.grid,
                             check_positivity=self.admissible)
        self._record(**matrix_columns("rho_ode", traj.values))
        if "min_eig" in traj.info:
            self._record(min_eig_rho=traj.info["min_eig"])
        return traj

    def triple(self, t: float):
        return explicit_triple(t, float(np.real(self.lam(t))), self.fam.delta0)

    @cached_property
    def triples(self) -> list:
        return [self.triple(t) for t in self.times]

    @cached_property
    def u(self) -> Trajectory:
        u = evolve_hermitian(lambda t: self.triple(t).h, self.grid)
        self._record(unitarity_defect=u.info["unitarity_defect"])
        return u

    @cached_property
    def U(self) -> Trajectory:
        return map_evolution(self.u, lambda t: self.triple(t).eta)

    @cached_property
    def psi_mapped(self) -> Trajectory:
        return apply(self.U, self.psi0)

    @cached_property
    def psi_direct(self) -> Trajectory:
        return evolve_state(self.H, self.psi0, self.grid)

    # -- checks

    def check_positivity(self):
        return self.min_eig0

    def check_inadmissible(self):
        return self.min_eig0

    def check_det_formula(self):
        return abs(self.fam.det0 - quadratic_det0(self.fam.kind, self.fam.delta0))

    def check_kappa_ode(self):
        f = self.fam
        sol = kappa_ode_solve(f.delta0, f.alpha0, f.gamma0, f.kappa0, f.kappadot0, self.grid)
        self._record(kappa_ode=sol.kappa)
        return np.abs(sol.kappa - f.kappa(self.times)).max()

    def check_constraint_residual(self):
        res = self.entries.constraint_residual
        self._record(constraint_residual=res)
        return np.abs(res).max()

    def check_metric_entries(self):
        return np.abs(self.entries.rho.values - self.rho_closed).max()

    def check_quasi_residual(self):
        rho_dot = self.fam.metric_dot(self.times)
        res = np.array([np.linalg.norm(quasi_residual(self.H(t), MetricPair(r, rd)))
                        for t, r, rd in zip(self.times, self.rho_closed, rho_dot)])
        self._record(quasi_residual=res)
        return res.max()

    def check_metric_ode(self):
        return np.abs(self.metric_traj.values - self.rho_closed).max()

    def check_det_drift(self):
        self._record(det_rho_ode=self.metric_traj.info["det"].real)
        return self.metric_traj.info["det_drift"]

    def check_det_rho(self):
        dets = np.array([family_det(self.fam, t) for t in self.times])
        self._record(det_rho=dets)
        return np.abs(dets - quadratic_det0(self.fam.kind, self.fam.delta0)).max()

    def check_eta_squared(self):
        return max(np.linalg.norm(tr.eta @ tr.eta - tr.rho) for tr in self.triples)

    def check_dyson_residual(self):
        return max(np.linalg.norm(dyson_residual(tr.h, OperatorTriple(tr.H, tr.eta, tr.eta_dot)))
                   for tr in self.triples)

    def check_unitarity(self):
        return self.u.info["max_unitarity_defect"]

    def check_conservation(self):
        vals = _expectations(self.psi_mapped.values, self.rho_closed)
        self._record(prob_rho=vals)
        return _drift(vals)

    def check_conservation_direct(self):
        vals = _expectations(self.psi_direct.values, self.rho_closed)
        self._record(prob_rho_direct=vals)
        return _drift(vals)

    def check_tdse_mapped(self):
        res = tdse_residual(self.psi_mapped, self.H)
        self._record(tdse_mapped=_padded(res, len(self.times)))
        return res.max_abs()

    def check_metric_unitarity(self):
        U = self.U.values
        rho0 = self.rho_closed[0]
        gram = np.conj(np.swapaxes(U, 1, 2)) @ self.rho_closed @ U
        return np.linalg.norm(gram - rho0, axis=(1, 2)).max()

    def check_control_nonunitarity(self):
        vals = _expectations(self.psi_direct.values, None)
        self._record(prob_identity=vals)
        return _drift(vals)


class GeneralRunner(Runner):
    """Chain of ``N`` sites with arbitrary couplings; metric from the RK4 flow."""

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        p = cfg.params
        self.params = SpinChainParams(p.N, p.lam, p.kappa)
        self.rho0 = p.rho0
        self.psi0 = p.psi0 / np.linalg.norm(p.psi0)

    def H(self, t: float) -> np.ndarray:
        return build_hamiltonian(self.params, t)

    @cached_property
    def metric_traj(self) -> Trajectory:
        traj = evolve_metric(self.H, self.rho0, self.grid)
        self._record(**matrix_columns("rho", traj.values))
        self._record(det_rho=traj.info["det"].real, min_eig_rho=traj.info["min_eig"])
        return traj

    @cached_property
    def psi_direct(self) -> Trajectory:
        return evolve_state(self.H, self.psi0, self.grid)

    def check_metric_quasi_fd(self):
        rho = self.metric_traj.values
        rho_dot = derivative4(rho, self.grid.dt)
        res = np.array([np.linalg.norm(quasi_residual(self.H(t), MetricPair(r, rd)))
                        for t, r, rd in zip(self.times, rho, rho_dot)])
        self._record(quasi_residual_fd=res)
        return res.max()

    def check_hermitian_drift(self):
        return self.metric_traj.info["hermitian_drift"]

    def check_det_drift(self):
        return self.metric_traj.info["det_drift"]

    def check_min_eig(self):
        return float(np.min(self.metric_traj.info["min_eig"]))

    def check_conservation_direct(self):
        vals = _expectations(self.psi_direct.values, self.metric_traj.values)
        self._record(prob_rho=vals)
        return _drift(vals)

    def check_control_nonunitarity(self):
        vals = _expectations(self.psi_direct.values, None)
        self._record(prob_identity=vals)
        return _drift(vals)


class OscillatorRunner(Runner):
    """Solved family ``beta = -conj(alpha)`` with the coherent ground solution."""

    def __init__(self, cfg: ScenarioConfig):
        super().__init__(cfg)
        p = cfg.params
        self.params = OscillatorParams(p.omega, p.alpha, p.beta, p.dim, p.gamma0)
        self.dim = p.dim
        self.buffer = p.buffer
        self.gs = gamma_solve(self.params, self.grid)
        self.gamma = self.gs.nodes("gamma")
        self.gamma_dot = self.gs.nodes("gamma_dot")
        self.omega = np.asarray(p.omega(self.times), dtype=float)
        self.f = self.gs.nodes("f")
        self.solution = CoherentSolution(p.theta0, p.phi0, self.gs)
        self._record(gamma_re=self.gamma.real, gamma_im=self.gamma.imag,
                     gamma_dot_re=self.gamma_dot.real, gamma_dot_im=self.gamma_dot.imag,
                     chi=self.gs.nodes("chi"), f=self.f, f_integral=self.gs.nodes("f_integral"))

    def h(self, t: float) -> np.ndarray:
        return h_solved(float(self.params.omega(t)), float(self.gs.f[self.gs.index(t)]), self.dim)

    def H(self, t: float) -> np.ndarray:
        return build_H(self.params, t)

    @cached_property
    def probes(self) -> np.ndarray:
        """Nodes where the operator identities are evaluated (at most ``MAX_PROBES + 1``)."""
        n = min(self.grid.steps, MAX_PROBES)
        return np.unique(np.linspace(0, self.grid.steps, n + 1).round().astype(int))

    @cached_property
    def forms(self) -> list:
        return [hermitian_form(self.params, g, gd, t)
                for g, gd, t in zip(self.gamma, self.gamma_dot, self.times)]

    @cached_property
    def phi(self) -> Trajectory:
        return ground_solution(self.solution, self.grid, self.dim)

    @cached_property
    def psi(self) -> Trajectory:
        return mapped_solution(self.phi, self.gs, self.dim)

    @cached_property
    def u(self) -> Trajectory:
        u = evolve_hermitian(self.h, self.grid)
        self._record(unitarity_defect=u.info["unitarity_defect"])
        return u

    @cached_property
    def identities(self) -> dict[str, float]:
        x, p = quadrature_operators(self.dim)
        b = self.buffer
        keep = self.dim - b
        out = {k: 0.0 for k in ("quadrature_X", "quadrature_P", "htilde", "htilde_relation",
                                "dyson_counterpart", "spectrum_htilde")}
        levels = np.arange(keep)
        for k in self.probes:
            t = self.times[k]
            g, gd, om, f = complex(self.gamma[k]), complex(self.gamma_dot[k]), self.omega[k], self.f[k]
            eta = build_eta(g, self.dim)
            inv = build_eta(g, self.dim, power=-1.0)
            ed = eta_dot(g, gd, self.dim)
            X, P, Ht = quadratures_and_htilde(g, gd, om, self.dim)
            h = h_solved(om, f, self.dim)
            H = self.H(t)
            vals = {
                "quadrature_X": np.linalg.norm(interior(inv @ x @ eta - X, b)),
                "quadrature_P": np.linalg.norm(interior(inv @ p @ eta - P, b)),
                "htilde": np.linalg.norm(interior(inv @ h @ eta - Ht, b)),
                "htilde_relation": np.linalg.norm(interior(H + 1j * inv @ ed - Ht, b)),
                "dyson_counterpart": np.linalg.norm(interior(eta @ H @ inv + 1j * ed @ inv - h, b)),
                "spectrum_htilde": np.abs(spectrum(Ht)[:keep] - (om * levels + f)).max(),
            }
            for key, v in vals.items():
                out[key] = max(out[key], float(v))
        return out

    # -- checks

    def check_constrain_residual(self):
        gd_fd = derivative4(self.gamma, self.grid.dt)
        alpha = np.asarray(self.params.alpha(self.times), dtype=complex)
        res = np.abs(alpha + self.omega * self.gamma + 1j * gd_fd)
        self._record(constrain_residual=res)
        return res.max()

    def check_hermiticity_h(self):
        return max(np.linalg.norm(fm.h - fm.h.conj().T) for fm in self.forms)

    def check_offdiag_h(self):
        return max(np.linalg.norm(fm.h - np.diag(np.diag(fm.h))) for fm in self.forms)

    def check_imag_f(self):
        return max(abs(fm.f.imag) for fm in self.forms)

    def check_tdse_phi(self):
        res = tdse_residual(self.phi, self.h)
        self._record(tdse_phi=_padded(res, len(self.times)))
        return res.max_abs()

    def check_tdse_psi(self):
        res = tdse_residual(self.psi, self.H)
        self._record(tdse_psi=_padded(res, len(self.times)))
        return res.max_abs()

    def check_propagated_phi(self):
        prop = self.u.values @ self.phi.values[0]
        return np.linalg.norm(prop - self.phi.values, axis=1).max()

    def check_unitarity(self):
        return self.u.info["max_unitarity_defect"]

    def check_conservation(self):
        eta = np.array([build_eta(g, self.dim) for g in self.gamma])
        vals = _expectations(self.psi.values, eta @ eta)
        self._record(prob_rho=vals)
        return _drift(vals)

    def check_quadrature_X(self):
        return self.identities["quadrature_X"]

    def check_quadrature_P(self):
        return self.identities["quadrature_P"]

    def check_htilde(self):
        return self.identities["htilde"]

    def check_htilde_relation(self):
        return self.identities["htilde_relation"]

    def check_dyson_counterpart(self):
        return self.identities["dyson_counterpart"]

    def check_spectrum_htilde(self):
        return self.identities["spectrum_htilde"]


def make_runner(cfg: ScenarioConfig) -> Runner:
    if cfg.model == "oscillator":
        return OscillatorRunner(cfg)
    return FamilyRunner(cfg) if cfg.mode == "family" else GeneralRunner(cfg)
