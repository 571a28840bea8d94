"""Time evolution on uniform grids.

* ``evolve_hermitian``: time-ordered propagator ``u(t, t0)`` of a Hermitian
  generator as a product of midpoint exponentials.
* ``evolve_metric``: the metric ``rho(t)`` from ``i d rho/dt = H^dagger rho - rho H``
  with classical RK4.
* ``map_evolution``: ``U(t, t0) = eta^-1(t) u(t, t0) eta(t0)``.
* ``tdse_residual`` / ``conservation_series``: diagnostics on state trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .densemat import DEFAULT_TOL, expm, hermitian_eigen, hermiticity_defect, posdef_check
from .errors import GridTooShort, NotHermitian, PositivityLost, SingularityOnGrid
from .quadrature import derivative4
from .relations import eta_inverse, rho_inner

MatrixFunction = Callable[[float], np.ndarray]

SINGULARITY_MARGIN = 1e-2


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    t1: float
    steps: int

    def __post_init__(self):
        if not (math.isfinite(self.t0) and math.isfinite(self.t1)) or self.t1 <= self.t0:
            raise ValueError(f"need finite t1 > t0, got [{self.t0}, {self.t1}]")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def dt(self) -> float:
        return (self.t1 - self.t0) / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.steps + 1)

    def with_steps(self, steps: int) -> TimeGrid:
        return TimeGrid(self.t0, self.t1, steps)

    def guard(self, poles: Sequence[float], margin: float = SINGULARITY_MARGIN) -> None:
        """Fail if any pole lies inside the grid span widened by ``margin``."""
        bad = [p for p in poles if self.t0 - margin <= p <= self.t1 + margin]
        if bad:
            raise SingularityOnGrid(
                f"coefficient singularity at t={bad[0]:.6g} within margin {margin} "
                f"of grid [{self.t0}, {self.t1}]"
            )

    def guard_functions(self, *functions, margin: float = SINGULARITY_MARGIN) -> None:
        poles = [p for f in functions if f is not None
                 for p in f.singularities(self.t0 - margin, self.t1 + margin)]
        self.guard(poles, margin)


@dataclass(frozen=True)
class Trajectory:
    """Values on every node of a grid; ``values[k]`` belongs to ``grid.times[k]``."""

    grid: TimeGrid
    values: np.ndarray
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.values.shape[0] != self.grid.steps + 1:
            raise ValueError(
                f"{self.values.shape[0]} values for a grid of {self.grid.steps + 1} nodes"
            )

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, k):
        return self.values[k]


class Series(NamedTuple):
    t: np.ndarray
    values: np.ndarray

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


class Conservation(NamedTuple):
    t: np.ndarray
    values: np.ndarray
    drift: float


def evolve_hermitian(h_of_t: MatrixFunction, grid: TimeGrid,
                     tol: float = DEFAULT_TOL) -> Trajectory:
    """Time-ordered propagator ``u(t_k, t0)`` by midpoint exponentials.

    Each step is ``expm(-i dt h(t_mid))``, unitary to rounding, so the
    composition ``u(t2, t0) = u(t2, t1) u(t1, t0)`` holds exactly at shared
    nodes. ``info`` carries the unitarity defect ``||u^dagger u - I||_F``
    (per node and maximum) and ``C = max defect / (dt^2 (t1 - t0))``.
    """
    times = grid.times
    dt = grid.dt
    h0 = np.asarray(h_of_t(times[0] + 0.5 * dt), dtype=complex)
    dim = h0.shape[0]
    out = np.empty((grid.steps + 1, dim, dim), dtype=complex)
    u = np.eye(dim, dtype=complex)
    out[0] = u
    for k in range(grid.steps):
        tm = times[k] + 0.5 * dt
        hm = h0 if k == 0 else np.asarray(h_of_t(tm), dtype=complex)
        defect = hermiticity_defect(hm)
        if defect > tol:
            raise NotHermitian(f"generator not Hermitian at t={tm:.6g} (defect {defect:.3e})")
        hm = 0.5 * (hm + hm.conj().T)
        u = expm(-1j * dt * hm) @ u
        out[k + 1] = u
    eye = np.eye(dim)
    defects = np.linalg.norm(np.conj(np.swapaxes(out, 1, 2)) @ out - eye, axis=(1, 2))
    span = grid.t1 - grid.t0
    info = {
        "unitarity_defect": defects,
        "max_unitarity_defect": float(defects.max()),
        "unitarity_constant": float(defects.max() / (dt * dt * span)),
    }
    return Trajectory(grid, out, info)


def rk4(rhs, y0, grid: TimeGrid, after_step=None, dtype=complex) -> np.ndarray:
    """Fixed-step classical Runge-Kutta on ``grid``; returns the state at every node.

    ``after_step(t, y)`` may replace the state after each step (projection,
    monitoring) and may raise to abort.
    """
    times = grid.times
    dt = grid.dt
    out = np.empty((grid.steps + 1,) + np.shape(y0), dtype=dtype)
    y = np.array(y0, dtype=dtype)
    out[0] = y
    for k in range(grid.steps):
        t = times[k]
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if after_step is not None:
            y = after_step(times[k + 1], y)
        out[k + 1] = y
    return out


def evolve_metric(H_of_t: MatrixFunction, rho0, grid: TimeGrid,
                  tol: float = DEFAULT_TOL, check_positivity: bool = True) -> Trajectory:
    """Integrate ``d rho/dt = -i (H^dagger rho - rho H)`` with classical RK4.

    After every step ``rho`` is replaced by its Hermitian part; the largest
    anti-Hermitian part removed is reported as ``info["hermitian_drift"]``.
    The minimum eigenvalue is tracked per node (``info["min_eig"]``) and
    ``PositivityLost`` is raised as soon as it drops to ``tol``.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    ok, lam = posdef_check(rho0, tol)
    if check_positivity and not ok:
        raise PositivityLost(grid.t0, lam)
    min_eig = [lam]
    drift = [0.0]

    def rhs(t, rho):
        H = np.asarray(H_of_t(t), dtype=complex)
        return -1j * (H.conj().T @ rho - rho @ H)

    def symmetrize(t, rho):
        drift.append(0.5 * hermiticity_defect(rho))
        rho = 0.5 * (rho + rho.conj().T)
        if check_positivity:
            lam = float(hermitian_eigen(rho, np.inf).eigenvalues[0])
            min_eig.append(lam)
            if lam <= tol:
                raise PositivityLost(t, lam)
        return rho

    values = rk4(rhs, rho0, grid, symmetrize)
    info = {"hermitian_drift": float(max(drift))}
    if check_positivity:
        info["min_eig"] = np.asarray(min_eig)
    dets = np.linalg.det(values)
    info["det"] = dets
    info["det_drift"] = float(np.abs(dets - dets[0]).max())
    return Trajectory(grid, values, info)


def evolve_state(H_of_t: MatrixFunction, psi0, grid: TimeGrid) -> Trajectory:
    """Direct RK4 solution of ``i dPsi/dt = H(t) Psi`` (no metric, no mapping)."""
    def rhs(t, psi):
        return -1j * (np.asarray(H_of_t(t), dtype=complex) @ psi)

    return Trajectory(grid, rk4(rhs, psi0, grid))


def map_evolution(u_traj: Trajectory, eta_of_t: MatrixFunction,
                  eta_inv_of_t: MatrixFunction | None = None) -> Trajectory:
    """``U(t, t0) = eta^-1(t) u(t, t0) eta(t0)`` on every node."""
    times = u_traj.times
    eta0 = np.asarray(eta_of_t(times[0]), dtype=complex)
    out = np.empty_like(u_traj.values)
    out[0] = np.eye(eta0.shape[0])
    for k in range(1, len(times)):
        t = times[k]
        inv = eta_inverse(eta_of_t(t)) if eta_inv_of_t is None else eta_inv_of_t(t)
        out[k] = inv @ u_traj.values[k] @ eta0
    return Trajectory(u_traj.grid, out)


def apply(op_traj: Trajectory, psi0) -> Trajectory:
    """States ``op(t_k) psi0`` for a propagator trajectory."""
    psi0 = np.asarray(psi0, dtype=complex)
    return Trajectory(op_traj.grid, op_traj.values @ psi0)


def tdse_residual(traj: Trajectory, H_of_t: MatrixFunction) -> Series:
    """``||H(t) Psi(t) - i dPsi/dt||_2`` on interior nodes.

    The derivative is the fourth-order central difference; the two nodes at
    each end have no central stencil and are excluded.
    """
    if len(traj) < 5:
        raise GridTooShort(f"need at least 5 nodes, got {len(traj)}")
    psi = traj.values
    dpsi = derivative4(psi, traj.grid.dt, edges=False)
    times = traj.times
    res = np.array([
        np.linalg.norm(np.asarray(H_of_t(times[k]), dtype=complex) @ psi[k] - 1j * dpsi[k])
        for k in range(2, len(times) - 2)
    ])
    return Series(times[2:-2], res)


def conservation_series(traj: Trajectory, rho_of_t: MatrixFunction) -> Conservation:
    """``<Psi(t)|rho(t) Psi(t)>`` per node and its largest drift from the start."""
    times = traj.times
    vals = np.array([rho_inner(traj.values[k], traj.values[k], rho_of_t(times[k])).real
                     for k in range(len(times))])
    return Conservation(times, vals, float(np.abs(vals - vals[0]).max()))
