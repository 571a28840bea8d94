"""Non-Hermitian oscillator with linear terms on a truncated Fock space.

``H(t) = omega a^dagger a + alpha a + beta a^dagger`` with the Dyson map
``eta = exp(gamma a + lam a^dagger)``. On the branch ``lam = conj(gamma)``,
``beta = -conj(alpha)`` the Hermitian counterpart collapses to
``h = omega a^dagger a + f`` provided ``alpha + omega gamma + i gamma' = 0``,
which is solved by quadrature::

    gamma(t) = exp(i chi(t)) [gamma(0) + i int_0^t alpha(s) exp(-i chi(s)) ds]
    chi(t)   = int_0^t omega(s) ds

Truncation to ``dim`` Fock states spoils operator identities near the last
row and column, so identities are compared on the leading
``dim - buffer`` block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .densemat import hermitian_eigen
from .errors import FamilyGateFailed, QuadratureTooCoarse, TruncationTooSmall
from .propagator import TimeGrid, Trajectory
from .timefunc import TimeFunction

GATE_TOL = 1e-12
QUADRATURE_TOL = 1e-10
TAIL_TOL = 1e-12
MIN_DIM = 8


@lru_cache(maxsize=None)
def fock_operators(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation operators on ``|0>, ..., |dim-1>``."""
    if dim < 2:
        raise ValueError(f"dim must be at least 2, got {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    ad = a.conj().T.copy()
    a.setflags(write=False)
    ad.setflags(write=False)
    return a, ad


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=complex))


def quadrature_operators(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """``x = (a^dagger + a)/sqrt2`` and ``p = i (a^dagger - a)/sqrt2``."""
    a, ad = fock_operators(dim)
    return (ad + a) / math.sqrt(2), 1j * (ad - a) / math.sqrt(2)


def default_buffer(dim: int) -> int:
    return max(10, dim // 4)


def interior(m: np.ndarray, buffer: int) -> np.ndarray:
    """Leading ``(dim - buffer)`` block (or slice, for vectors)."""
    n = m.shape[0] - buffer
    if n <= 0:
        raise ValueError(f"buffer {buffer} leaves no interior in dimension {m.shape[0]}")
    return m[:n, :n] if m.ndim == 2 else m[:n]


@dataclass(frozen=True)
class OscillatorParams:
    omega: TimeFunction
    alpha: TimeFunction
    beta: TimeFunction | None = None  # None means -conj(alpha)
    dim: int = 40
    gamma0: complex = 0.0

    def __post_init__(self):
        if self.dim < MIN_DIM:
            raise ValueError(f"dim must be at least {MIN_DIM}, got {self.dim}")

    def beta_at(self, t):
        if self.beta is None:
            return -np.conj(self.alpha(t))
        return self.beta(t)


def build_H(params: OscillatorParams, t: float) -> np.ndarray:
    a, ad = fock_operators(params.dim)
    w = complex(params.omega(t))
    return w * (ad @ a) + complex(params.alpha(t)) * a + complex(params.beta_at(t)) * ad


def check_solved_family(params: OscillatorParams, times) -> None:
    """Raise unless ``omega`` is real and ``beta = -conj(alpha)`` on ``times``."""
    times = np.asarray(times, dtype=float)
    om = np.asarray(params.omega(times), dtype=complex)
    if np.abs(om.imag).max() > GATE_TOL:
        raise FamilyGateFailed("omega(t) must be real on the grid")
    mismatch = np.abs(np.asarray(params.beta_at(times)) + np.conj(params.alpha(times))).max()
    if mismatch > GATE_TOL:
        raise FamilyGateFailed(f"beta != -conj(alpha) on the grid (max gap {mismatch:.2e})")


# ---------------------------------------------------------------------------
# gamma(t)


class GammaSeries(NamedTuple):
    """``gamma`` and derived scalars sampled on the half grid (spacing ``dt/2``).

    Index ``2k`` is grid node ``k``; odd indices are interval midpoints.
    """

    grid: TimeGrid
    t: np.ndarray
    gamma: np.ndarray
    gamma_dot: np.ndarray
    chi: np.ndarray
    f: np.ndarray
    f_integral: np.ndarray
    error_estimate: float

    def index(self, t: float) -> int:
        h = 0.5 * self.grid.dt
        k = int(round((t - self.grid.t0) / h))
        if not 0 <= k < len(self.t) or abs(self.t[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"t={t!r} is not a node or midpoint of the grid")
        return k

    def at(self, t: float) -> tuple[complex, complex]:
        k = self.index(t)
        return complex(self.gamma[k]), complex(self.gamma_dot[k])

    def nodes(self, name: str) -> np.ndarray:
        return getattr(self, name)[::2]


def _simpson_pairs(y: np.ndarray, h: float) -> np.ndarray:
    # running composite Simpson over consecutive pairs of intervals
    pairs = h / 3.0 * (y[0:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
    return np.concatenate([[0.0], np.cumsum(pairs)])


def _gamma_integrals(params: OscillatorParams, grid: TimeGrid, refine: int):
    """``chi`` and ``int alpha exp(-i chi)`` on the ``dt/refine`` grid.

    Each ``dt/refine`` interval is one Simpson panel whose midpoint comes from
    a grid twice as fine; ``chi`` on that grid uses its own Simpson panels.
    """
    n_fine = 2 * refine * grid.steps
    fine = np.linspace(grid.t0, grid.t1, n_fine + 1)
    h = fine[1] - fine[0]
    quarter = np.linspace(grid.t0, grid.t1, 2 * n_fine + 1)
    om = np.asarray(params.omega(quarter), dtype=float)
    chi_fine = _simpson_pairs(om, 0.5 * h)
    integrand = np.asarray(params.alpha(fine), dtype=complex) * np.exp(-1j * chi_fine)
    integral = _simpson_pairs(integrand, h)
    return fine[::2], chi_fine[::2], integral


def gamma_solve(params: OscillatorParams, grid: TimeGrid) -> GammaSeries:
    """Closed-form ``gamma(t)`` by composite Simpson quadrature.

    ``gamma'`` is taken from ``alpha + omega gamma + i gamma' = 0`` so the
    constraint holds to rounding at every sample; the quadrature error is
    estimated by Richardson extrapolation against a halved panel width and
    must stay below ``QUADRATURE_TOL``.
    """
    if grid.t0 != 0.0:
        raise ValueError("gamma(0) is an initial value: the grid must start at t=0")
    check_solved_family(params, grid.times)
    t, chi, integral = _gamma_integrals(params, grid, refine=2)
    _, chi_c, integral_c = _gamma_integrals(params, grid, refine=1)
    gamma = np.exp(1j * chi) * (params.gamma0 + 1j * integral)
    gamma_c = np.exp(1j * chi_c) * (params.gamma0 + 1j * integral_c)
    err = float(np.abs(gamma[::2] - gamma_c).max() / 15.0)
    if err > QUADRATURE_TOL:
        raise QuadratureTooCoarse(f"Richardson estimate {err:.2e} exceeds {QUADRATURE_TOL:.0e}")
    om = np.asarray(params.omega(t), dtype=float)
    al = np.asarray(params.alpha(t), dtype=complex)
    gamma_dot = 1j * (al + om * gamma)
    f = solved_f(om, gamma, gamma_dot)
    # midpoints make every grid interval a Simpson panel
    f_int = np.concatenate([[0.0], np.cumsum(grid.dt / 6.0 * (f[0:-2:2] + 4 * f[1:-1:2] + f[2::2]))])
    f_half = np.empty_like(f)
    f_half[::2] = f_int
    f_half[1::2] = f_int[:-1] + grid.dt / 24.0 * (5 * f[0:-2:2] + 8 * f[1:-1:2] - f[2::2])
    return GammaSeries(grid, t, gamma, gamma_dot, chi, f, f_half, err)


def solved_f(omega, gamma, gamma_dot):
    """Real shift of ``h`` on the solved branch: ``omega |g|^2 + (i/2)(g' g* - g g'*)``."""
    g = np.asarray(gamma)
    gd = np.asarray(gamma_dot)
    val = omega * np.abs(g) ** 2 + 0.5j * (gd * np.conj(g) - g * np.conj(gd))
    return np.real(val)


def constraint_residual(alpha, omega, gamma, gamma_dot):
    """``alpha + omega gamma + i gamma'``; zero on the solved branch."""
    return alpha + omega * gamma + 1j * gamma_dot


# ---------------------------------------------------------------------------
# Hermitian form


class HermitianForm(NamedTuple):
    u: complex
    v: complex
    f: complex
    h: np.ndarray
    const1: complex
    const2: complex


def ufv(alpha, beta, omega, gamma, lam, gamma_dot, lam_dot):
    """Coefficients ``(u, v, f)`` of ``h = omega a^dagger a + u a + v a^dagger + f``."""
    u = alpha + omega * gamma + 1j * gamma_dot
    v = beta - omega * lam + 1j * lam_dot
    f = 0.5j * (gamma * lam_dot - gamma_dot * lam) - omega * gamma * lam - alpha * lam + beta * gamma
    return u, v, f


def hermiticity_constraints(alpha, beta, omega, gamma, lam, gamma_dot, lam_dot):
    """Residuals of the two conditions ``u = conj(v)`` and ``f = conj(f)``."""
    c = np.conj
    const1 = (alpha - c(beta) + omega * (gamma + c(lam)) + 1j * (gamma_dot + c(lam_dot)))
    const2 = (0.5j * (gamma * lam_dot - gamma_dot * lam + c(gamma) * c(lam_dot) - c(gamma_dot) * c(lam))
              + omega * (c(gamma) * c(lam) - gamma * lam)
              + c(alpha) * c(lam) - alpha * lam + beta * gamma - c(beta) * c(gamma))
    return const1, const2


def hermitian_form(params: OscillatorParams, gamma: complex, gamma_dot: complex, t: float,
                   lam: complex | None = None, lam_dot: complex | None = None) -> HermitianForm:
    """Hermitian counterpart of ``H`` for the exponential Dyson map.

    ``lam`` defaults to ``conj(gamma)`` (and ``lam_dot`` to ``conj(gamma_dot)``).
    """
    lam = np.conj(gamma) if lam is None else lam
    lam_dot = np.conj(gamma_dot) if lam_dot is None else lam_dot
    alpha = complex(params.alpha(t))
    beta = complex(params.beta_at(t))
    omega = complex(params.omega(t))
    u, v, f = ufv(alpha, beta, omega, gamma, lam, gamma_dot, lam_dot)
    const1, const2 = hermiticity_constraints(alpha, beta, omega, gamma, lam, gamma_dot, lam_dot)
    a, ad = fock_operators(params.dim)
    h = omega * (ad @ a) + u * a + v * ad + f * np.eye(params.dim)
    return HermitianForm(complex(u), complex(v), complex(f), h, complex(const1), complex(const2))


def h_solved(omega: float, f: float, dim: int) -> np.ndarray:
    """``omega a^dagger a + f`` as a (diagonal) matrix."""
    return np.diag(omega * np.arange(dim) + f).astype(complex)


# ---------------------------------------------------------------------------
# Dyson map


@lru_cache(maxsize=None)
def _x_eigen(dim: int):
    x, _ = quadrature_operators(dim)
    return hermitian_eigen(x)


def _exponent_frame(gamma: complex, dim: int):
    # gamma a + conj(gamma) a^dagger = sqrt2 |gamma| R x R^dagger, R = diag(exp(-i n arg gamma))
    r = abs(gamma)
    phase = np.exp(-1j * np.arange(dim) * np.angle(gamma))
    w, v = _x_eigen(dim)
    q = phase[:, None] * v
    return math.sqrt(2.0) * r * w, q


def build_eta(gamma: complex, dim: int, power: float = 1.0) -> np.ndarray:
    """``expm(power * (gamma a + conj(gamma) a^dagger))``; Hermitian.

    The exponent is a rotated multiple of ``x``, so one cached
    eigendecomposition of ``x`` serves every ``gamma``.
    """
    if dim < MIN_DIM:
        raise ValueError(f"dim must be at least {MIN_DIM}, got {dim}")
    if gamma == 0:
        return np.eye(dim, dtype=complex)
    w, q = _exponent_frame(complex(gamma), dim)
    eta = (q * np.exp(power * w)) @ q.conj().T
    return 0.5 * (eta + eta.conj().T)


def eta_pair(gamma: complex, dim: int) -> tuple[np.ndarray, np.ndarray]:
    return build_eta(gamma, dim), build_eta(gamma, dim, power=-1.0)


def eta_dot(gamma: complex, gamma_dot: complex, dim: int) -> np.ndarray:
    """Exact time derivative of the truncated ``eta`` (divided differences of exp)."""
    a, ad = fock_operators(dim)
    exponent_dot = gamma_dot * a + np.conj(gamma_dot) * ad
    if gamma == 0:
        w = np.zeros(dim)
        q = _x_eigen(dim).basis
    else:
        w, q = _exponent_frame(complex(gamma), dim)
    ew = np.exp(w)
    diff = w[:, None] - w[None, :]
    close = np.abs(diff) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = np.where(close, ew[:, None], (ew[:, None] - ew[None, :]) / np.where(close, 1.0, diff))
    return q @ ((q.conj().T @ exponent_dot @ q) * kernel) @ q.conj().T


# ---------------------------------------------------------------------------
# coherent-state solution


def coherent_state(theta: complex, dim: int, check_tail: bool = True) -> np.ndarray:
    """Normalized coherent state ``exp(-|theta|^2/2) sum theta^n/sqrt(n!) |n>``."""
    c = np.empty(dim, dtype=complex)
    c[0] = math.exp(-0.5 * abs(theta) ** 2)
    for n in range(1, dim):
        c[n] = c[n - 1] * theta / math.sqrt(n)
    if check_tail:
        tail = 1.0 - float(np.vdot(c, c).real)
        if tail > TAIL_TOL:
            raise TruncationTooSmall(
                f"|theta|={abs(theta):.3g} leaves tail mass {tail:.2e} beyond dim={dim}"
            )
    return c


@dataclass(frozen=True)
class CoherentSolution:
    """Ground state of ``h = omega a^dagger a + f``: a rotating coherent state with phase.

    ``theta(t) = theta0 exp(-i chi(t))`` and ``phi0(t) = phi0 - int_0^t f``.
    """

    theta0: complex
    phi0_init: float
    gamma: GammaSeries

    def theta(self, k: int) -> complex:
        return self.theta0 * np.exp(-1j * self.gamma.chi[k])

    def phase(self, k: int) -> float:
        return self.phi0_init - float(self.gamma.f_integral[k])


def ground_solution(sol: CoherentSolution, grid: TimeGrid, dim: int) -> Trajectory:
    """``phi(t) = exp(i phi0(t)) |theta(t)>`` on the grid nodes."""
    if grid != sol.gamma.grid:
        raise ValueError("solution and grid disagree")
    coherent_state(sol.theta0, dim)
    out = np.empty((grid.steps + 1, dim), dtype=complex)
    for k in range(grid.steps + 1):
        out[k] = np.exp(1j * sol.phase(2 * k)) * coherent_state(sol.theta(2 * k), dim, check_tail=False)
    return Trajectory(grid, out)


def mapped_solution(phi: Trajectory, gamma: GammaSeries, dim: int) -> Trajectory:
    """``Psi(t) = eta^-1(t) phi(t)``, a solution of the non-Hermitian equation."""
    g = gamma.nodes("gamma")
    out = np.array([build_eta(g[k], dim, power=-1.0) @ phi.values[k] for k in range(len(phi))])
    return Trajectory(phi.grid, out)


# ---------------------------------------------------------------------------
# observables


def quadratures_and_htilde(gamma: complex, gamma_dot: complex, omega: float, dim: int):
    """Shifted quadratures ``X, P`` and ``Htilde = eta^-1 h eta`` in closed form."""
    a, ad = fock_operators(dim)
    x, p = quadrature_operators(dim)
    eye = np.eye(dim)
    X = x - 1j * math.sqrt(2) * gamma.imag * eye
    P = p - 1j * math.sqrt(2) * gamma.real * eye
    shift = 0.5j * (gamma_dot * np.conj(gamma) - gamma * np.conj(gamma_dot))
    Htilde = omega * (ad @ a - gamma * a + np.conj(gamma) * ad) + shift * eye
    return X, P, Htilde
