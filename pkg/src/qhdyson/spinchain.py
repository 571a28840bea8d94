"""Time-dependent Yang-Lee Ising chain.

``H_N(t) = -1/2 sum_j (sz_j + lambda(t) sx_j sx_{j+1} + i kappa(t) sx_j)`` with
periodic boundary ``sigma_{N+1} = sigma_1``.

For ``N = 1`` the metric is solved in closed form. The Hermitian ansatz

    rho = [[m_a, m_b + i m_g], [m_b - i m_g, m_d]]

turns the quasi-Hermiticity relation into integrals for ``m_a, m_d, m_g`` and a
constraint on ``m_b``. Setting ``m_b = d kappa/dt`` reduces the constraint to

    kappa'' = -kappa (1 - (a0 + d0)/2 + kappa(0)^2/2) + kappa^3/2 - g0 + kappa(0)

whose elementary solutions are ``2 tan t``, ``2 sec t`` and ``2 tanh t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import mpmath
import numpy as np

from .densemat import DEFAULT_TOL, hermitian_eigen, posdef_check, sqrt_posdef
from .errors import Blowup, SingularityTooClose
from .propagator import SINGULARITY_MARGIN, TimeGrid, Trajectory, rk4
from .quadrature import cumulative_simpson, derivative4
from .relations import OperatorTriple, hermitian_counterpart
from .timefunc import SecScaled, TanhScaled, TanScaled, TimeFunction

MAX_SITES = 10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class SpinChainParams:
    N: int
    lam: TimeFunction
    kappa: TimeFunction

    def __post_init__(self):
        if not 1 <= self.N <= MAX_SITES:
            raise ValueError(f"N must be in 1..{MAX_SITES}, got {self.N}")


def _site_op(op: np.ndarray, j: int, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for k in range(n):
        out = np.kron(out, op if k == j else np.eye(2))
    return out


@lru_cache(maxsize=None)
def chain_terms(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(sum sz_j, sum sx_j sx_{j+1}, sum sx_j)`` on ``n`` periodic sites."""
    xs = [_site_op(SIGMA_X, j, n) for j in range(n)]
    z = sum(_site_op(SIGMA_Z, j, n) for j in range(n))
    xx = sum(xs[j] @ xs[(j + 1) % n] for j in range(n))
    x = sum(xs)
    for m in (z, xx, x):
        m.setflags(write=False)
    return z, xx, x


def hamiltonian_from_values(n: int, lam: complex, kappa: complex) -> np.ndarray:
    z, xx, x = chain_terms(n)
    return -0.5 * (z + lam * xx + 1j * kappa * x)


def build_hamiltonian(params: SpinChainParams, t: float) -> np.ndarray:
    return hamiltonian_from_values(params.N, complex(params.lam(t)), complex(params.kappa(t)))


def h1(t: float, lam: complex, kappa: complex) -> np.ndarray:
    """``N = 1`` Hamiltonian ``-1/2 [[1 + lam, i kappa], [i kappa, lam - 1]]``."""
    return -0.5 * np.array([[1 + lam, 1j * kappa], [1j * kappa, lam - 1]], dtype=complex)


def assemble_metric(m_a, m_b, m_g, m_d) -> np.ndarray:
    """Hermitian 2x2 metric(s) from the four real ansatz entries (broadcasts)."""
    m_a, m_b, m_g, m_d = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m_a, m_b, m_g, m_d)))
    out = np.empty(m_a.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = m_a
    out[..., 0, 1] = m_b + 1j * m_g
    out[..., 1, 0] = m_b - 1j * m_g
    out[..., 1, 1] = m_d
    return out


# ---------------------------------------------------------------------------
# closed-form solution families

_FAMILIES = {
    # kind: (kappa function, gamma0, alpha0 as a function of delta0)
    "tan": (TanScaled(2.0), 0.0, lambda d: 6.0 - d),
    "sec": (SecScaled(2.0), 2.0, lambda d: 4.0 - d),
    "tanh": (TanhScaled(2.0), 0.0, lambda d: -2.0 - d),
}
FAMILY_ALIASES = {"s1": "tan", "s2": "sec", "s3": "tanh"}


@dataclass(frozen=True)
class ClosedSolutionFamily:
    kind: str
    delta0: float
    gamma0: float
    alpha0: float
    kappa_fn: TimeFunction

    @property
    def kappa0(self) -> float:
        return float(self.kappa_fn(0.0))

    @property
    def kappadot0(self) -> float:
        return float(self.kappa_fn.derivative(0.0))

    def kappa(self, t):
        return self.kappa_fn(t)

    def kappa_dot(self, t):
        return self.kappa_fn.derivative(t)

    def kappa_ddot(self, t):
        """Second derivative, taken from the reduced ODE the family solves."""
        k = np.asarray(self.kappa(t), dtype=float)
        return kappa_rhs(k, self.alpha0, self.delta0, self.gamma0, self.kappa0)

    def entries(self, t):
        """``(m_a, m_b, m_g, m_d)`` at ``t`` from the integrated entry equations."""
        k = np.asarray(self.kappa(t), dtype=float)
        k0 = self.kappa0
        shift = 0.5 * (k * k - k0 * k0)  # integral of kappa' kappa
        return (self.alpha0 + shift, np.asarray(self.kappa_dot(t), dtype=float),
                self.gamma0 + k - k0, self.delta0 + shift)

    def entries_dot(self, t):
        k = np.asarray(self.kappa(t), dtype=float)
        kd = np.asarray(self.kappa_dot(t), dtype=float)
        return kd * k, np.asarray(self.kappa_ddot(t)), kd, kd * k

    def metric(self, t) -> np.ndarray:
        return assemble_metric(*self.entries(t))

    def metric_dot(self, t) -> np.ndarray:
        return assemble_metric(*self.entries_dot(t))

    @property
    def det0(self) -> float:
        """``det rho(0)`` computed directly from the entries."""
        a, b, g, d = (float(v) for v in self.entries(0.0))
        return a * d - b * b - g * g

    def hamiltonian(self, t, lam=1.0) -> np.ndarray:
        return h1(t, lam, float(self.kappa(t)))


def closed_family(kind: str, delta0: float) -> ClosedSolutionFamily:
    """One of the three elementary solutions (``tan``/``s1``, ``sec``/``s2``, ``tanh``/``s3``)."""
    kind = FAMILY_ALIASES.get(kind, kind)
    if kind not in _FAMILIES:
        raise ValueError(f"unknown family {kind!r}; expected one of tan, sec, tanh")
    fn, g0, a0 = _FAMILIES[kind]
    return ClosedSolutionFamily(kind, float(delta0), g0, a0(float(delta0)), fn)


def quadratic_det0(kind: str, delta0: float) -> float:
    """The quadratic in ``delta0`` listed with each family."""
    kind = FAMILY_ALIASES.get(kind, kind)
    d = delta0
    return {"tan": -4 + 6 * d - d * d, "sec": -4 + 4 * d - d * d, "tanh": -4 - 2 * d - d * d}[kind]


# ---------------------------------------------------------------------------
# kappa ODE and metric entries


def kappa_rhs(kappa, alpha0, delta0, gamma0, kappa0):
    c = 1.0 - 0.5 * (alpha0 + delta0) + 0.5 * kappa0 * kappa0
    return -kappa * c + 0.5 * kappa**3 - gamma0 + kappa0


class KappaSolution(NamedTuple):
    t: np.ndarray
    kappa: np.ndarray
    kappa_dot: np.ndarray


def kappa_ode_solve(delta0: float, alpha0: float, gamma0: float, kappa0: float,
                    kappadot0: float, grid: TimeGrid, bound: float = 1e6) -> KappaSolution:
    """RK4 for the reduced second-order equation with state ``(kappa, kappa')``.

    Raises ``Blowup`` once ``|kappa|`` passes ``bound``.
    """
    def rhs(t, y):
        return np.array([y[1], kappa_rhs(y[0], alpha0, delta0, gamma0, kappa0)])

    def watch(t, y):
        if not np.all(np.isfinite(y)) or abs(y[0]) > bound:
            raise Blowup(t, y[0])
        return y

    ys = rk4(rhs, [kappa0, kappadot0], grid, watch, dtype=float)
    return KappaSolution(grid.times, ys[:, 0], ys[:, 1])


class MetricEntries(NamedTuple):
    rho: Trajectory
    entries: tuple
    constraint_residual: np.ndarray


def metric_entries(beta, kappa, alpha0: float, delta0: float, gamma0: float,
                   grid: TimeGrid) -> MetricEntries:
    """Integrate the entry equations for sampled ``beta(t)`` and ``kappa(t)``.

    ``m_a = a0 + int beta kappa``, ``m_d = d0 + int beta kappa``,
    ``m_g = g0 + int beta`` (cumulative Simpson), ``m_b = beta``. Also returns
    the residual of the constraint

        beta' + int beta - kappa int beta kappa - kappa (a0 + d0)/2 + g0

    per node, with ``beta'`` from fourth-order differences.
    """
    beta = np.asarray(beta, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    dt = grid.dt
    ibk = cumulative_simpson(beta * kappa, dt)
    ib = cumulative_simpson(beta, dt)
    m_a = alpha0 + ibk
    m_d = delta0 + ibk
    m_g = gamma0 + ib
    rho = Trajectory(grid, assemble_metric(m_a, beta, m_g, m_d))
    bdot = derivative4(beta, dt)
    residual = bdot + ib - kappa * ibk - 0.5 * kappa * (alpha0 + delta0) + gamma0
    return MetricEntries(rho, (m_a, beta, m_g, m_d), residual)


# ---------------------------------------------------------------------------
# explicit rho, eta, h for the tan family


class ExplicitTriple(NamedTuple):
    rho: np.ndarray
    rho_dot: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray
    h: np.ndarray
    H: np.ndarray


def _check_clear(t: float, margin: float) -> None:
    dist = abs(t - (math.floor(t / math.pi) + 0.5) * math.pi)
    if dist < margin:
        raise SingularityTooClose(f"t={t:.6g} is {dist:.2e} from a pole of tan/sec")


def _display_triple(t: float, lam: float) -> ExplicitTriple:
    s = 1.0 / math.cos(t)
    s2 = s * s
    tn = math.tan(t)
    rho = np.array([[5 + 2 * tn * tn, 2 * s2 + 2j * tn],
                    [2 * s2 - 2j * tn, 1 + 2 * tn * tn]])
    rho_dot = np.array([[4 * tn * s2, 4 * tn * s2 + 2j * s2],
                        [4 * tn * s2 - 2j * s2, 4 * tn * s2]])
    g = 1.0 / math.sqrt(s2 + 1.0)
    dg = -s2 * tn * g**3
    m = np.array([[2 + s2, s * (s + 1j * math.sin(t))],
                  [s * (s - 1j * math.sin(t)), s2]])
    dm = np.array([[2 * s2 * tn, 2 * s2 * tn + 1j * s2],
                   [2 * s2 * tn - 1j * s2, 2 * s2 * tn]])
    c2 = math.cos(2 * t)
    sn2 = math.sin(2 * t)
    h = np.array([[-0.5 * (1 + 3 * lam + (3 + lam) * c2), -1j * sn2],
                  [1j * sn2, 0.5 * (1 - 3 * lam + (3 - lam) * c2)]]) / (3 + c2)
    return ExplicitTriple(rho, rho_dot, g * m, dg * m + g * dm, h, h1(t, lam, 2 * tn))


def root_derivative(eta: np.ndarray, rho_dot: np.ndarray) -> np.ndarray:
    """Time derivative of ``eta = sqrt(rho)`` from ``eta eta' + eta' eta = rho'``."""
    dec = hermitian_eigen(eta, tol=np.inf)
    w, v = dec
    rd = v.conj().T @ rho_dot @ v
    return v @ (rd / (w[:, None] + w[None, :])) @ v.conj().T


def explicit_triple(t: float, lam: float = 1.0, delta0: float = 1.0,
                    margin: float = SINGULARITY_MARGIN) -> ExplicitTriple:
    """Closed-form metric, Hermitian Dyson map and Hermitian Hamiltonian of the tan family.

    ``delta0 = 1`` evaluates the displayed closed forms. Other ``delta0`` in
    the admissible window take the principal root of the closed-form metric,
    its derivative from the Sylvester equation, and ``h`` from the Dyson
    relation.
    """
    _check_clear(t, margin)
    if delta0 == 1.0:
        return _display_triple(t, float(lam))
    fam = closed_family("tan", delta0)
    rho = fam.metric(t)
    rho_dot = fam.metric_dot(t)
    eta = sqrt_posdef(rho)
    eta_dot = root_derivative(eta, rho_dot)
    H = fam.hamiltonian(t, lam)
    h = hermitian_counterpart(OperatorTriple(H, eta, eta_dot))
    return ExplicitTriple(rho, rho_dot, eta, eta_dot, 0.5 * (h + h.conj().T), H)


# ---------------------------------------------------------------------------
# positivity window


class WindowReport(NamedTuple):
    kind: str
    delta0: np.ndarray
    det0: np.ndarray
    min_eig: np.ndarray
    admissible: np.ndarray

    def flips(self) -> list[float]:
        """Midpoints between consecutive samples where admissibility changes."""
        a = self.admissible
        idx = np.nonzero(a[1:] != a[:-1])[0]
        return [0.5 * (self.delta0[i] + self.delta0[i + 1]) for i in idx]


def positivity_window(kind: str, delta0_grid, tol: float = DEFAULT_TOL) -> WindowReport:
    """Admissibility of ``rho(0)`` for each sampled ``delta0``."""
    d0 = np.asarray(delta0_grid, dtype=float)
    det0 = np.empty_like(d0)
    lam = np.empty_like(d0)
    ok = np.empty(d0.shape, dtype=bool)
    for i, d in enumerate(d0):
        fam = closed_family(kind, d)
        det0[i] = fam.det0
        ok[i], lam[i] = posdef_check(fam.metric(0.0), tol)
    return WindowReport(FAMILY_ALIASES.get(kind, kind), d0, det0, lam, ok)


def family_det(fam: ClosedSolutionFamily, t: float, dps: int = 40) -> float:
    """``det rho(t)`` of a closed family evaluated in ``dps``-digit arithmetic.

    In double precision ``m_a m_d - m_b^2 - m_g^2`` cancels terms of size
    ``|rho|^2``, which near ``|t| = 1.4`` already costs about ``1e-12``.
    """
    with mpmath.workdps(dps):
        x = mpmath.mpf(t)
        if fam.kind == "tan":
            k, kd = 2 * mpmath.tan(x), 2 * mpmath.sec(x) ** 2
        elif fam.kind == "sec":
            k, kd = 2 * mpmath.sec(x), 2 * mpmath.sec(x) * mpmath.tan(x)
        else:
            k, kd = 2 * mpmath.tanh(x), 2 * mpmath.sech(x) ** 2
        k0 = mpmath.mpf(fam.kappa0)
        shift = (k * k - k0 * k0) / 2
        m_a = fam.alpha0 + shift
        m_d = fam.delta0 + shift
        m_g = fam.gamma0 + k - k0
        return float(m_a * m_d - kd * kd - m_g * m_g)


def display_det(t: float, dps: int = 40) -> float:
    """``det rho(t)`` of the displayed ``delta0 = 1`` metric in ``dps``-digit arithmetic."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(t)
        tn = mpmath.tan(x)
        s2 = mpmath.sec(x) ** 2
        return float((5 + 2 * tn**2) * (1 + 2 * tn**2) - (2 * s2) ** 2 - (2 * tn) ** 2)
