"""Residuals and constructors for the time-dependent Dyson and quasi-Hermiticity relations.

Conventions (hbar = 1)::

    h     = eta H eta^-1 + i (d eta/dt) eta^-1        Dyson relation
    0     = H^dagger rho - rho H - i d rho/dt          quasi-Hermiticity
    rho   = eta^dagger eta                             metric
    O     = eta^-1 o eta                               observable map
"""

from __future__ import annotations

from typing import Literal, NamedTuple

import numpy as np

from .densemat import DEFAULT_TOL, hermitian_eigen, hermiticity_defect
from .errors import SingularEta

ETA_TOL = 1e-12


class OperatorTriple(NamedTuple):
    """Non-Hermitian Hamiltonian with a Dyson map and its time derivative."""

    H: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray


class MetricPair(NamedTuple):
    rho: np.ndarray
    rho_dot: np.ndarray


def eta_inverse(eta, tol: float = ETA_TOL) -> np.ndarray:
    """Invert a Dyson map.

    Hermitian maps are inverted in their own eigenbasis. Otherwise the
    inverse is ``(eta^dagger eta)^-1 eta^dagger``. Either way the smallest
    eigenvalue of ``eta^dagger eta`` must exceed ``tol``.
    """
    eta = np.asarray(eta, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(eta)))
    if hermiticity_defect(eta) <= 1e-13 * scale:
        dec = hermitian_eigen(eta, tol=np.inf)
        smallest = float(np.min(dec.eigenvalues**2))
        if smallest <= tol:
            raise SingularEta(f"min eigenvalue of eta^dagger eta is {smallest:.3e}")
        return dec.reconstruct(lambda w: 1.0 / w)
    gram = eta.conj().T @ eta
    dec = hermitian_eigen(gram, tol=np.inf)
    if dec.eigenvalues[0] <= tol:
        raise SingularEta(f"min eigenvalue of eta^dagger eta is {dec.eigenvalues[0]:.3e}")
    return dec.reconstruct(lambda w: 1.0 / w) @ eta.conj().T


def _inv(eta, eta_inv):
    return eta_inverse(eta) if eta_inv is None else np.asarray(eta_inv, dtype=complex)


def hermitian_counterpart(triple: OperatorTriple, eta_inv=None) -> np.ndarray:
    """``eta H eta^-1 + i eta_dot eta^-1``.

    Hermitian only when the triple is consistent; check with
    ``hermiticity_defect``.
    """
    H, eta, eta_dot = (np.asarray(x, dtype=complex) for x in triple)
    inv = _inv(eta, eta_inv)
    return eta @ H @ inv + 1j * eta_dot @ inv


def dyson_residual(h, triple: OperatorTriple, eta_inv=None) -> np.ndarray:
    return np.asarray(h, dtype=complex) - hermitian_counterpart(triple, eta_inv)


def metric_of(eta) -> np.ndarray:
    eta = np.asarray(eta, dtype=complex)
    return eta.conj().T @ eta


def metric_pair_of(eta, eta_dot) -> MetricPair:
    """Metric and its time derivative induced by a Dyson map."""
    eta = np.asarray(eta, dtype=complex)
    eta_dot = np.asarray(eta_dot, dtype=complex)
    return MetricPair(eta.conj().T @ eta,
                      eta_dot.conj().T @ eta + eta.conj().T @ eta_dot)


def quasi_residual(H, pair: MetricPair) -> np.ndarray:
    """``H^dagger rho - rho H - i rho_dot``."""
    H = np.asarray(H, dtype=complex)
    rho, rho_dot = (np.asarray(x, dtype=complex) for x in pair)
    return H.conj().T @ rho - rho @ H - 1j * rho_dot


def quasi_residual_from_eta(H, eta, eta_dot) -> np.ndarray:
    """Quasi-Hermiticity residual with ``rho = eta^dagger eta`` substituted."""
    return quasi_residual(H, metric_pair_of(eta, eta_dot))


def observable_map(o, eta, direction: Literal["forward", "inverse"] = "forward",
                   eta_inv=None) -> np.ndarray:
    """Forward: ``eta^-1 o eta``. Inverse: ``eta O eta^-1``."""
    o = np.asarray(o, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    inv = _inv(eta, eta_inv)
    if direction == "forward":
        return inv @ o @ eta
    if direction == "inverse":
        return eta @ o @ inv
    raise ValueError(f"direction must be 'forward' or 'inverse', not {direction!r}")


def htilde(triple: OperatorTriple, eta_inv=None) -> np.ndarray:
    """``H + i eta^-1 eta_dot``: the quasi-Hermitian partner of ``h``, not a generator."""
    H, eta, eta_dot = (np.asarray(x, dtype=complex) for x in triple)
    return H + 1j * _inv(eta, eta_inv) @ eta_dot


def rho_inner(psi, phi, rho) -> complex:
    """Metric-weighted inner product ``<psi | rho phi>`` (antilinear in ``psi``)."""
    return complex(np.vdot(np.asarray(psi, dtype=complex),
                           np.asarray(rho, dtype=complex) @ np.asarray(phi, dtype=complex)))


def fd_time_derivative(fun, t: float, step: float) -> np.ndarray:
    """Fourth-order central difference of a matrix-valued function of time."""
    return (np.asarray(fun(t - 2 * step)) - 8 * np.asarray(fun(t - step))
            + 8 * np.asarray(fun(t + step)) - np.asarray(fun(t + 2 * step))) / (12 * step)


def is_hermitian(m, tol: float = DEFAULT_TOL) -> bool:
    return hermiticity_defect(m) <= tol
