import math

import numpy as np
import pytest

from qhdyson.densemat import hermiticity_defect
from qhdyson.errors import SingularEta
from qhdyson.oscillator import build_eta, eta_dot, h_solved, quadrature_operators, quadratures_and_htilde, interior
from qhdyson.relations import (
    MetricPair,
    OperatorTriple,
    dyson_residual,
    eta_inverse,
    fd_time_derivative,
    hermitian_counterpart,
    htilde,
    metric_of,
    metric_pair_of,
    observable_map,
    quasi_residual,
    quasi_residual_from_eta,
    rho_inner,
)
from qhdyson.spinchain import closed_family, explicit_triple, h1

from conftest import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
RHO0 = np.array([[5, 2], [2, 1]], dtype=complex)
ETA0 = np.array([[3, 1], [1, 1]]) / math.sqrt(2)


def test_dyson_static_hermitian(rng):
    H = random_hermitian(rng, 3)
    triple = OperatorTriple(H, np.eye(3), np.zeros((3, 3)))
    assert np.abs(dyson_residual(H, triple)).max() == 0


def test_dyson_spinchain_explicit():
    tr = explicit_triple(0.3, 1.0)
    res = dyson_residual(tr.h, OperatorTriple(tr.H, tr.eta, tr.eta_dot))
    assert np.linalg.norm(res) <= 1e-10


def test_dyson_linear_in_h():
    tr = explicit_triple(0.3, 1.0)
    eps = 1e-3
    res = dyson_residual(tr.h + eps * SX, OperatorTriple(tr.H, tr.eta, tr.eta_dot))
    assert np.linalg.norm(res) == pytest.approx(eps * math.sqrt(2), rel=1e-9)


def test_quasi_examples(rng):
    H = random_hermitian(rng, 3)
    pair = MetricPair(np.eye(3), np.zeros((3, 3)))
    assert np.abs(quasi_residual(H, pair)).max() < 1e-15
    G = H + 1j * random_hermitian(rng, 3)
    assert np.allclose(quasi_residual(G, pair), G.conj().T - G)
    fam = closed_family("tan", 1.0)
    r = quasi_residual(h1(0.5, 1.0, fam.kappa(0.5)), MetricPair(fam.metric(0.5), fam.metric_dot(0.5)))
    assert np.linalg.norm(r) <= 1e-10


def test_counterpart_examples(rng):
    G = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.allclose(hermitian_counterpart(OperatorTriple(G, np.eye(3), np.zeros((3, 3)))), G)
    tr = explicit_triple(0.4, 1.0)
    h = hermitian_counterpart(OperatorTriple(tr.H, tr.eta, tr.eta_dot))
    assert np.abs(h - tr.h).max() <= 1e-10


def test_counterpart_oscillator_family():
    dim, omega, alpha = 40, 1.1, 0.5j
    gamma = 0.3 + 0.1j
    gamma_dot = 1j * (alpha + omega * gamma)
    a = np.diag(np.sqrt(np.arange(1, dim)), 1)
    H = omega * a.T @ a + alpha * a - np.conj(alpha) * a.T
    h = hermitian_counterpart(OperatorTriple(H, build_eta(gamma, dim), eta_dot(gamma, gamma_dot, dim)))
    f = omega * abs(gamma) ** 2 + (0.5j * (gamma_dot * np.conj(gamma) - gamma * np.conj(gamma_dot))).real
    assert np.linalg.norm(interior(h - h_solved(omega, f, dim), 10)) < 1e-8


def test_metric_of_examples(rng):
    assert np.allclose(metric_of(np.eye(2)), np.eye(2))
    assert np.abs(metric_of(ETA0) - RHO0).max() < 1e-14
    e = random_hermitian(rng, 4)
    assert np.allclose(metric_of(e), e @ e)


def test_observable_map(rng):
    o = random_hermitian(rng, 3)
    assert np.allclose(observable_map(o, np.eye(3)), o)
    eta = ETA0
    O = observable_map(o[:2, :2], eta)
    assert np.allclose(observable_map(O, eta, "inverse"), o[:2, :2])
    with pytest.raises(ValueError):
        observable_map(o, np.eye(3), "sideways")


def test_observable_map_shifts_x():
    dim, gamma = 40, 0.3 + 0.1j
    x, _ = quadrature_operators(dim)
    X, _, _ = quadratures_and_htilde(gamma, 0j, 1.0, dim)
    got = observable_map(x, build_eta(gamma, dim))
    assert np.linalg.norm(interior(got - X, 10)) <= 1e-8


def test_observable_map_h_gives_htilde():
    dim, omega, alpha, gamma = 40, 1.1, 0.5j, 0.3 + 0.1j
    gamma_dot = 1j * (alpha + omega * gamma)
    f = omega * abs(gamma) ** 2 + (0.5j * (gamma_dot * np.conj(gamma) - gamma * np.conj(gamma_dot))).real
    _, _, Ht = quadratures_and_htilde(gamma, gamma_dot, omega, dim)
    got = observable_map(h_solved(omega, f, dim), build_eta(gamma, dim))
    assert np.linalg.norm(interior(got - Ht, 10)) <= 1e-8


def test_rho_inner_examples(rng):
    psi = rng.normal(size=3) + 1j * rng.normal(size=3)
    phi = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert rho_inner(psi, phi, np.eye(3)) == pytest.approx(np.vdot(psi, phi))
    assert rho_inner([1, 0], [1, 0], RHO0) == 5
    assert rho_inner([0, 1], [1, 0], RHO0) == 2
    rho = RHO0
    assert rho_inner([1j, 2], [3, -1j], rho) == pytest.approx(np.conj(rho_inner([3, -1j], [1j, 2], rho)))


def test_rho_inner_positive_on_s1_metric(rng):
    fam = closed_family("tan", 1.0)
    for _ in range(1000):
        t = rng.uniform(-1.4, 1.4)
        psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        val = rho_inner(psi, psi, fam.metric(t))
        assert abs(val.imag) < 1e-12 * abs(val) and val.real > 0


def test_eta_inverse_singular():
    with pytest.raises(SingularEta):
        eta_inverse(np.diag([1.0, 1e-7]))
    with pytest.raises(SingularEta):
        eta_inverse(np.array([[1.0, 1.0], [0.0, 0.0]]))


def test_eta_inverse_non_hermitian(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) + 4 * np.eye(4)
    assert np.allclose(eta_inverse(m) @ m, np.eye(4), atol=1e-12)


# -- properties


def _random_map(rng, n):
    # smooth invertible eta(t) = expm(A + t B) with Hermitian A, B
    from qhdyson.densemat import expm

    A = random_hermitian(rng, n, 0.3)
    B = random_hermitian(rng, n, 0.3)
    return lambda t: expm(A + t * B)


def test_dyson_implies_quasi_with_fd_derivative(rng):
    n = 3
    eta_of = _random_map(rng, n)
    h = random_hermitian(rng, n)
    for t in (0.1, 0.7):
        eta = eta_of(t)
        eta_dot_fd = fd_time_derivative(eta_of, t, 1e-3)
        inv = eta_inverse(eta)
        # H chosen so that the Dyson relation holds with this h
        H = inv @ h @ eta - 1j * inv @ eta_dot_fd
        assert np.linalg.norm(dyson_residual(h, OperatorTriple(H, eta, eta_dot_fd))) < 1e-12
        assert np.linalg.norm(quasi_residual_from_eta(H, eta, eta_dot_fd)) < 1e-8


def test_similarity_preserves_spectrum(rng):
    o = random_hermitian(rng, 4)
    eta = _random_map(rng, 4)(0.5)
    w = np.sort(np.linalg.eigvals(observable_map(o, eta)).real)
    assert np.allclose(w, np.linalg.eigvalsh(o), atol=1e-8)


def test_htilde_identity(rng):
    eta_of = _random_map(rng, 3)
    H = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    t = 0.4
    triple = OperatorTriple(H, eta_of(t), fd_time_derivative(eta_of, t, 1e-3))
    h = hermitian_counterpart(triple)
    assert np.linalg.norm(observable_map(h, triple.eta) - htilde(triple)) < 1e-8


def test_metric_pair_of_matches_explicit():
    tr = explicit_triple(0.6, 1.0)
    rho, rho_dot = metric_pair_of(tr.eta, tr.eta_dot)
    assert np.abs(rho - tr.rho).max() < 1e-12
    assert np.abs(rho_dot - tr.rho_dot).max() < 1e-11
    assert hermiticity_defect(tr.h) == 0
