import math

import numpy as np
import pytest
import scipy.linalg

from qhdyson.densemat import hermiticity_defect, spectrum
from qhdyson.errors import FamilyGateFailed, QuadratureTooCoarse, TruncationTooSmall
from qhdyson.oscillator import (
    CoherentSolution,
    OscillatorParams,
    build_eta,
    build_H,
    coherent_state,
    constraint_residual,
    eta_dot,
    eta_pair,
    fock_operators,
    gamma_solve,
    ground_solution,
    h_solved,
    hermitian_form,
    interior,
    mapped_solution,
    number_operator,
    quadrature_operators,
    quadratures_and_htilde,
    solved_f,
)
from qhdyson.propagator import TimeGrid, tdse_residual
from qhdyson.quadrature import derivative4
from qhdyson.timefunc import Constant, Sinusoid

OMEGA = Sinusoid(0.2, 1.0, 0.0, 1.0)
ALPHA = Constant(0.5j)
GRID = TimeGrid(0.0, 1.0, 1000)


def solved_params(dim=40, gamma0=0.0):
    return OscillatorParams(OMEGA, ALPHA, dim=dim, gamma0=gamma0)


def test_fock_operators():
    a, ad = fock_operators(2)
    assert np.array_equal(a, [[0, 1], [0, 0]])
    a, ad = fock_operators(3)
    assert np.allclose(ad @ a, np.diag([0, 1, 2]))
    a, ad = fock_operators(7)
    comm = a @ ad - ad @ a
    assert np.allclose(comm[:6, :6], np.eye(6))
    assert comm[6, 6] == pytest.approx(1 - 7)
    with pytest.raises(ValueError):
        fock_operators(1)


def test_build_H_examples():
    p = OscillatorParams(Constant(1.0), Constant(0.0), Constant(0.0), dim=8)
    assert np.allclose(build_H(p, 0.3), np.diag(np.arange(8)))
    # the leading 2x2 block of the dim-8 matrix is the dim=2 assembly
    p = OscillatorParams(Constant(1.0), Constant(0.5j), Constant(0.5j), dim=8)
    assert np.allclose(build_H(p, 0.0)[:2, :2], [[0, 0.5j], [0.5j, 1]])
    assert hermiticity_defect(build_H(solved_params(), 0.2)) > 0
    real_zero = OscillatorParams(OMEGA, Constant(0.0), dim=8)
    assert hermiticity_defect(build_H(real_zero, 0.2)) == 0


def test_params_validation():
    with pytest.raises(ValueError):
        OscillatorParams(OMEGA, ALPHA, dim=6)


def test_gamma_zero_alpha():
    p = OscillatorParams(OMEGA, Constant(0.0), dim=8, gamma0=0.3 - 0.2j)
    gs = gamma_solve(p, GRID)
    assert np.abs(gs.gamma - (0.3 - 0.2j) * np.exp(1j * gs.chi)).max() < 1e-15


def test_gamma_constant_coefficients():
    w0, a0, g0 = 1.3, 0.4 - 0.25j, 0.1 + 0.2j
    p = OscillatorParams(Constant(w0), Constant(a0), dim=8, gamma0=g0)
    gs = gamma_solve(p, GRID)
    t = gs.t
    exact = np.exp(1j * w0 * t) * g0 + a0 / w0 * (np.exp(1j * w0 * t) - 1)
    assert np.abs(gs.gamma - exact).max() < 1e-12
    # gamma' from the constraint: i (alpha + omega gamma)
    assert np.abs(gs.gamma_dot - 1j * (a0 + w0 * exact)).max() < 1e-12


def test_gamma_solved_family_fd_residual():
    gs = gamma_solve(solved_params(), GRID)
    g = gs.nodes("gamma")
    gd_fd = derivative4(g, GRID.dt)
    res = constraint_residual(0.5j, OMEGA(GRID.times), g, gd_fd)
    assert np.abs(res).max() <= 1e-8
    assert np.abs(constraint_residual(0.5j, OMEGA(gs.t), gs.gamma, gs.gamma_dot)).max() <= 1e-12
    assert gs.error_estimate < 1e-10


def test_gamma_frozen_values():
    # frozen reference computed with this implementation (dt = 1e-3)
    gs = gamma_solve(solved_params(), GRID)
    assert gs.at(1.0)[0] == pytest.approx(-0.4026922332906515 - 0.25276398559756796j, abs=1e-12)
    assert gs.nodes("f")[-1] == pytest.approx(0.12638199279878398, abs=1e-12)


def test_gamma_errors():
    with pytest.raises(QuadratureTooCoarse):
        gamma_solve(OscillatorParams(Sinusoid(3.0, 20.0, 0.0, 1.0), Constant(2j), dim=8),
                    TimeGrid(0.0, 1.0, 4))
    with pytest.raises(FamilyGateFailed):
        gamma_solve(OscillatorParams(OMEGA, ALPHA, Constant(0.3), dim=8), GRID)
    with pytest.raises(FamilyGateFailed):
        gamma_solve(OscillatorParams(Constant(1 + 0.1j), ALPHA, dim=8), GRID)
    with pytest.raises(ValueError):
        gamma_solve(solved_params(), TimeGrid(0.5, 1.0, 10))


def test_hermitian_form_examples():
    p = OscillatorParams(Constant(1.3), Constant(0.0), Constant(0.0), dim=10)
    form = hermitian_form(p, 0j, 0j, 0.0)
    assert form.u == form.v == form.f == 0
    assert np.allclose(form.h, 1.3 * number_operator(10))
    gs = gamma_solve(solved_params(), GRID)
    for k in (0, 500, 2000):
        t = gs.t[k]
        form = hermitian_form(solved_params(), gs.gamma[k], gs.gamma_dot[k], t)
        assert hermiticity_defect(form.h) <= 1e-10
        assert abs(form.u) < 1e-15 and abs(form.v) < 1e-15
        assert form.f == pytest.approx(solved_f(OMEGA(t), gs.gamma[k], gs.gamma_dot[k]), abs=1e-15)
        assert abs(form.const1) < 1e-15 and abs(form.const2) < 1e-15


def test_build_eta():
    assert np.array_equal(build_eta(0, 40), np.eye(40))
    for g in (2.0, 1.2 - 1.6j, -0.5j):
        assert hermiticity_defect(build_eta(g, 40)) <= 1e-12
    with pytest.raises(ValueError):
        build_eta(0.1, 4)


def test_build_eta_matches_scipy():
    a, ad = fock_operators(40)
    g = 0.8 - 0.6j
    ref = scipy.linalg.expm(g * a + np.conj(g) * ad)
    assert np.linalg.norm(build_eta(g, 40) - ref) < 1e-10 * np.linalg.norm(ref)


def test_eta_conjugates_ladder_operators():
    g = 0.3 + 0.1j
    a, ad = fock_operators(40)
    eta, inv = eta_pair(g, 40)
    assert np.linalg.norm(inv @ eta - np.eye(40)) < 1e-10
    assert np.linalg.norm(interior(inv @ a @ eta - (a + np.conj(g) * np.eye(40)), 15)) <= 1e-10
    assert np.linalg.norm(interior(inv @ ad @ eta - (ad - g * np.eye(40)), 15)) <= 1e-10


def test_eta_dot_matches_finite_difference():
    g, gd, dim = 0.4 - 0.2j, 0.3 + 0.5j, 24
    h = 1e-3
    fd = (-build_eta(g + 2 * h * gd, dim) + 8 * build_eta(g + h * gd, dim)
          - 8 * build_eta(g - h * gd, dim) + build_eta(g - 2 * h * gd, dim)) / (12 * h)
    assert np.abs(eta_dot(g, gd, dim) - fd).max() < 1e-9
    assert np.abs(eta_dot(0, gd, dim) - (gd * fock_operators(dim)[0] + np.conj(gd) * fock_operators(dim)[1])).max() < 1e-12


def test_coherent_state():
    assert np.array_equal(coherent_state(0, 10), np.eye(10)[0])
    c = coherent_state(1.5 - 0.5j, 40)
    assert np.vdot(c, c).real == pytest.approx(1.0, abs=1e-12)
    a, _ = fock_operators(40)
    assert np.linalg.norm(interior(a @ c - (1.5 - 0.5j) * c, 10)) < 1e-12
    with pytest.raises(TruncationTooSmall):
        coherent_state(4.0, 20)


def test_ground_solution_vacuum_and_rotation():
    gs = gamma_solve(solved_params(dim=12), GRID)
    phi = ground_solution(CoherentSolution(0.0, 0.3, gs), GRID, 12)
    phase = 0.3 - gs.nodes("f_integral")
    assert np.allclose(phi.values, np.exp(1j * phase)[:, None] * np.eye(12)[0])

    p = OscillatorParams(Constant(1.0), Constant(0.0), dim=12)
    gs = gamma_solve(p, GRID)
    sol = CoherentSolution(0.5, 0.0, gs)
    assert sol.theta(2 * 1000) == pytest.approx(0.5 * np.exp(-1j), abs=1e-12)
    assert sol.phase(2 * 1000) == 0.0
    assert all(abs(abs(sol.theta(k)) - 0.5) < 1e-15 for k in range(0, 2001, 100))


def test_ground_solution_solves_tdse():
    p = solved_params()
    gs = gamma_solve(p, GRID)
    phi = ground_solution(CoherentSolution(0.5, 0.0, gs), GRID, 40)
    h = lambda t: h_solved(float(OMEGA(t)), float(gs.f[gs.index(t)]), 40)  # noqa: E731
    assert tdse_residual(phi, h).max_abs() <= 1e-6
    assert np.abs(np.linalg.norm(phi.values, axis=1) - 1).max() < 1e-12
    psi = mapped_solution(phi, gs, 40)
    assert tdse_residual(psi, lambda t: build_H(p, t)).max_abs() <= 1e-5


def test_truncation_convergence_small_theta():
    res = []
    for dim in (20, 40):
        p = solved_params(dim)
        gs = gamma_solve(p, GRID)
        phi = ground_solution(CoherentSolution(0.5, 0.0, gs), GRID, dim)
        psi = mapped_solution(phi, gs, dim)
        res.append(tdse_residual(psi, lambda t: build_H(p, t)).max_abs())
    assert res[0] >= 10 * res[1]


def test_f_is_real_along_trajectory():
    gs = gamma_solve(solved_params(), GRID)
    vals = 1j * 0.5 * (gs.gamma_dot * np.conj(gs.gamma) - gs.gamma * np.conj(gs.gamma_dot))
    assert np.abs(vals.imag).max() <= 1e-12


def test_quadratures_examples():
    x, p = quadrature_operators(12)
    X, P, Ht = quadratures_and_htilde(0j, 0j, 1.7, 12)
    assert np.allclose(X, x) and np.allclose(P, p) and np.allclose(Ht, 1.7 * number_operator(12))
    # gamma = i: Im gamma = 1 shifts X by -i sqrt2, P is untouched
    X, P, _ = quadratures_and_htilde(1j, 0j, 1.0, 12)
    assert np.allclose(X, x - 1j * math.sqrt(2) * np.eye(12))
    assert np.allclose(P, p)


def _identity_residuals(gamma, buffer, dim=40, omega=1.1):
    gd = 1j * (0.5j + omega * gamma)
    f = solved_f(omega, gamma, gd)
    eta, inv = eta_pair(gamma, dim)
    x, p = quadrature_operators(dim)
    X, P, Ht = quadratures_and_htilde(gamma, gd, omega, dim)
    keep = dim - buffer
    return {
        "X": np.linalg.norm(interior(inv @ x @ eta - X, buffer)),
        "P": np.linalg.norm(interior(inv @ p @ eta - P, buffer)),
        "htilde": np.linalg.norm(interior(inv @ h_solved(omega, f, dim) @ eta - Ht, buffer)),
        "spectrum": np.abs(spectrum(Ht)[:keep] - (omega * np.arange(keep) + f)).max(),
    }


def test_identities_buffer_ten():
    r = _identity_residuals(0.3 + 0.1j, 10)
    assert r["X"] <= 1e-8
    assert r["htilde"] <= 1e-8
    assert r["spectrum"] <= 1e-7
    # P feels the truncated tail sooner than X
    assert 1e-8 < r["P"] < 1e-7


@pytest.mark.parametrize("gamma", [0.3 + 0.1j, -0.2 + 0.45j])
def test_identities_default_scenario_buffer(gamma):
    r = _identity_residuals(gamma, 15)
    assert max(r.values()) <= 1e-9


def test_larger_gamma_needs_wider_buffer():
    assert _identity_residuals(-0.2 + 0.45j, 10)["X"] > 1e-5
