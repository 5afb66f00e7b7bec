import numpy as np
import pytest
from scipy.integrate import quad

from nlslab import sampling
from nlslab.functionals import energy
from nlslab.grid import Params, RealPair, make_grid, shift_real
from nlslab.ground_state import (ConvergenceError, SingularJacobianError, coupling_amplitude,
                                 elliptic_residual, energy_trace_step, gradient_flow_minimize,
                                 newton_solve, scalar_soliton, synthesized_ground_state)
from nlslab.modulation import distance_to_orbit

SQ2 = np.sqrt(2.0)
GRID_P = [1.0, 1.25, 1.5, 1.9]
GRID_B = [1.5, 2.0, 3.0]


def _scalar_residual(p, grid):
    z = scalar_soliton(p, grid)
    zpp = np.fft.ifft(-grid.k2 * np.fft.fft(z)).real
    return np.max(np.abs(-0.5 * zpp + z - z ** (2 * p + 1)))


@pytest.mark.parametrize("p", [1.0, 1.25, 1.5, 1.9, 3.0])
def test_scalar_soliton_solves_scalar_equation(p, grid):
    assert _scalar_residual(p, grid) < 1e-10


def test_scalar_soliton_small_exponent_on_wider_box():
    # for p < 1 the profile is wide enough that L = 20 leaves a 1e-10 periodic kink
    assert _scalar_residual(0.5, make_grid(30, 2048)) < 1e-10


def test_scalar_soliton_values(grid):
    z = scalar_soliton(1.0, grid)
    assert z[grid.N // 2] == pytest.approx(SQ2, abs=1e-15)
    h = grid.h
    l2 = quad(lambda x: 2 / np.cosh(SQ2 * x) ** 2, -50, 50, points=[0])[0]
    l4 = quad(lambda x: 4 / np.cosh(SQ2 * x) ** 4, -50, 50, points=[0])[0]
    assert l2 == pytest.approx(2 * SQ2, abs=1e-12) and l4 == pytest.approx(8 * SQ2 / 3, abs=1e-12)
    assert h * np.sum(z**2) == pytest.approx(l2, abs=1e-12)
    assert h * np.sum(z**4) == pytest.approx(l4, abs=1e-12)


def test_scalar_soliton_rejects_bad_p(grid):
    with pytest.raises(ValueError):
        scalar_soliton(0.0, grid)


def test_coupling_amplitude():
    assert coupling_amplitude(Params(1, 3)) == 0.5
    assert coupling_amplitude(Params(1, 1)) == pytest.approx(2**-0.5, abs=1e-15)
    assert coupling_amplitude(Params(2, 1e-300)) == pytest.approx(1.0)


def test_synthesized_ground_state(grid, P3):
    gs = synthesized_ground_state(P3, grid)
    assert gs.provenance == "closed-form"
    assert gs.profile.u1.max() == pytest.approx(SQ2 / 2, abs=1e-14)
    assert gs.mass == pytest.approx(SQ2, abs=1e-12)
    assert gs.residual_norm < 1e-9


@pytest.mark.parametrize("p", GRID_P)
@pytest.mark.parametrize("b", GRID_B)
def test_closed_form_residual(p, b, grid):
    res = elliptic_residual(synthesized_ground_state(Params(p, b), grid).profile, Params(p, b))
    assert res["res1_l2"] < 1e-9 and res["res2_l2"] < 1e-9


def test_ground_state_is_even_and_nonnegative(grid):
    for p in GRID_P:
        R = synthesized_ground_state(Params(p, 2.0), grid).profile
        assert R.u1.min() >= 0
        # x_j -> -x_j maps node j to N - j
        assert np.max(np.abs(R.u1[1:] - R.u1[1:][::-1])) < 1e-8


def test_residual_semitrivial(grid, P3):
    z = scalar_soliton(1.0, grid)
    res = elliptic_residual(RealPair(grid, z, 0 * z), P3)
    assert res["res1_l2"] < 1e-9 and res["res2_l2"] == 0.0


def test_residual_of_scaled_profile(Z3, P3):
    res = elliptic_residual(1.1 * Z3, P3)
    assert res["res1_l2"] > 0.01 and res["res2_l2"] > 0.01


def test_residual_rejects_negative_profile(Z3, P3):
    with pytest.raises(ValueError):
        elliptic_residual(-1.0 * Z3, P3)


def _perturbed(Z, seed):
    rng = np.random.default_rng(seed)
    g = Z.grid
    return RealPair(g, Z.u1 * (1 + 0.05 * sampling.smooth_bump(g, rng)),
                    Z.u2 * (1 + 0.05 * sampling.smooth_bump(g, rng)))


def test_newton_converges_to_Z(Z3, P3):
    gs = newton_solve(_perturbed(Z3, 3), P3, tol=1e-10)
    assert gs.provenance == "newton" and gs.residual_norm < 1e-10
    assert np.sqrt(distance_to_orbit(gs.profile, Z3, P3)) < 1e-8


def test_newton_quadratic_convergence(Z3, P3):
    h = newton_solve(_perturbed(Z3, 4), P3, tol=1e-10).history
    tail = [(a, b) for a, b in zip(h, h[1:]) if a < 1e-3]
    assert tail, h
    C = max(b / a**2 for a, b in tail)
    assert C < 10.0, h


def test_newton_fixed_point(Z3, P3):
    assert newton_solve(Z3, P3, tol=1e-10).iterations <= 1


def test_newton_semitrivial_branch(grid, P3):
    z = scalar_soliton(1.0, grid)
    gs = newton_solve(RealPair(grid, 1.02 * z, 0 * z), P3, tol=1e-10)
    assert gs.residual_norm < 1e-10 and np.all(gs.profile.u2 == 0)
    np.testing.assert_allclose(gs.profile.u1, z, atol=1e-9)


def test_newton_flags_singular_jacobian_at_p_equal_beta(grid):
    P = Params(1.5, 1.5)
    Z = synthesized_ground_state(P, grid).profile
    with pytest.raises(SingularJacobianError):
        newton_solve(Z, P, tol=1e-14)


def test_newton_iteration_cap(Z3, P3):
    with pytest.raises(ConvergenceError):
        newton_solve(_perturbed(Z3, 5), P3, tol=1e-10, max_iter=1)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_newton_rejects_nonfinite_start(grid, P3):
    with pytest.raises(ValueError):
        newton_solve(RealPair(grid, np.full(grid.N, 1e200), np.zeros(grid.N)), P3)


def _even_random_pair(grid, seed):
    rng = np.random.default_rng(seed)
    x = grid.x
    comps = []
    for _ in range(2):
        c = 1 + 0.3 * rng.standard_normal(3)
        comps.append(np.exp(-x**2 / rng.uniform(1, 4)) * (c[0] + c[1] * np.cos(x) ** 2 + 0.2 * c[2] * x**2 / (1 + x**2)))
    return RealPair(grid, np.abs(comps[0]), np.abs(comps[1]))


def test_gradient_flow_reaches_E_of_Z(grid, Z3, P3):
    init = _even_random_pair(grid, 0)
    gs = gradient_flow_minimize(init, P3, np.sqrt(2**0.5))
    assert gs.provenance == "gradient-flow" and not gs.semitrivial
    assert energy(gs.profile, P3) == pytest.approx(energy(Z3, P3), abs=1e-6)
    assert gs.multiplier == pytest.approx(1.0, abs=1e-6)
    # even data stays even
    assert np.max(np.abs(gs.profile.u1[1:] - gs.profile.u1[1:][::-1])) < 1e-8


def test_gradient_flow_from_Z_is_immediate(Z3, P3):
    gs = gradient_flow_minimize(Z3, P3, 2**0.25)
    assert gs.iterations == 0 and gs.multiplier == pytest.approx(1.0, abs=1e-6)


def test_gradient_flow_weak_coupling_collapses(grid):
    P = Params(1.0, 0.5)
    gs = gradient_flow_minimize(_even_random_pair(grid, 1), P, 2**0.25)
    m1 = grid.h * np.sum(gs.profile.u1**2)
    m2 = grid.h * np.sum(gs.profile.u2**2)
    assert gs.semitrivial and min(m1, m2) < 1e-6 * (m1 + m2)
    # the survivor is the scalar soliton of mass sqrt2: frequency 1/4, energy -sqrt2/12
    assert gs.multiplier == pytest.approx(0.25, abs=1e-6)
    assert energy(gs.profile, P) == pytest.approx(-np.sqrt(2) / 12, abs=1e-8)


def test_gradient_flow_energy_is_monotone(grid, P3):
    U = _even_random_pair(grid, 2)
    m = 2**0.25
    U = U * (m / np.sqrt(grid.h * np.sum(U.u1**2 + U.u2**2)))
    E = [energy(U, P3)]
    for _ in range(200):
        U = energy_trace_step(U, P3, 0.05, m)
        E.append(energy(U, P3))
    assert np.max(np.diff(E)) <= 1e-12


def test_gradient_flow_rejects_bad_mass(Z3, P3):
    with pytest.raises(ValueError):
        gradient_flow_minimize(Z3, P3, 0.0)


def test_gradient_flow_budget(grid, P3):
    with pytest.raises(ConvergenceError):
        gradient_flow_minimize(_even_random_pair(grid, 0), P3, 2**0.25, max_iter=5)


def test_spectral_resolution_consistency():
    P = Params(1.25, 2.0)
    a = synthesized_ground_state(P, make_grid(20, 512))
    b = synthesized_ground_state(P, make_grid(20, 1024))
    assert a.mass == pytest.approx(b.mass, abs=1e-12)
    np.testing.assert_allclose(shift_real(a.profile, 0.0).u1, b.profile.u1[::2], atol=1e-14)
