"""Ground states: the closed-form Z = a(z, z), Newton and normalized gradient flow."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg.lapack import dgecon

from .functionals import check_nonnegative, energy, nonlinearity
from .grid import Grid, Params, RealPair, l2_inner, recenter, second_derivative
from .linearized import assemble_Lplus, translation_mode

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


class SingularJacobianError(RuntimeError):
    pass


@dataclass
class GroundState:
    params: Params
    grid: Grid
    profile: RealPair
    residual_norm: float
    provenance: str  # closed-form | newton | gradient-flow
    iterations: int = 0
    history: list = field(default_factory=list)
    multiplier: float | None = None
    semitrivial: bool = False

    @property
    def mass(self) -> float:
        return l2_inner(self.profile, self.profile)


def scalar_soliton(p: float, grid: Grid) -> np.ndarray:
    """z(x) = (p+1)^{1/2p} sech^{1/p}(sqrt(2) p x), solving -z''/2 + z = z^{2p+1}."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    s = 1.0 / np.cosh(np.sqrt(2.0) * p * grid.x)
    return (p + 1) ** (1.0 / (2 * p)) * s ** (1.0 / p)


def coupling_amplitude(params: Params) -> float:
    if params.beta <= -1:
        raise ValueError("amplitude needs beta > -1")
    return (1.0 + params.beta) ** (-1.0 / (2 * params.p))


def elliptic_residual(R: RealPair, params: Params) -> dict:
    check_nonnegative(R, tol=1e-12)
    if params.p < 1 and (np.any(R.u1 <= 0) or np.any(R.u2 <= 0)):
        raise ValueError("p < 1 with vanishing components needs negative powers")
    res = _residual_vectors(R, params)
    g = R.grid
    return {"res1_l2": float(np.sqrt(g.h * np.sum(res[0] ** 2))),
            "res2_l2": float(np.sqrt(g.h * np.sum(res[1] ** 2)))}


def _residual_vectors(R, params):
    n1, n2 = nonlinearity(R, params)
    g = R.grid
    r1 = -0.5 * second_derivative(R.u1, g) + R.u1 - n1
    r2 = -0.5 * second_derivative(R.u2, g) + R.u2 - n2
    return r1, r2


def _residual_norm(R, params):
    r1, r2 = _residual_vectors(R, params)
    return float(np.sqrt(R.grid.h * (np.sum(r1**2) + np.sum(r2**2))))


def synthesized_ground_state(params: Params, grid: Grid) -> GroundState:
    a = coupling_amplitude(params)
    z = scalar_soliton(params.p, grid)
    Z = RealPair(grid, a * z, a * z)
    return GroundState(params, grid, Z, _residual_norm(Z, params), "closed-form")


def newton_solve(initial: RealPair, params: Params, tol: float = 1e-10, max_iter: int = 30,
                 rcond_min: float = 1e-11) -> GroundState:
    """Damped Newton on the elliptic system with L+ as Jacobian.

    The translation zero mode of L+ is removed by bordering the Jacobian
    with the current d_x R (the update is kept orthogonal to it).  A
    bordered matrix with reciprocal condition below ``rcond_min`` means
    the kernel of L+ is larger than the translation mode.
    """
    R = initial
    grid = R.grid
    res = _residual_norm(R, params)
    if not np.isfinite(res):
        raise ValueError("initial residual is not finite")
    history = [res]
    it = 0
    while res >= tol:
        if it >= max_iter:
            raise ConvergenceError(f"Newton did not reach {tol:g} in {max_iter} steps (residual {res:.3e})")
        J = assemble_Lplus(R, params).matrix
        t = translation_mode(R).stacked()
        n = J.shape[0]
        B = np.zeros((n + 1, n + 1))
        B[:n, :n] = J
        nt = np.linalg.norm(t)
        if nt > 0:
            B[:n, n] = B[n, :n] = t / nt
        else:
            B[n, n] = 1.0
        lu, piv, info = sla.lapack.dgetrf(B)
        rcond, _ = dgecon(lu, np.abs(B).sum(axis=0).max(), norm="1")
        if info != 0 or rcond < rcond_min:
            raise SingularJacobianError(f"bordered Jacobian is singular (rcond={rcond:.2e})")
        r1, r2 = _residual_vectors(R, params)
        rhs = np.concatenate([-r1, -r2, [0.0]])
        delta = sla.lu_solve((lu, piv), rhs)[:n]
        step = 1.0
        for _ in range(21):
            trial = RealPair.from_stacked(grid, R.stacked() + step * delta)
            trial = trial.map(lambda u: np.clip(u, 0.0, None))
            new = _residual_norm(trial, params)
            if new < res:
                break
            step *= 0.5
        else:
            raise ConvergenceError("line search failed to reduce the residual")
        R, res = trial, new
        it += 1
        history.append(res)
        log.debug("newton iter %d step %.3g residual %.3e", it, step, res)
    return GroundState(params, grid, R, res, "newton", it, history)


def _multiplier(U, N1, N2):
    g = U.grid
    num = g.h * (np.sum(N1 * U.u1) + np.sum(N2 * U.u2))
    kin = g.h * (np.sum(-0.5 * second_derivative(U.u1, g) * U.u1)
                 + np.sum(-0.5 * second_derivative(U.u2, g) * U.u2))
    return (num - kin) / l2_inner(U, U)


def gradient_flow_minimize(initial: RealPair, params: Params, mass_target: float,
                           dt: float = 0.05, tol: float = 1e-9, max_iter: int = 200_000,
                           semitrivial_fraction: float = 1e-6) -> GroundState:
    """Minimize E on {|U|_2 = mass_target} by a normalized gradient flow.

    Each step treats -1/2 d_xx + 1 implicitly (a Fourier multiplier), the
    nonlinearity and the multiplier shift (mu - 1) U explicitly, then
    rescales the pair by one common factor.
    Stops when the L2 norm of the projected gradient drops below ``tol``.
    """
    if not mass_target > 0:
        raise ValueError("mass_target must be positive")
    g = initial.grid
    denom = 1.0 + dt * (0.5 * g.k2 + 1.0)

    U = initial.map(np.abs)
    U = U * (mass_target / np.sqrt(l2_inner(U, U)))
    history = []
    for it in range(max_iter + 1):
        N1, N2 = nonlinearity(U, params)
        mu = _multiplier(U, N1, N2)
        gr1 = -0.5 * second_derivative(U.u1, g) + mu * U.u1 - N1
        gr2 = -0.5 * second_derivative(U.u2, g) + mu * U.u2 - N2
        gnorm = float(np.sqrt(g.h * (np.sum(gr1**2) + np.sum(gr2**2))))
        if it % 50 == 0:
            history.append((it, energy(U, params), gnorm))
        if gnorm < tol:
            break
        U = _flow_step(U, N1, N2, mu, dt, denom, mass_target)
    else:
        raise ConvergenceError(f"gradient flow not converged (gradient {gnorm:.3e})")
    masses = l2_inner(U, U)
    m1 = g.h * np.sum(U.u1**2)
    semi = min(m1, masses - m1) < semitrivial_fraction * masses
    return GroundState(params, g, recenter(U), _residual_norm(U, params), "gradient-flow", it,
                       history, multiplier=float(mu), semitrivial=bool(semi))


def _flow_step(U, N1, N2, mu, dt, denom, mass_target):
    # the shift by (mu - 1) U makes stationary points of the step exact
    # critical points of E on the sphere for any converged multiplier
    g = U.grid
    c = dt * (mu - 1.0)
    new = RealPair(g, np.fft.ifft(np.fft.fft(U.u1 + dt * N1 - c * U.u1) / denom).real,
                   np.fft.ifft(np.fft.fft(U.u2 + dt * N2 - c * U.u2) / denom).real)
    return new * (mass_target / np.sqrt(l2_inner(new, new)))


def energy_trace_step(U, params, dt, mass_target):
    """One renormalized gradient-flow step (exposed for monotonicity checks)."""
    denom = 1.0 + dt * (0.5 * U.grid.k2 + 1.0)
    N1, N2 = nonlinearity(U, params)
    return _flow_step(U, N1, N2, _multiplier(U, N1, N2), dt, denom, mass_target)
