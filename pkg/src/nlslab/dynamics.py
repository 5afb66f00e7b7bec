"""Time evolution of the coupled system, its linearization, and the stability experiment.

The nonlinear flow is integrated by Strang splitting.  The nonlinear
sub-flow i psi_j' = -V_j psi_j with V_j = |psi_j|^{2p} + b|psi_k|^{p+1}|psi_j|^{p-1}
leaves both moduli unchanged, so it is an exact pointwise phase rotation;
the free flow is the Fourier multiplier exp(-i k^2 t / 2).  Both sub-steps
are isometries of L2 per component.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import sampling
from .functionals import energy, zpow
from .grid import ComplexPair, Params, RealPair, as_complex, l2_inner, norm_sq
from .linearized import hessian_F, phase_potentials
from .modulation import distance_to_orbit

__all__ = ["energy", "split_step", "evolve", "evolve_linearized", "stability_experiment",
           "EvolutionTrace", "InstabilityError", "linear_consistency"]


class InstabilityError(FloatingPointError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


def _phase_potential(a1, a2, params):
    p, b = params.p, params.beta
    if p == 1:
        return a1**2 + b * a2**2, a2**2 + b * a1**2
    return (zpow(a1, 2 * p) + b * zpow(a2, p + 1) * zpow(a1, p - 1),
            zpow(a2, 2 * p) + b * zpow(a1, p + 1) * zpow(a2, p - 1))


def _nonlinear(psi1, psi2, tau, params):
    V1, V2 = _phase_potential(np.abs(psi1), np.abs(psi2), params)
    return psi1 * np.exp(1j * tau * V1), psi2 * np.exp(1j * tau * V2)


def _free(psi, mult):
    return np.fft.ifft(mult * np.fft.fft(psi))


def split_step(Psi, dt: float, params: Params) -> ComplexPair:
    """One Strang step N(dt/2) K(dt) N(dt/2); negative dt runs backwards."""
    Psi = as_complex(Psi)
    g = Psi.grid
    mult = np.exp(-0.5j * g.k2 * dt)
    a, b = _nonlinear(Psi.phi1, Psi.phi2, 0.5 * dt, params)
    a, b = _free(a, mult), _free(b, mult)
    a, b = _nonlinear(a, b, 0.5 * dt, params)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InstabilityError("non-finite field after split step")
    return ComplexPair(g, a, b)


def _strang_block(psi1, psi2, n, dt, mult, params):
    """n Strang steps with the adjacent nonlinear half-steps merged."""
    psi1, psi2 = _nonlinear(psi1, psi2, 0.5 * dt, params)
    for i in range(n):
        psi1, psi2 = _free(psi1, mult), _free(psi2, mult)
        psi1, psi2 = _nonlinear(psi1, psi2, (0.5 if i == n - 1 else 1.0) * dt, params)
    return psi1, psi2


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    mass1: list = field(default_factory=list)
    mass2: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    gamma: list = field(default_factory=list)
    dt: float = 0.0
    scheme: str = "strang"
    final: ComplexPair | None = None
    aborted: bool = False
    extra: dict = field(default_factory=dict)

    def mass_drift(self) -> float:
        """Largest relative change of either component mass."""
        out = 0.0
        for m in (self.mass1, self.mass2):
            m = np.asarray(m)
            if m[0] > 0:
                out = max(out, float(np.max(np.abs(m - m[0])) / m[0]))
        return out

    def energy_drift(self) -> float:
        e = np.asarray(self.energy)
        return float(np.max(np.abs(e - e[0])))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "mass1", "mass2", "energy", "gamma"])
        gam = self.gamma if self.gamma else [float("nan")] * len(self.times)
        for row in zip(self.times, self.mass1, self.mass2, self.energy, gam):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _record(trace, t, psi1, psi2, g, params, orbit):
    Psi = ComplexPair(g, psi1, psi2)
    trace.times.append(t)
    trace.mass1.append(g.h * float(np.sum(np.abs(psi1) ** 2)))
    trace.mass2.append(g.h * float(np.sum(np.abs(psi2) ** 2)))
    trace.energy.append(energy(Psi, params))
    if orbit is not None:
        trace.gamma.append(distance_to_orbit(Psi, orbit, params, norm="standard"))


def _n_steps(T, dt):
    if T < 0:
        raise ValueError("T must be nonnegative")
    if dt == 0:
        raise ValueError("dt must be nonzero")
    n = int(round(T / abs(dt)))
    if abs(n * abs(dt) - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"T={T} is not a multiple of |dt|={abs(dt)}")
    return n


def evolve(Psi0, T: float, dt: float, params: Params, record_every: int = 100,
           track_orbit=None) -> EvolutionTrace:
    """Integrate over [0, T] with step dt (dt < 0 integrates backwards in time).

    ``track_orbit`` (a GroundState or RealPair) turns on the orbit distance
    Gamma(t), the squared standard-H1 distance to its soliton orbit.
    """
    Psi0 = as_complex(Psi0)
    g = Psi0.grid
    orbit = getattr(track_orbit, "profile", track_orbit)
    n = _n_steps(T, dt)
    mult = np.exp(-0.5j * g.k2 * dt)
    trace = EvolutionTrace(dt=dt)
    psi1, psi2 = Psi0.phi1.copy(), Psi0.phi2.copy()
    _record(trace, 0.0, psi1, psi2, g, params, orbit)
    done = 0
    while done < n:
        m = min(record_every, n - done)
        psi1, psi2 = _strang_block(psi1, psi2, m, dt, mult, params)
        done += m
        if not (np.all(np.isfinite(psi1)) and np.all(np.isfinite(psi2))):
            trace.aborted = True
            raise InstabilityError(f"non-finite field at step {done}", trace)
        _record(trace, done * dt, psi1, psi2, g, params, orbit)
    trace.final = ComplexPair(g, psi1, psi2)
    return trace


def _pointwise_generator(R: RealPair, params: Params):
    """exp of the pointwise part dU/dt = -Q V, dV/dt = H_F U, as (N, 4, 4)."""
    H11, H12, H22 = hessian_F(R, params)
    q11, q22 = phase_potentials(R, params)
    n = R.grid.N
    M = np.zeros((n, 4, 4))
    M[:, 0, 2] = -q11
    M[:, 1, 3] = -q22
    M[:, 2, 0], M[:, 2, 1] = H11, H12
    M[:, 3, 0], M[:, 3, 1] = H12, H22
    return M


def evolve_linearized(W0, R: RealPair, T: float, dt: float, params: Params) -> ComplexPair:
    """Integrate dW/dt = L W with the Strang skeleton of the nonlinear flow.

    The complex-linear part i(1/2 d_xx - 1) is the Fourier multiplier
    exp(-i(k^2/2 + 1) t); the pointwise real-linear part is propagated by
    exact 4x4 matrix exponentials on (u1, u2, v1, v2).
    """
    W0 = as_complex(W0)
    g = W0.grid
    n = _n_steps(T, dt)
    M = _pointwise_generator(R, params)
    E_half = expm(0.5 * dt * M)
    mult = np.exp(-1j * (0.5 * g.k2 + 1.0) * dt)

    def pointwise(w1, w2):
        y = np.stack([w1.real, w2.real, w1.imag, w2.imag], axis=1)
        y = np.einsum("nij,nj->ni", E_half, y)
        return y[:, 0] + 1j * y[:, 2], y[:, 1] + 1j * y[:, 3]

    w1, w2 = W0.phi1.copy(), W0.phi2.copy()
    for _ in range(n):
        w1, w2 = pointwise(w1, w2)
        w1, w2 = _free(w1, mult), _free(w2, mult)
        w1, w2 = pointwise(w1, w2)
    if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2))):
        raise InstabilityError("non-finite linearized field")
    return ComplexPair(g, w1, w2)


def linear_consistency(R: RealPair, params: Params, W0, epsilons=(1e-2, 1e-3), t: float = 1.0,
                       dt: float = 1e-3, reference: str = "numerical") -> dict:
    """Rotating-frame comparison of the nonlinear and linearized flows.

    err(eps) = |(e^{-it} Psi_eps(t) - B(t))/eps - W(t)|_2 with Psi_eps(0) = R + eps W0.
    ``reference="exact"`` takes B(t) = R; ``"numerical"`` takes B = e^{-it} times
    the split-step evolution of R itself, which removes the O(dt^2)/eps bias
    of the standing wave's own splitting error.  First-order agreement means
    err is proportional to eps; ``ratio`` is err(eps_0)/err(eps_1).
    """
    if reference not in ("exact", "numerical"):
        raise ValueError(f"unknown reference {reference!r}")
    W0 = as_complex(W0)
    Rc = R.to_complex()
    W = evolve_linearized(W0, R, t, dt, params)
    rot = np.exp(-1j * t)
    base = Rc if reference == "exact" else evolve(Rc, t, dt, params, record_every=10**9).final * rot
    errs = {}
    for eps in epsilons:
        Psi = evolve(Rc + W0 * eps, t, dt, params, record_every=10**9).final
        D = (Psi * rot - base) * (1.0 / eps) - W
        errs[eps] = float(np.sqrt(l2_inner(D, D)))
    e = [errs[eps] for eps in epsilons]
    ratio = e[0] / e[1] if len(e) > 1 and e[1] > 0 else float("nan")
    return {"errors": errs, "ratio": ratio, "W_norm": float(np.sqrt(l2_inner(W, W))),
            "reference": reference}


def perturbation(grid, seed: int, modes: int = 32) -> ComplexPair:
    """Unit standard-H1 random smooth pair with a k^-2 envelope on the lowest modes."""
    rng = np.random.default_rng(seed)
    W = sampling.smooth_complex_pair(grid, rng, modes=modes, envelope=2.0)
    return W * (1.0 / np.sqrt(norm_sq(W, "h1_standard")))


def stability_experiment(R, params: Params, epsilon: float, T: float = 10.0, dt: float = 1e-3,
                         perturbation_seed: int = 0, K: float = 10.0,
                         record_every: int = 100) -> tuple[EvolutionTrace, dict]:
    """Evolve a mass-shell perturbation of R and monitor the orbit distance."""
    R = getattr(R, "profile", R)
    Rc = R.to_complex()
    g = R.grid
    Psi = Rc + perturbation(g, perturbation_seed) * epsilon
    e_pre = energy(Psi, params) - energy(R, params)
    mR = l2_inner(R, R)
    Psi = Psi * np.sqrt(mR / l2_inner(Psi, Psi))
    trace = evolve(Psi, T, dt, params, record_every=record_every, track_orbit=R)
    sup_gamma = float(np.max(trace.gamma))
    gamma0 = float(trace.gamma[0])
    summary = {"epsilon": epsilon, "gamma0": gamma0, "sup_gamma": sup_gamma, "K": K,
               "stable": bool(sup_gamma <= K * gamma0) if epsilon > 0 else bool(sup_gamma < 1e-8),
               "energy_gap": energy(Psi, params) - energy(R, params),
               "energy_gap_before_rescaling": e_pre}
    trace.extra.update(summary)
    return trace, summary
