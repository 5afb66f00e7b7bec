"""The twelve end-to-end acceptance checks, as run by ``nlslab verify-all``.

Each check returns a CheckResult; ``quick`` lowers sample counts only,
never tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import coercivity as co
from . import dynamics as dy
from . import sampling
from .grid import ComplexPair, Params, RealPair, make_grid, norm_sq, shift_and_phase
from .ground_state import elliptic_residual, newton_solve, scalar_soliton, synthesized_ground_state
from .linearized import (assemble_Lplus, cosine_similarity, decouple_at_Z, kernel_alignment,
                         symmetric_spectrum, translation_mode, weighted_eigenproblem)
from .modulation import distance_to_orbit, modulation_fit
from .variational import algebraic_region_check, infima_estimate, scalar_constants


@dataclass
class CheckResult:
    number: int
    name: str
    ok: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.number:2d} {self.name}"


def _Z(p, beta, grid):
    return synthesized_ground_state(Params(p, beta), grid).profile


def check_closed_form(grid, quick=False):
    worst = 0.0
    for p in (1.0, 1.25, 1.5, 1.9):
        for b in (1.5, 2.0, 3.0):
            r = elliptic_residual(_Z(p, b, grid), Params(p, b))
            worst = max(worst, r["res1_l2"], r["res2_l2"])
    return CheckResult(1, "closed-form ground state residual", worst < 1e-9, {"max_residual": worst})


def check_nondegeneracy(grid, quick=False):
    det, ok = {}, True
    for p, b, want in ((1.0, 2.0, 1), (1.0, 3.0, 1), (1.5, 1.5, 2)):
        P = Params(p, b)
        Z = _Z(p, b, grid)
        rep = symmetric_spectrum(assemble_Lplus(Z, P), k=6)
        kd = rep.kernel_dim
        if want == 1:
            cos = kernel_alignment(rep, translation_mode(Z))
            ok &= kd == 1 and cos > 0.999
            det[f"{p},{b}"] = {"kernel_dim": kd, "cosine": cos}
        else:
            ok &= kd >= 2
            det[f"{p},{b}"] = {"kernel_dim": kd}
    return CheckResult(2, "kernel of L+ (non-degeneracy)", bool(ok), det)


def check_eigen_formulas(grid, quick=False):
    d = decouple_at_Z(Params(1.0, 2.0), grid)
    ok = d["lambda1"] == 3.0 and abs(d["lambda2"] - 1.0 / 3.0) < 1e-15
    mu, W = weighted_eigenproblem(1.0, grid, k=3)
    z = scalar_soliton(1.0, grid)
    dz = translation_mode(RealPair(grid, z, z)).u1
    c1, c2 = cosine_similarity(W[0], z), cosine_similarity(W[1], dz)
    ok &= abs(mu[0] - 1) < 1e-6 and abs(mu[1] - 3) < 1e-6 and c1 > 0.999 and c2 > 0.999
    return CheckResult(3, "eigenvalue formulas", bool(ok),
                       {"lambda": (d["lambda1"], d["lambda2"]), "mu": mu[:2].tolist(), "cos": (c1, c2)})


def check_coercivity(grid, quick=False):
    P = Params(1.0, 2.0)
    Z = _Z(1.0, 2.0, grid)
    v = co.min_rayleigh_over_V(Z, P).min_rayleigh_l2
    v0 = co.min_rayleigh_over_V0(Z, P).min_rayleigh_l2
    lm = co.min_rayleigh_Lminus_constrained(Z, P).min_rayleigh_l2
    un = co.min_rayleigh_unconstrained(Z, P).min_rayleigh_l2
    ok = abs(v) < 1e-6 and v0 > 1e-3 and lm > 1e-3 and un < -0.05
    return CheckResult(4, "coercivity signs", bool(ok), {"V": v, "V0": v0, "Lminus": lm, "free": un})


def check_mass_shell(grid, quick=False):
    Z = _Z(1.0, 2.0, grid)
    n = 200 if quick else 1000
    worst = 0.0
    for i in range(n):
        rng = np.random.default_rng([1, i])
        W = sampling.smooth_complex_pair(grid, rng)
        W = W * (10.0 ** rng.uniform(-3, -1) / np.sqrt(norm_sq(W, "h1_standard")))
        Phi = co.to_shell(Z.to_complex() + W, Z)
        worst = max(worst, co.mass_shell_identity_check(Phi, Z)["gap"])
    return CheckResult(5, "mass-shell identity", worst < 1e-10, {"samples": n, "max_gap": worst})


def check_convexity(grid, quick=False):
    P = Params(1.0, 2.0)
    Z = _Z(1.0, 2.0, grid)
    n = 50 if quick else 200
    scan = co.energy_gap_scan(Z, P, sample_count=n, amplitude_grid=(0.01, 0.02, 0.03, 0.04),
                              d_max=0.05)
    neg = int(np.sum(scan.gap_I < 0))
    ok = neg == 0 and scan.slope > 0 and len(scan.d2) == n
    return CheckResult(6, "energy convexity scan", bool(ok),
                       {"samples": len(scan.d2), "negative": neg, "slope": scan.slope,
                        "min_ratio": scan.min_ratio})


def gaussian_pair(grid):
    x = grid.x
    return ComplexPair(grid, np.exp(-x**2), 0.8 * np.exp(-(x - 1) ** 2 / 2) * np.exp(0.5j * x))


def check_conservation(grid, quick=False):
    P = Params(1.0, 2.0)
    G = gaussian_pair(grid)
    a = dy.evolve(G, 10.0, 1e-3, P)
    b = dy.evolve(G, 10.0, 5e-4, P)
    ratio = a.energy_drift() / b.energy_drift()
    ok = max(a.mass_drift(), b.mass_drift()) < 1e-11 and a.energy_drift() < 1e-6 and 3.5 <= ratio <= 4.5
    return CheckResult(7, "conservation laws", bool(ok),
                       {"mass_drift": a.mass_drift(), "energy_drift": a.energy_drift(), "halving_ratio": ratio})


def check_stability(grid, quick=False):
    P = Params(1.0, 3.0)
    Z = _Z(1.0, 3.0, grid)
    _, s1 = dy.stability_experiment(Z, P, 1e-2, T=10.0, dt=1e-3)
    _, s2 = dy.stability_experiment(Z, P, 5e-3, T=10.0, dt=1e-3)
    ratio = s1["sup_gamma"] / s2["sup_gamma"]
    ok = s1["sup_gamma"] <= 10 * s1["gamma0"] and 2.0 <= ratio <= 6.0
    return CheckResult(8, "orbital stability", bool(ok),
                       {"sup_gamma": s1["sup_gamma"], "gamma0": s1["gamma0"], "eps_ratio": ratio})


def newton_perturbation(Z, i):
    rng = np.random.default_rng([9, i])
    g = Z.grid
    return RealPair(g, Z.u1 * (1 + 0.05 * sampling.smooth_bump(g, rng)),
                    Z.u2 * (1 + 0.05 * sampling.smooth_bump(g, rng)))


def check_isolatedness(grid, quick=False):
    P = Params(1.0, 3.0)
    Z = _Z(1.0, 3.0, grid)
    n = 5 if quick else 20
    worst = 0.0
    for i in range(n):
        R = newton_solve(newton_perturbation(Z, i), P, tol=1e-10).profile
        worst = max(worst, np.sqrt(distance_to_orbit(R, Z, P)))
    return CheckResult(9, "isolatedness (Newton)", worst < 1e-8, {"runs": n, "max_distance": worst})


def check_variational(grid, quick=False):
    sc = scalar_constants(1.0, grid)
    rep = infima_estimate(Params(1.0, 3.0), grid, n_samples=50 if quick else 200)
    pinch = {b: algebraic_region_check(Params(1.0, b), 2000)["pinch_ok"] for b in (2.0, 3.0, 0.5)}
    ok = (abs(sc["S1"] - 1.941967) < 1e-6 and abs(sc["T1"] - 0.942809) < 1e-6
          and abs(rep.I_at_Z - 0.471405) < 1e-6 and rep.chain_ok
          and pinch[2.0] and pinch[3.0] and not pinch[0.5])
    return CheckResult(10, "variational constants and region check", bool(ok),
                       {"S1": sc["S1"], "T1": sc["T1"], "I_Z": rep.I_at_Z, "chain": rep.chain_ok,
                        "pinch": {str(k): v for k, v in pinch.items()}})


def check_modulation(grid, quick=False):
    P = Params(1.0, 2.0)
    Z = _Z(1.0, 2.0, grid)
    truth = [(0.7, 1.1, 0.4), (-1.3, 5.0, 2.2), (0.05, 0.3, 6.0)]
    err, res = 0.0, 0.0
    for j, (x0, t1, t2) in enumerate(truth):
        fit = modulation_fit(shift_and_phase(Z, x0, t1, t2), Z, P)
        d = np.array([fit.x0 - x0, fit.theta1 - t1, fit.theta2 - t2])
        d[1:] = (d[1:] + np.pi) % (2 * np.pi) - np.pi
        err = max(err, float(np.max(np.abs(d))))
    for i in range(5 if quick else 20):
        rng = np.random.default_rng([11, i])
        W = sampling.smooth_complex_pair(grid, rng)
        W = W * (0.05 / np.sqrt(norm_sq(W, "h1_standard")))
        Phi = shift_and_phase(Z.to_complex() + W, rng.uniform(-2, 2), *rng.uniform(0, 6, 2))
        fit = modulation_fit(Phi, Z, P)
        scale = np.sqrt(norm_sq(Z, "h1_energy") * norm_sq(fit.W, "h1_energy"))
        res = max(res, max(abs(r) for r in fit.orthogonality_residuals) / scale)
    return CheckResult(11, "modulation correctness", err < 1e-8 and res < 1e-8,
                       {"max_parameter_error": err, "max_relative_residual": res})


def check_linear_consistency(grid, quick=False):
    P = Params(1.0, 3.0)
    Z = _Z(1.0, 3.0, grid)
    out = dy.linear_consistency(Z, P, dy.perturbation(grid, 0), epsilons=(1e-2, 1e-3), t=1.0)
    ok = 5.0 <= out["ratio"] <= 20.0
    return CheckResult(12, "linear/nonlinear consistency", bool(ok),
                       {"errors": {str(k): v for k, v in out["errors"].items()}, "ratio": out["ratio"]})


ALL_CHECKS = [check_closed_form, check_nondegeneracy, check_eigen_formulas, check_coercivity,
              check_mass_shell, check_convexity, check_conservation, check_stability,
              check_isolatedness, check_variational, check_modulation, check_linear_consistency]


def run_all(quick=False, grid=None, report=print):
    grid = grid or make_grid()
    results = []
    for fn in ALL_CHECKS:
        try:
            r = fn(grid, quick)
        except Exception as e:  # a crash is a failed criterion, with the reason kept
            r = CheckResult(ALL_CHECKS.index(fn) + 1, fn.__name__, False, {"error": repr(e)})
        if report:
            report(r.line())
        results.append(r)
    return results
