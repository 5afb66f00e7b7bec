"""Constrained Rayleigh quotients of L+ and L-, and the convexity experiments.

Constrained minima are computed by deflation: an orthonormal basis of the
L2-orthogonal complement of the constraint vectors is built by a full QR
factorization, the operator is compressed onto it and the compressed matrix
is diagonalized.  Constraints written in an H1 pairing are first turned into
L2 constraints through the Gram operator of that pairing.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from . import sampling
from .functionals import action_I, energy
from .grid import (ComplexPair, Params, RealPair, gram_operator, inner_products, l2_inner,
                   norm_sq, pairing)
from .linearized import (apply_hessian, assemble_Lminus, assemble_Lplus, phase_potentials,
                         translation_mode)
from .modulation import ModulationError, modulation_fit


class DegenerateConstraintsError(ValueError):
    pass


class ShellMismatchError(ValueError):
    pass


@dataclass
class CoercivityReport:
    kind: str
    constraints: str
    min_rayleigh_l2: float
    min_rayleigh_h1: float | None
    witness: RealPair
    params: Params
    grid: object
    lowest: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constraint_residuals: tuple = ()
    witness_quotient: float = float("nan")

    def to_json(self):
        return {
            "operator": self.kind,
            "constraints": self.constraints,
            "min_rayleigh_l2": self.min_rayleigh_l2,
            "min_rayleigh_h1": self.min_rayleigh_h1,
            "lowest_l2": [float(v) for v in self.lowest],
            "constraint_residuals": [float(r) for r in self.constraint_residuals],
            "params": {"p": self.params.p, "beta": self.params.beta},
            "grid": {"L": self.grid.L, "N": self.grid.N},
        }


def _l2_vector(c: RealPair, tag: str) -> np.ndarray:
    g = c.grid
    return np.concatenate([gram_operator(c.u1, g, tag), gram_operator(c.u2, g, tag)])


def _constraint_matrix(constraints):
    C = np.column_stack([_l2_vector(c, tag) for c, tag in constraints])
    G = C.T @ C
    if np.linalg.cond(G) > 1e12:
        raise DegenerateConstraintsError("constraint vectors are (numerically) dependent")
    return C


def project_constraints(U: RealPair, constraints) -> RealPair:
    """L2-orthogonal projection of U onto {V : (V, c)_tag = 0 for every (c, tag)}."""
    if not constraints:
        return U
    C = _constraint_matrix(constraints)
    u = U.stacked()
    coeff = np.linalg.solve(C.T @ C, C.T @ u)
    return RealPair.from_stacked(U.grid, u - C @ coeff)


def _complement_basis(C: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(C, mode="complete")
    return Q[:, C.shape[1]:]


def _h1_gram(grid, blocks=2):
    K = -grid.second_derivative_matrix + np.eye(grid.N)
    return sla.block_diag(*([K] * blocks))


def constrained_minimum(op, constraints, kind_label: str, params, h1: bool = True,
                        n_lowest: int = 4) -> CoercivityReport:
    grid = op.grid
    A = op.matrix
    if constraints:
        C = _constraint_matrix(constraints)
        Q = _complement_basis(C)
        Ap = Q.T @ A @ Q
    else:
        Q = None
        Ap = A
    Ap = 0.5 * (Ap + Ap.T)
    evals, evecs = np.linalg.eigh(Ap)
    y = evecs[:, 0]
    w = Q @ y if Q is not None else y
    witness = RealPair.from_stacked(grid, w / np.sqrt(grid.h * (w @ w)))
    min_h1 = None
    if h1:
        B = _h1_gram(grid)
        Bp = Q.T @ B @ Q if Q is not None else B
        min_h1 = float(sla.eigh(Ap, 0.5 * (Bp + Bp.T), eigvals_only=True, subset_by_index=[0, 0])[0])
    resid = tuple(abs(pairing(witness, c, tag)) / np.sqrt(abs(norm_sq(c, tag)))
                  for c, tag in constraints)
    wq = op.quadratic_form(witness) / l2_inner(witness, witness)
    return CoercivityReport(op.kind, kind_label, float(evals[0]), min_h1, witness, params, grid,
                            evals[:n_lowest].copy(), resid, float(wq))


def min_rayleigh_unconstrained(R: RealPair, params: Params, operator="Lplus") -> CoercivityReport:
    op = assemble_Lplus(R, params) if operator == "Lplus" else assemble_Lminus(R, params)
    return constrained_minimum(op, [], "none", params)


def min_rayleigh_over_V(R: RealPair, params: Params) -> CoercivityReport:
    op = assemble_Lplus(R, params)
    return constrained_minimum(op, [(R, "l2")], "(U,R)=0", params)


def v0_constraints(R: RealPair, params: Params):
    return [(R, "l2"), (apply_hessian(R, translation_mode(R), params), "l2")]


def min_rayleigh_over_V0(R: RealPair, params: Params) -> CoercivityReport:
    op = assemble_Lplus(R, params)
    return constrained_minimum(op, v0_constraints(R, params), "(U,R)=(U,H_F dR)=0", params)


def lminus_constraints(R: RealPair):
    g = R.grid
    zero = np.zeros(g.N)
    return [(RealPair(g, R.u1, zero), "h1_energy"), (RealPair(g, zero, R.u2), "h1_energy")]


def min_rayleigh_Lminus_constrained(R: RealPair, params: Params) -> CoercivityReport:
    """Minimum of (L- V, V)/|V|^2 with (v_i, r_i)_He = 0.

    The H1 constraints are imposed in their L2 form (q_ii r_i, v_i) = 0,
    which coincides with the Gram-operator form when R solves the system;
    the report carries the residuals in the energy pairing.
    """
    op = assemble_Lminus(R, params)
    q11, q22 = phase_potentials(R, params)
    g = R.grid
    zero = np.zeros(g.N)
    l2_form = [(RealPair(g, q11 * R.u1, zero), "l2"), (RealPair(g, zero, q22 * R.u2), "l2")]
    rep = constrained_minimum(op, l2_form, "(v_i,r_i)_He=0", params)
    rep.constraint_residuals = tuple(
        abs(pairing(rep.witness, c, tag)) / np.sqrt(norm_sq(c, tag)) for c, tag in lminus_constraints(R))
    return rep


def mass_shell_identity_check(Phi, R: RealPair, rtol: float = 1e-10) -> dict:
    mPhi, mR = l2_inner(Phi, Phi), l2_inner(R, R)
    if abs(mPhi - mR) > rtol * mR:
        raise ShellMismatchError(f"|Phi|^2={mPhi:.15g} differs from |R|^2={mR:.15g}")
    W = Phi - R
    if isinstance(W, RealPair):
        W = W.to_complex()
    U, V = W.real, W.imag
    lhs = l2_inner(R, U)
    rhs = -0.5 * (l2_inner(U, U) + l2_inner(V, V))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def to_shell(Phi, R):
    return Phi * np.sqrt(l2_inner(R, R) / l2_inner(Phi, Phi))


def lower_bound_constants_fit(R: RealPair, params: Params, sample_count: int = 500,
                              amplitude: float = 0.1, seed: int = 0, alpha: float | None = None) -> dict:
    """Monte-Carlo check of (L+U,U) >= D|U|_H^2 - D1|W|^4 - D2|W|^2 |W'|.

    D is half the H1-normalised V0 coercivity constant; D1, D2 >= 0 are
    the smallest (in the sum) constants making every sample satisfy the
    inequality, found by a two-variable linear program.
    """
    if alpha is None:
        alpha = min_rayleigh_over_V0(R, params).min_rayleigh_h1
    D = 0.5 * alpha
    Lp = assemble_Lplus(R, params)
    g_vec = apply_hessian(R, translation_mode(R), params)
    rows = []
    for i in range(sample_count):
        rng = np.random.default_rng([seed, i])
        W0 = sampling.smooth_complex_pair(R.grid, rng, modes=64)
        U0 = project_constraints(W0.real, [(g_vec, "l2")])
        W0 = ComplexPair.from_parts(U0, W0.imag)
        W0 = W0 * (amplitude * rng.uniform(0.05, 1.0) / np.sqrt(norm_sq(W0, "h1_standard")))
        Phi = to_shell(R.to_complex() + W0, R)
        W = Phi - R.to_complex()
        U = W.real
        lhs = Lp.quadratic_form(U)
        w2 = l2_inner(W, W)
        dw = np.sqrt(norm_sq(W, "h1_standard") - w2)
        rows.append((D * norm_sq(U, "h1_standard") - lhs, w2**2, w2 * dw, lhs, pairing(U, g_vec, "l2")))
    rows = np.array(rows)
    deficit, a, b = rows[:, 0], rows[:, 1], rows[:, 2]
    if np.all(deficit <= 0):
        D1 = D2 = 0.0
    else:
        res = linprog(c=[1.0, 1.0], A_ub=-np.column_stack([a, b]), b_ub=-deficit,
                      bounds=[(0, None), (0, None)], method="highs")
        if not res.success:
            raise RuntimeError(f"constant fit failed: {res.message}")
        D1, D2 = map(float, res.x)
    slack = D1 * a + D2 * b - deficit
    violations = int(np.sum(slack < -1e-12 * np.maximum(1.0, np.abs(deficit))))
    return {"D": D, "D1": D1, "D2": D2, "violations": violations, "alpha": alpha,
            "samples": sample_count, "max_constraint_residual": float(np.max(np.abs(rows[:, 4]))),
            "holds_without_higher_order": int(np.sum(deficit <= 0))}


@dataclass
class GapScan:
    d2: np.ndarray
    gap_I: np.ndarray
    gap_E: np.ndarray
    amplitude: np.ndarray
    dropped: int
    slope: float
    slope_affine: float
    min_ratio: float

    def rows(self):
        return zip(self.amplitude, self.d2, self.gap_I, self.gap_E)


def _gap_sample(R, params, seed, i, amp, IR, ER):
    rng = np.random.default_rng([seed, i])
    W0 = sampling.smooth_complex_pair(R.grid, rng, modes=64)
    W0 = W0 * (amp / np.sqrt(norm_sq(W0, "h1_standard")))
    Phi = to_shell(R.to_complex() + W0, R)
    try:
        fit = modulation_fit(Phi, R, params, norm="standard")
    except ModulationError:
        return None
    return (amp, fit.distance_sq_h1, action_I(Phi, params) - IR, energy(Phi, params) - ER)


def _gap_chunk(args):
    R, params, seed, idx, amps, IR, ER = args
    return [_gap_sample(R, params, seed, i, a, IR, ER) for i, a in zip(idx, amps)]


def energy_gap_scan(R: RealPair, params: Params, sample_count: int = 200,
                    amplitude_grid=(0.01, 0.02, 0.03, 0.04), seed: int = 0,
                    d_max: float | None = None, jobs: int = 1) -> GapScan:
    """Sample Phi on the mass shell near R; tabulate (d^2, I(Phi) - I(R)).

    d^2 is the squared standard-H1 distance to the orbit of R; the E-gap is
    reported as well (on the shell it is exactly twice the I-gap with the
    energy-pairing action).  Sample i is drawn from the stream (seed, i),
    so the table does not depend on ``jobs``.
    """
    IR, ER = action_I(R, params), energy(R, params)
    amps = [amplitude_grid[i % len(amplitude_grid)] for i in range(sample_count)]
    idx = list(range(sample_count))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        chunks = [(R, params, seed, idx[j::jobs], amps[j::jobs], IR, ER) for j in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_gap_chunk, chunks))
        rows = [None] * sample_count
        for j, part in enumerate(parts):
            for i, r in zip(idx[j::jobs], part):
                rows[i] = r
    else:
        rows = _gap_chunk((R, params, seed, idx, amps, IR, ER))
    out, dropped = [], 0
    for r in rows:
        if r is None or (d_max is not None and r[1] > d_max**2):
            dropped += 1
            continue
        out.append(r)
    arr = np.array(out)
    amp, d2, gI, gE = arr.T
    slope = float(np.sum(gI * d2) / np.sum(d2 * d2))
    slope_affine = float(np.polyfit(d2, gI, 1)[0])
    ratio = float(np.min(gI / d2)) if np.all(d2 > 0) else float("nan")
    return GapScan(d2, gI, gE, amp, dropped, slope, slope_affine, ratio)


def orbit_gap(Phi, R: RealPair, params: Params) -> dict:
    """(d^2, I-gap, E-gap) for a single state on the mass shell."""
    fit = modulation_fit(Phi, R, params, norm="standard")
    return {"d2": fit.distance_sq_h1,
            "gap_I": action_I(Phi, params) - action_I(R, params),
            "gap_E": energy(Phi, params) - energy(R, params)}


__all__ = [
    "CoercivityReport", "project_constraints", "min_rayleigh_over_V", "min_rayleigh_over_V0",
    "min_rayleigh_Lminus_constrained", "min_rayleigh_unconstrained", "mass_shell_identity_check",
    "lower_bound_constants_fit", "energy_gap_scan", "inner_products",
]
