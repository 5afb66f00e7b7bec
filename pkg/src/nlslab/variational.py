"""Scalar constants, Nehari sets, sampled infima and the algebraic region check.

Every H1 norm here is the energy pairing |u|_He^2 = 1/2|u'|^2 + |u|^2, in
which the scalar soliton satisfies |z|_He^2 = |z|_{2p+2}^{2p+2}.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .functionals import action_I, nonlinear_norms
from .grid import Grid, Params, RealPair, norm_sq
from .ground_state import coupling_amplitude, scalar_soliton, synthesized_ground_state

__all__ = ["action_I", "scalar_constants", "nehari_membership", "nehari_rescale_N0",
           "nehari_project_N", "infima_estimate", "algebraic_region_check", "NehariReport"]


def _he(u, grid):
    return norm_sq(RealPair(grid, u, np.zeros_like(u)), "h1_energy")


def _lp(u, q, grid):
    return grid.h * float(np.sum(np.abs(u) ** q))


def scalar_constants(p: float, grid: Grid) -> dict:
    """S1 = |z|_He^2 / |z|_{2p+2}^2 and T1 = (1/2)(p/(p+1)) S1^{(p+1)/p}."""
    z = scalar_soliton(p, grid)
    he = _he(z, grid)
    n = _lp(z, 2 * p + 2, grid) ** (1.0 / (2 * p + 2))
    S1 = he / n**2
    T1 = 0.5 * p / (p + 1) * S1 ** ((p + 1) / p)
    return {"S1": S1, "T1": T1,
            "norm_gap": abs(n - S1 ** (1.0 / (2 * p))),
            "he_gap": abs(he - S1 ** ((p + 1) / p))}


def _parts(U: RealPair, params: Params):
    g = U.grid
    s1, s2, c = nonlinear_norms(U, params)
    return _he(U.u1, g), _he(U.u2, g), s1, s2, c


def nehari_membership(U: RealPair, params: Params, tol: float = 1e-9) -> dict:
    h1, h2, s1, s2, c = _parts(U, params)
    b = params.beta
    scale = h1 + h2
    if scale == 0:
        raise ValueError("Nehari membership of the zero pair is undefined")
    d0 = h1 + h2 - s1 - s2 - 2 * b * c
    out = {"in_N0": abs(d0) < tol * scale, "defect_N0": d0}
    if h1 == 0 or h2 == 0:
        raise ValueError("N membership needs both components nonzero")
    d1, d2 = h1 - s1 - b * c, h2 - s2 - b * c
    out.update(in_N=abs(d1) < tol * scale and abs(d2) < tol * scale, defects_N=(d1, d2))
    return out


def nehari_scale_N0(U: RealPair, params: Params) -> float:
    h1, h2, s1, s2, c = _parts(U, params)
    nl = s1 + s2 + 2 * params.beta * c
    if not nl > 0:
        raise ValueError("nonlinear term vanishes; no Nehari rescaling exists")
    return ((h1 + h2) / nl) ** (1.0 / (2 * params.p))


def nehari_rescale_N0(U: RealPair, params: Params) -> RealPair:
    return U * nehari_scale_N0(U, params)


def nehari_project_N(U: RealPair, params: Params, max_iter: int = 50, tol: float = 1e-13):
    """Per-component scaling (s u1, t u2) landing on N, or None if Newton fails.

    Solves A_i = s_i^{2p} B_i + b s_i^{p-1} s_j^{p+1} C (A = |u_i|_He^2,
    B = |u_i|^{2p+2}, C = |u1 u2|^{p+1}) by Newton in log-variables from (1, 1).
    """
    h1, h2, s1, s2, c = _parts(U, params)
    p, b = params.p, params.beta
    if min(h1, h2) <= 0:
        return None
    y = np.zeros(2)

    def F(y):
        # trial steps may overflow; the line search rejects non-finite values
        with np.errstate(over="ignore", invalid="ignore"):
            return _F(y)

    def _F(y):
        e1, e2 = np.exp(y)
        f = np.array([s1 * e1 ** (2 * p) + b * c * e1 ** (p - 1) * e2 ** (p + 1) - h1,
                      s2 * e2 ** (2 * p) + b * c * e2 ** (p - 1) * e1 ** (p + 1) - h2])
        J = np.array([[2 * p * s1 * e1 ** (2 * p) + (p - 1) * b * c * e1 ** (p - 1) * e2 ** (p + 1),
                       (p + 1) * b * c * e1 ** (p - 1) * e2 ** (p + 1)],
                      [(p + 1) * b * c * e2 ** (p - 1) * e1 ** (p + 1),
                       2 * p * s2 * e2 ** (2 * p) + (p - 1) * b * c * e2 ** (p - 1) * e1 ** (p + 1)]])
        return f / np.array([h1, h2]), J / np.array([[h1], [h2]])

    f, J = F(y)
    for _ in range(max_iter):
        if np.max(np.abs(f)) < tol:
            e1, e2 = np.exp(y)
            return RealPair(U.grid, e1 * U.u1, e2 * U.u2)
        try:
            step = -np.linalg.solve(J, f)
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while lam > 1e-6:
            fn, Jn = F(y + lam * step)
            if np.all(np.isfinite(fn)) and np.linalg.norm(fn) < np.linalg.norm(f):
                break
            lam *= 0.5
        else:
            return None
        y, f, J = y + lam * step, fn, Jn
    return None


@dataclass
class NehariReport:
    params: Params
    S1: float
    T1: float
    a: float
    I_at_Z: float
    upper_bound: float
    A0_est: float
    A_est: float
    Ar_est: float
    chain_ok: bool
    samples: int = 0
    N_failures: int = 0
    max_reduced_form_gap: float = 0.0
    min_minus_I_Z: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        d = asdict(self)
        d["params"] = {"p": self.params.p, "beta": self.params.beta}
        return d


def _positive_sample(grid, rng, even):
    """Positive localized pair: sech-type envelopes with a smooth modulation."""
    x = grid.x
    comps = []
    for _ in range(2):
        amp = rng.uniform(0.3, 1.5)
        width = rng.uniform(0.5, 2.0)
        q = rng.uniform(0.7, 1.5)
        c = 0.0 if even else rng.uniform(-2.0, 2.0)
        xs = np.abs(x - c) if even else x - c
        bump = 1.0 + 0.2 * np.cos(rng.uniform(0.5, 2.0) * xs + (0.0 if even else rng.uniform(0, 6.3)))
        comps.append(amp * np.cosh((x - c) / width) ** -q * bump)
    return RealPair(grid, *comps)


def infima_estimate(params: Params, grid: Grid, n_samples: int = 200, seed: int = 0,
                    reduced_form_tol: float = 1e-10) -> NehariReport:
    """Sampled estimates of the infima of I over N0, N and the even part of N.

    The three sample sets are nested (even-on-N within N within N0) and all
    contain Z, so A0_est <= A_est <= Ar_est holds by construction; the
    report checks it together with the upper bound and, for every N0
    point, the reduced form I = (1/2)(p/(p+1)) |U|_He^2.
    """
    p = params.p
    rng = np.random.default_rng(seed)
    sc = scalar_constants(p, grid)
    a = coupling_amplitude(params)
    Z = synthesized_ground_state(params, grid).profile
    IZ = action_I(Z, params)
    upper = p / (p + 1) * a**2 * sc["S1"] ** ((p + 1) / p)
    red = 0.5 * p / (p + 1)
    I_even, I_N, I_N0 = [IZ], [IZ], [IZ]
    gaps = [abs(IZ - red * norm_sq(Z, "h1_energy")) / IZ]
    failures = 0
    for i in range(n_samples):
        even = i % 2 == 0
        U = _positive_sample(grid, rng, even)
        V0 = nehari_rescale_N0(U, params)
        IV = action_I(V0, params)
        gaps.append(abs(IV - red * norm_sq(V0, "h1_energy")) / max(abs(IV), 1e-300))
        I_N0.append(IV)
        VN = nehari_project_N(U, params)
        if VN is None:
            failures += 1
            continue
        IN = action_I(VN, params)
        gaps.append(abs(IN - red * norm_sq(VN, "h1_energy")) / max(abs(IN), 1e-300))
        I_N.append(IN)
        I_N0.append(IN)
        if even:
            I_even.append(IN)
    A0, A, Ar = min(I_N0), min(I_N), min(I_even)
    chain = bool(0 < A0 <= A <= Ar <= upper * (1 + 1e-6))
    gap = float(max(gaps))
    if gap > reduced_form_tol:
        raise AssertionError(f"reduced form violated on N0 (relative gap {gap:.2e})")
    return NehariReport(params, sc["S1"], sc["T1"], a, IZ, upper, A0, A, Ar, chain,
                        n_samples, failures, gap, min(A0, A, Ar) - IZ)


def algebraic_region_check(params: Params, grid_resolution: int = 2000, rel_slack: float = 1e-12):
    """Brute-force scan of the algebraic inequality system on [0, 2a^2]^2.

    Feasible means x + y <= 2a^2, x^p + b x^{(p-1)/2} y^{(p+1)/2} >= (1+b)a^{2p}
    and the symmetric inequality, each up to a relative slack.  The grid
    x_i = 2a^2 i / resolution contains (a^2, a^2) when the resolution is even.
    """
    if grid_resolution < 2 or grid_resolution % 2:
        raise ValueError("grid_resolution must be an even integer >= 2")
    p, b = params.p, params.beta
    a2 = coupling_amplitude(params) ** 2
    t = 2 * a2 * np.arange(grid_resolution + 1) / grid_resolution
    X, Y = np.meshgrid(t, t, indexing="ij")
    rhs = (1 + b) * a2**p
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = X + Y <= 2 * a2 * (1 + rel_slack)
        e = (p - 1) / 2
        px = np.where(X > 0, X ** e, 0.0 if e > 0 else (1.0 if e == 0 else np.inf))
        py = np.where(Y > 0, Y ** e, 0.0 if e > 0 else (1.0 if e == 0 else np.inf))
        lhs2 = X**p + b * px * Y ** ((p + 1) / 2)
        lhs3 = Y**p + b * X ** ((p + 1) / 2) * py
        lhs2 = np.nan_to_num(lhs2, nan=0.0)
        lhs3 = np.nan_to_num(lhs3, nan=0.0)
    feas = g1 & (lhs2 >= rhs * (1 - rel_slack)) & (lhs3 >= rhs * (1 - rel_slack))
    pts = np.column_stack([X[feas], Y[feas]])
    dist = np.hypot(pts[:, 0] - a2, pts[:, 1] - a2) if len(pts) else np.zeros(0)
    centre_ok = bool(feas[grid_resolution // 2, grid_resolution // 2])
    pinch = bool(len(pts) > 0 and np.all(dist <= 2.0 / grid_resolution))
    return {"feasible_points": pts, "pinch_ok": pinch, "center_feasible": centre_ok,
            "max_distance": float(dist.max()) if len(pts) else float("nan"), "a2": a2}
