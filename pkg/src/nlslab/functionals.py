"""Pointwise nonlinearities and the energy / action functionals."""
from __future__ import annotations

import numpy as np

from .grid import Params, grad_inner, l2_inner, quadrature, norm_sq


def zpow(r, q):
    """Power of a nonnegative array with the convention 0**q = 0.

    Negative exponents are only evaluated where r > 0; the caller is
    responsible for not relying on them at vanishing points.
    """
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] ** q
    return out


def check_nonnegative(R, tol=1e-12):
    for i, u in enumerate(R.components, 1):
        if np.min(u) < -tol * max(1.0, np.max(np.abs(u))):
            raise ValueError(f"component {i} has negative values (min {np.min(u):.3e})")


def nonlinearity(R, params: Params):
    """Right-hand side of the elliptic system: (r1^{2p+1} + b r1^p r2^{p+1}, ...)."""
    p, b = params.p, params.beta
    r1 = np.clip(R.u1, 0.0, None)
    r2 = np.clip(R.u2, 0.0, None)
    n1 = zpow(r1, 2 * p + 1) + b * zpow(r1, p) * zpow(r2, p + 1)
    n2 = zpow(r2, 2 * p + 1) + b * zpow(r2, p) * zpow(r1, p + 1)
    return n1, n2


def potential_F(F, params: Params) -> float:
    """Integral of F(U) = (|u1|^{2p+2} + |u2|^{2p+2} + 2b|u1 u2|^{p+1}) / (p+1)."""
    p, b = params.p, params.beta
    m1, m2 = np.abs(F.components[0]), np.abs(F.components[1])
    dens = m1 ** (2 * p + 2) + m2 ** (2 * p + 2) + 2 * b * (m1 * m2) ** (p + 1)
    return quadrature(dens, F.grid) / (p + 1)


def energy(Phi, params: Params) -> float:
    """E = 1/2 |d_x Phi|_2^2 - int F(Phi)."""
    return 0.5 * grad_inner(Phi, Phi) - potential_F(Phi, params)


def nonlinear_norms(U, params: Params):
    """(|U|_{2p+2}^{2p+2} per component, |u1 u2|_{p+1}^{p+1})."""
    p = params.p
    m1, m2 = np.abs(U.components[0]), np.abs(U.components[1])
    g = U.grid
    return (
        quadrature(m1 ** (2 * p + 2), g),
        quadrature(m2 ** (2 * p + 2), g),
        quadrature((m1 * m2) ** (p + 1), g),
    )


def action_I(Phi, params: Params) -> float:
    """Action in the energy pairing.

    I(U) = 1/2 |U|_He^2 - |U|_{2p+2}^{2p+2}/(2p+2) - b |u1 u2|_{p+1}^{p+1}/(p+1)
    with |U|_He^2 = 1/2 |U'|^2 + |U|^2.  With this normalisation
    E(U) + |U|_2^2 = 2 I(U).
    """
    p, b = params.p, params.beta
    s1, s2, c = nonlinear_norms(Phi, params)
    return 0.5 * norm_sq(Phi, "h1_energy") - (s1 + s2) / (2 * p + 2) - b * c / (p + 1)


def mass(Phi):
    return l2_inner(Phi, Phi)
