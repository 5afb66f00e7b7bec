"""Random smooth test fields built from a few low Fourier modes."""
from __future__ import annotations

import numpy as np

from .grid import ComplexPair, Grid, RealPair


def smooth_field(grid: Grid, rng: np.random.Generator, modes: int = 64, envelope: float = 0.0):
    """Real field with Gaussian coefficients on the lowest ``modes`` Fourier modes.

    ``envelope > 0`` damps mode k by (1 + k^2)^(-envelope/2); envelope=2
    gives the k^-2 decay used for dynamics perturbations.
    """
    nk = grid.N // 2 + 1
    if not 1 <= modes < nk:
        raise ValueError(f"modes must lie in [1, {nk - 1}), got {modes}")
    coef = np.zeros(nk, dtype=complex)
    coef[:modes] = rng.standard_normal(modes) + 1j * rng.standard_normal(modes)
    coef[0] = coef[0].real
    if envelope:
        k = np.pi / grid.L * np.arange(modes)
        coef[:modes] *= (1.0 + k**2) ** (-0.5 * envelope)
    return np.fft.irfft(coef, n=grid.N)


def smooth_real_pair(grid, rng, modes=64, envelope=0.0) -> RealPair:
    return RealPair(grid, smooth_field(grid, rng, modes, envelope), smooth_field(grid, rng, modes, envelope))


def smooth_complex_pair(grid, rng, modes=64, envelope=0.0) -> ComplexPair:
    re = smooth_real_pair(grid, rng, modes, envelope)
    im = smooth_real_pair(grid, rng, modes, envelope)
    return ComplexPair.from_parts(re, im)


def smooth_bump(grid, rng, n_bumps=3, width=(0.5, 2.0), center=3.0):
    """Sum of a few random Gaussians, used for multiplicative perturbations."""
    x = grid.x
    out = np.zeros(grid.N)
    for _ in range(n_bumps):
        c = rng.uniform(-center, center)
        w = rng.uniform(*width)
        out += rng.standard_normal() * np.exp(-((x - c) / w) ** 2)
    return out / max(np.abs(out).max(), 1e-300)
