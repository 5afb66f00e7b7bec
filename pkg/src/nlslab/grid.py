"""Periodic grid, spectral calculus and the norms used throughout the package.

The real line is truncated to the periodic box [-L, L) sampled at N uniformly
spaced nodes.  Derivatives are Fourier multipliers, integrals use the
rectangle rule (which is the trapezoid rule on a periodic grid).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import circulant

DEFAULT_L = 20.0
DEFAULT_N = 1024


@dataclass(frozen=True)
class Params:
    """Exponent ``p`` and coupling ``beta`` of the system."""

    p: float
    beta: float

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"exponent p must be positive, got {self.p}")
        if not self.beta > 0:
            raise ValueError(f"coupling beta must be positive, got {self.beta}")

    @property
    def convexity_regime(self) -> bool:
        return 1.0 <= self.p < 2.0

    @property
    def nondegenerate_regime(self) -> bool:
        return self.beta > 1.0 and self.p != self.beta


@dataclass(frozen=True)
class Grid:
    L: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"half width L must be positive, got {self.L}")
        n = int(self.N)
        if n != self.N or n < 16 or n & (n - 1):
            raise ValueError(f"N must be a power of two >= 16, got {self.N}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @cached_property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @cached_property
    def k(self) -> np.ndarray:
        """Wavenumbers pi*m/L in FFT order (Nyquist kept, negative sign)."""
        return np.pi / self.L * np.fft.fftfreq(self.N, 1.0 / self.N)

    @cached_property
    def k_odd(self) -> np.ndarray:
        # odd-order derivatives drop the Nyquist mode so real input stays real
        k = self.k.copy()
        k[self.N // 2] = 0.0
        return k

    @cached_property
    def k2(self) -> np.ndarray:
        return self.k**2

    @cached_property
    def second_derivative_matrix(self) -> np.ndarray:
        """Dense symmetric Fourier differentiation matrix for d^2/dx^2."""
        col = np.fft.ifft(-self.k2).real
        col = 0.5 * (col + np.roll(col[::-1], 1))
        return circulant(col)

    def __repr__(self):
        return f"Grid(L={self.L}, N={self.N})"


def make_grid(L: float = DEFAULT_L, N: int = DEFAULT_N) -> Grid:
    return Grid(float(L), N)


@dataclass(frozen=True, eq=False)
class RealPair:
    grid: Grid
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        for name in ("u1", "u2"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.N,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({self.grid.N},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def components(self):
        return self.u1, self.u2

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    @classmethod
    def from_stacked(cls, grid: Grid, vec) -> "RealPair":
        vec = np.asarray(vec, dtype=float)
        return cls(grid, vec[: grid.N], vec[grid.N:])

    def to_complex(self) -> "ComplexPair":
        return ComplexPair(self.grid, self.u1.astype(complex), self.u2.astype(complex))

    def map(self, f) -> "RealPair":
        return RealPair(self.grid, f(self.u1), f(self.u2))

    def __add__(self, other):
        if isinstance(other, ComplexPair):
            return self.to_complex() + other
        _check_same_grid(self, other)
        return RealPair(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other):
        if isinstance(other, ComplexPair):
            return self.to_complex() - other
        _check_same_grid(self, other)
        return RealPair(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c):
        if isinstance(c, complex):
            return self.to_complex() * c
        return RealPair(self.grid, c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


@dataclass(frozen=True, eq=False)
class ComplexPair:
    grid: Grid
    phi1: np.ndarray
    phi2: np.ndarray

    def __post_init__(self):
        for name in ("phi1", "phi2"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            if arr.shape != (self.grid.N,):
                raise ValueError(f"{name} has shape {arr.shape}, expected ({self.grid.N},)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def components(self):
        return self.phi1, self.phi2

    @property
    def real(self) -> RealPair:
        return RealPair(self.grid, self.phi1.real, self.phi2.real)

    @property
    def imag(self) -> RealPair:
        return RealPair(self.grid, self.phi1.imag, self.phi2.imag)

    @classmethod
    def from_parts(cls, re: RealPair, im: RealPair) -> "ComplexPair":
        _check_same_grid(re, im)
        return cls(re.grid, re.u1 + 1j * im.u1, re.u2 + 1j * im.u2)

    def map(self, f) -> "ComplexPair":
        return ComplexPair(self.grid, f(self.phi1), f(self.phi2))

    def __add__(self, other):
        _check_same_grid(self, other)
        a1, a2 = other.components
        return ComplexPair(self.grid, self.phi1 + a1, self.phi2 + a2)

    def __sub__(self, other):
        _check_same_grid(self, other)
        a1, a2 = other.components
        return ComplexPair(self.grid, self.phi1 - a1, self.phi2 - a2)

    def __mul__(self, c):
        return ComplexPair(self.grid, c * self.phi1, c * self.phi2)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError(f"grid mismatch: {a.grid} vs {b.grid}")


def as_complex(F) -> ComplexPair:
    return F.to_complex() if isinstance(F, RealPair) else F


def quadrature(f, grid: Grid) -> float:
    f = np.asarray(f)
    if f.shape[-1] != grid.N:
        raise ValueError(f"array of length {f.shape[-1]} does not live on {grid}")
    return grid.h * np.sum(f, axis=-1)


def derivative(f, grid: Grid) -> np.ndarray:
    f = np.asarray(f)
    out = np.fft.ifft(1j * grid.k_odd * np.fft.fft(f))
    return out.real if np.isrealobj(f) else out


def second_derivative(f, grid: Grid) -> np.ndarray:
    f = np.asarray(f)
    out = np.fft.ifft(-grid.k2 * np.fft.fft(f))
    return out.real if np.isrealobj(f) else out


def _l2_component(u, v, grid):
    return grid.h * np.sum((u * np.conj(v)).real)


def _grad_component(u, v, grid):
    # Parseval form of the integral of u' * conj(v'); matches -D2 exactly
    uh, vh = np.fft.fft(u), np.fft.fft(v)
    return grid.h / grid.N * np.sum((grid.k2 * uh * np.conj(vh)).real)


def l2_inner(U, V) -> float:
    _check_same_grid(U, V)
    return sum(_l2_component(u, v, U.grid) for u, v in zip(U.components, V.components))


def grad_inner(U, V) -> float:
    _check_same_grid(U, V)
    return sum(_grad_component(u, v, U.grid) for u, v in zip(U.components, V.components))


def inner_products(U, V) -> dict:
    """L2 and both H1 pairings of two pairs (real part of u*conj(v) for complex)."""
    l2 = l2_inner(U, V)
    g = grad_inner(U, V)
    return {"l2": l2, "h1_standard": g + l2, "h1_energy": 0.5 * g + l2}


PAIRINGS = ("l2", "h1_standard", "h1_energy")


def pairing(U, V, kind: str) -> float:
    if kind not in PAIRINGS:
        raise ValueError(f"unknown pairing {kind!r}")
    return inner_products(U, V)[kind]


def norm_sq(U, kind: str = "l2") -> float:
    return pairing(U, U, kind)


def gram_operator(f, grid: Grid, kind: str) -> np.ndarray:
    """Return G f with (u, f)_kind = (u, G f)_{L2}."""
    if kind == "l2":
        return np.asarray(f)
    weight = {"h1_standard": 1.0, "h1_energy": 0.5}[kind]
    return np.asarray(f) - weight * second_derivative(f, grid)


def _shift(f, x0, grid):
    out = np.fft.ifft(np.exp(1j * grid.k * x0) * np.fft.fft(f))
    return out


def shift_and_phase(Phi, x0: float, theta1: float, theta2: float) -> ComplexPair:
    """Return (phi1(. + x0) e^{i theta1}, phi2(. + x0) e^{i theta2})."""
    Phi = as_complex(Phi)
    g = Phi.grid
    return ComplexPair(
        g,
        np.exp(1j * theta1) * _shift(Phi.phi1, x0, g),
        np.exp(1j * theta2) * _shift(Phi.phi2, x0, g),
    )


def shift_real(R: RealPair, x0: float) -> RealPair:
    """Translate a real pair, r(. + x0); the Nyquist mode is shifted as a cosine."""
    g = R.grid
    mult = np.exp(1j * g.k * x0)
    mult[g.N // 2] = np.cos(g.k[g.N // 2] * x0)
    return R.map(lambda u: np.fft.ifft(mult * np.fft.fft(u)).real)


def total_density(F) -> np.ndarray:
    a, b = F.components
    return np.abs(a) ** 2 + np.abs(b) ** 2


def recenter(R: RealPair) -> RealPair:
    """Translate so the peak of the total density sits at x = 0.

    The peak location is refined to sub-grid accuracy with the spectral
    derivative of the density (a few Newton steps on rho'(x) = 0).
    """
    g = R.grid
    rho = total_density(R)
    j = int(np.argmax(rho))
    xp = g.x[j]
    rho_hat = np.fft.fft(rho)
    for _ in range(20):
        ph = np.exp(1j * g.k * (xp + g.L))  # node 0 sits at x = -L
        d1 = np.sum(1j * g.k_odd * rho_hat * ph).real / g.N
        d2 = np.sum(-g.k2 * rho_hat * ph).real / g.N
        if d2 >= 0:
            break
        step = d1 / d2
        xp -= step
        if abs(step) < 1e-14:
            break
    return shift_real(R, xp)
