"""Linearized operators L+, L- and the complex linearization L at a profile R."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from scipy.linalg import circulant

from .functionals import check_nonnegative, zpow
from .grid import ComplexPair, Grid, Params, RealPair, derivative, second_derivative


class KernelGapError(RuntimeError):
    """An eigenvalue sits too close to the zero threshold to classify."""


def _check_powers(R: RealPair, params: Params):
    check_nonnegative(R)
    if params.p < 1 and (np.any(R.u1 <= 0) or np.any(R.u2 <= 0)):
        raise ValueError("p < 1 needs strictly positive components (negative powers)")


def hessian_F(R: RealPair, params: Params):
    """Entries (H11, H12, H22) of the Hessian of the nonlinear potential at R."""
    _check_powers(R, params)
    p, b = params.p, params.beta
    r1, r2 = np.clip(R.u1, 0, None), np.clip(R.u2, 0, None)
    H11 = (2 * p + 1) * zpow(r1, 2 * p) + p * b * zpow(r1, p - 1) * zpow(r2, p + 1)
    H22 = (2 * p + 1) * zpow(r2, 2 * p) + p * b * zpow(r2, p - 1) * zpow(r1, p + 1)
    H12 = (p + 1) * b * zpow(r1, p) * zpow(r2, p)
    return H11, H12, H22


def phase_potentials(R: RealPair, params: Params):
    """(q11, q22): the potentials of the diagonal L- blocks."""
    _check_powers(R, params)
    p, b = params.p, params.beta
    r1, r2 = np.clip(R.u1, 0, None), np.clip(R.u2, 0, None)
    q11 = zpow(r1, 2 * p) + b * zpow(r1, p - 1) * zpow(r2, p + 1)
    q22 = zpow(r2, 2 * p) + b * zpow(r2, p - 1) * zpow(r1, p + 1)
    return q11, q22


def apply_hessian(R, U: RealPair, params: Params) -> RealPair:
    H11, H12, H22 = hessian_F(R, params)
    return RealPair(U.grid, H11 * U.u1 + H12 * U.u2, H12 * U.u1 + H22 * U.u2)


def fd4_second_derivative_matrix(grid: Grid) -> np.ndarray:
    col = np.zeros(grid.N)
    col[[0, 1, 2, -1, -2]] = np.array([-30.0, 16.0, -1.0, 16.0, -1.0]) / (12 * grid.h**2)
    return circulant(col)


def kinetic_matrix(grid: Grid, discretization: str = "spectral") -> np.ndarray:
    """Dense matrix of -1/2 d_xx + 1."""
    if discretization == "spectral":
        D2 = grid.second_derivative_matrix
    elif discretization == "fd4":
        D2 = fd4_second_derivative_matrix(grid)
    else:
        raise ValueError(f"unknown discretization {discretization!r}")
    return -0.5 * D2 + np.eye(grid.N)


@dataclass(frozen=True, eq=False)
class BlockOperator:
    grid: Grid
    kind: str  # "Lplus" or "Lminus"
    matrix: np.ndarray
    params: Params | None = None
    discretization: str = "spectral"

    @property
    def size(self):
        return self.matrix.shape[0]

    def __matmul__(self, U: RealPair) -> RealPair:
        return RealPair.from_stacked(self.grid, self.matrix @ U.stacked())

    def quadratic_form(self, U: RealPair) -> float:
        v = U.stacked()
        return self.grid.h * float(v @ self.matrix @ v)

    def block(self, i, j):
        N = self.grid.N
        return self.matrix[i * N:(i + 1) * N, j * N:(j + 1) * N]


def assemble_Lplus(R: RealPair, params: Params, discretization="spectral") -> BlockOperator:
    H11, H12, H22 = hessian_F(R, params)
    K = kinetic_matrix(R.grid, discretization)
    M = np.block([[K - np.diag(H11), -np.diag(H12)], [-np.diag(H12), K - np.diag(H22)]])
    return BlockOperator(R.grid, "Lplus", M, params, discretization)


def assemble_Lminus(R: RealPair, params: Params, discretization="spectral") -> BlockOperator:
    q11, q22 = phase_potentials(R, params)
    K = kinetic_matrix(R.grid, discretization)
    Z = np.zeros_like(K)
    M = np.block([[K - np.diag(q11), Z], [Z, K - np.diag(q22)]])
    return BlockOperator(R.grid, "Lminus", M, params, discretization)


def apply_L(R: RealPair, W: ComplexPair, params: Params) -> ComplexPair:
    """Right-hand side of the linearized flow d_t W = L W.

    Component j is i[1/2 w_j'' - w_j + G_j(w1, w2)], evaluated pointwise from
    the G_j formulas (no assembled matrices).
    """
    p, b = params.p, params.beta
    q11, q22 = phase_potentials(R, params)
    r1, r2 = np.clip(R.u1, 0, None), np.clip(R.u2, 0, None)
    h1 = 2 * p * zpow(r1, 2 * p) + b * (p - 1) * zpow(r1, p - 1) * zpow(r2, p + 1)
    h2 = 2 * p * zpow(r2, 2 * p) + b * (p - 1) * zpow(r2, p - 1) * zpow(r1, p + 1)
    c = b * (p + 1) * zpow(r1, p) * zpow(r2, p)
    w1, w2 = W.phi1, W.phi2
    G1 = q11 * w1 + h1 * w1.real + c * w2.real
    G2 = q22 * w2 + h2 * w2.real + c * w1.real
    g = W.grid
    out1 = 1j * (0.5 * second_derivative(w1, g) - w1 + G1)
    out2 = 1j * (0.5 * second_derivative(w2, g) - w2 + G2)
    return ComplexPair(g, out1, out2)


def apply_L_blocks(Lplus: BlockOperator, Lminus: BlockOperator, W: ComplexPair) -> ComplexPair:
    """[0, L-; -L+, 0] acting on (Re W, Im W)."""
    re = Lminus @ W.imag
    im = -1.0 * (Lplus @ W.real)
    return ComplexPair.from_parts(re, im)


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_dim: int
    zero_tol: float
    scale: float
    ambiguous: bool
    kind: str
    grid: Grid
    params: Params | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": None if self.params is None else {"p": self.params.p, "beta": self.params.beta},
            "grid": {"L": self.grid.L, "N": self.grid.N},
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "kernel_dim": int(self.kernel_dim),
            "zero_tol": float(self.zero_tol),
            "spectral_scale": float(self.scale),
            "ambiguous": bool(self.ambiguous),
        }


def _classify(evals, zero_tol):
    kernel = int(np.sum(np.abs(evals) < zero_tol))
    a = np.abs(evals)
    ambiguous = bool(np.any((a >= zero_tol / 10) & (a <= zero_tol * 10)))
    return kernel, ambiguous


def symmetric_spectrum(op: BlockOperator, k: int = 6, zero_tol: float | None = None,
                       rel_tol: float = 1e-6) -> SpectrumReport:
    """k smallest eigenpairs of the assembled operator.

    Dense ``eigh`` up to 4096 unknowns; beyond that a shift-invert Lanczos
    solve around the bottom of the spectrum.  ``zero_tol`` defaults to
    ``rel_tol`` times the largest eigenvalue magnitude.
    """
    n = op.size
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    A = op.matrix
    if n <= 4096:
        evals, evecs = np.linalg.eigh(A)
        scale = float(np.max(np.abs(evals)))
        all_evals = evals
    else:
        scale = float(spla.eigsh(A, k=1, which="LM", return_eigenvectors=False)[0])
        shift = -float(np.max(np.abs(np.diag(A) - np.diag(A).max()))) - 1.0
        evals, evecs = spla.eigsh(A, k=k, sigma=shift, which="LM")
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
        all_evals = evals
    if zero_tol is None:
        zero_tol = rel_tol * abs(scale)
    kernel, ambiguous = _classify(all_evals, zero_tol)
    vecs = evecs[:, :k] / np.sqrt(op.grid.h)  # L2-normalised grid functions
    return SpectrumReport(all_evals[:k].copy(), vecs, kernel,
                          float(zero_tol), scale, ambiguous, op.kind, op.grid, op.params)


def kernel_dimension(op_or_report, zero_tol: float | None = None, strict: bool = True) -> int:
    rep = op_or_report if isinstance(op_or_report, SpectrumReport) else symmetric_spectrum(op_or_report)
    if zero_tol is not None:
        kernel, ambiguous = _classify(rep.eigenvalues, zero_tol)
    else:
        kernel, ambiguous = rep.kernel_dim, rep.ambiguous
        zero_tol = rep.zero_tol
    if ambiguous and strict:
        raise KernelGapError(f"an eigenvalue lies within a factor 10 of zero_tol={zero_tol:.3e}")
    return kernel


def cosine_similarity(a, b, grid=None) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(abs(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def kernel_alignment(rep: SpectrumReport, target: RealPair) -> float:
    """Cosine between ``target`` and its projection on the computed kernel."""
    K = rep.eigenvectors[:, np.abs(rep.eigenvalues[: rep.eigenvectors.shape[1]]) < rep.zero_tol]
    if K.shape[1] == 0:
        return 0.0
    t = target.stacked()
    Q, _ = np.linalg.qr(K)
    return float(np.linalg.norm(Q.T @ t) / np.linalg.norm(t))


ROTATION = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def decouple_at_Z(params: Params, grid: Grid | None = None) -> dict:
    """Eigenvalues of H_F(Z)/z^{2p} and the rotation that diagonalizes it.

    With ``grid`` the rotation is applied pointwise to the assembled
    Hessian at the closed-form Z and the worst deviations are reported.
    """
    p, b = params.p, params.beta
    out = {
        "lambda1": 2 * p + 1,
        "lambda2": (2 * p + 1 - b) / (1 + b),
        "rotation": ROTATION.copy(),
    }
    if grid is not None:
        from .ground_state import scalar_soliton, synthesized_ground_state

        Z = synthesized_ground_state(params, grid).profile
        w = scalar_soliton(p, grid) ** (2 * p)
        H11, H12, H22 = hessian_F(Z, params)
        H = np.stack([np.stack([H11, H12], -1), np.stack([H12, H22], -1)], -2)
        D = ROTATION.T @ H @ ROTATION
        out["max_offdiag"] = float(np.max(np.abs(D[:, 0, 1])))
        out["max_diag_error"] = float(max(
            np.max(np.abs(D[:, 0, 0] - out["lambda1"] * w)),
            np.max(np.abs(D[:, 1, 1] - out["lambda2"] * w)),
        ))
    return out


def weighted_eigenproblem(p: float, grid: Grid, k: int = 3, method: str = "inverse",
                          cutoff: float = 1e-6):
    """Smallest eigenvalues of (-1/2 d_xx + 1) w = mu z^{2p} w.

    ``method="inverse"`` diagonalizes A^{-1/2} M A^{-1/2} (eigenvalues 1/mu);
    A is diagonal in Fourier space so this is exact and well conditioned.
    ``method="weight"`` eliminates the nodes where the weight is below
    ``cutoff`` (relative) by a Schur complement and symmetrizes with
    M^{-1/2} on the remaining nodes; it degrades for small cutoffs.

    Returns (mu, eigenfunctions) with eigenfunctions as rows.
    """
    from .ground_state import scalar_soliton

    z = scalar_soliton(p, grid)
    m = z ** (2 * p)
    if method == "inverse":
        col = np.fft.ifft((0.5 * grid.k2 + 1.0) ** -0.5).real
        col = 0.5 * (col + np.roll(col[::-1], 1))
        Ah = circulant(col)
        C = Ah @ (m[:, None] * Ah)
        C = 0.5 * (C + C.T)
        nu, Y = np.linalg.eigh(C)
        nu, Y = nu[::-1][:k], Y[:, ::-1][:, :k]
        mu = 1.0 / nu
        W = (Ah @ Y).T
    elif method == "weight":
        A = kinetic_matrix(grid)
        S = m > cutoff * m.max()
        if S.all():
            Sc = A
        else:
            C_ = ~S
            X = np.linalg.solve(A[np.ix_(C_, C_)], A[np.ix_(C_, S)])
            Sc = A[np.ix_(S, S)] - A[np.ix_(S, C_)] @ X
        dinv = m[S] ** -0.5
        B = dinv[:, None] * Sc * dinv[None, :]
        B = 0.5 * (B + B.T)
        mu, Y = sla.eigh(B, subset_by_index=[0, k - 1])
        W = np.zeros((k, grid.N))
        ws = (dinv[:, None] * Y)
        W[:, S] = ws.T
        if not S.all():
            W[:, ~S] = -(X @ ws).T
    else:
        raise ValueError(f"unknown method {method!r}")
    W = W / np.sqrt(grid.h * np.sum(W**2, axis=1))[:, None]
    return mu, W


def translation_mode(R: RealPair) -> RealPair:
    return RealPair(R.grid, derivative(R.u1, R.grid), derivative(R.u2, R.grid))


def dilation_mode(R: RealPair) -> RealPair:
    x = R.grid.x
    d = translation_mode(R)
    return RealPair(R.grid, x * d.u1, x * d.u2)
