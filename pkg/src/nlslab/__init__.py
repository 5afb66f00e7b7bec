"""nlslab: ground states, linearized spectra, coercivity and stability experiments
for a weakly coupled pair of one-dimensional nonlinear Schrodinger equations."""

__version__ = "0.1.0"

from .grid import (ComplexPair, Grid, Params, RealPair, derivative, inner_products, make_grid,
                   quadrature, shift_and_phase)
from .functionals import action_I, energy
from .ground_state import (GroundState, coupling_amplitude, elliptic_residual, gradient_flow_minimize,
                           newton_solve, scalar_soliton, synthesized_ground_state)
from .linearized import (BlockOperator, SpectrumReport, apply_L, assemble_Lminus, assemble_Lplus,
                         decouple_at_Z, hessian_F, kernel_dimension, symmetric_spectrum,
                         weighted_eigenproblem)
from .modulation import ModulationFit, distance_to_orbit, modulation_fit, orthogonality_residuals

__all__ = [
    "ComplexPair", "Grid", "Params", "RealPair", "derivative", "inner_products", "make_grid",
    "quadrature", "shift_and_phase", "action_I", "energy", "GroundState", "coupling_amplitude",
    "elliptic_residual", "gradient_flow_minimize", "newton_solve", "scalar_soliton",
    "synthesized_ground_state", "BlockOperator", "SpectrumReport", "apply_L", "assemble_Lminus",
    "assemble_Lplus", "decouple_at_Z", "hessian_F", "kernel_dimension", "symmetric_spectrum",
    "weighted_eigenproblem", "ModulationFit", "distance_to_orbit", "modulation_fit",
    "orthogonality_residuals",
]
