"""Parallel-in-time solution of ``y' + A y = g`` by a block alpha-circulant preconditioned iteration."""

from .allatonce import (
    AllAtOnceSystem,
    apply_operator,
    assemble_multistep,
    assemble_onestep,
    integrate_onestep,
    onestep_system,
    sequential_solve,
)
from .errors import (
    ConfigError,
    DegenerateLeadingCoefficientError,
    DivergenceError,
    ParadiagError,
    PoleError,
    RoundoffError,
    SingularSystemError,
)
from .integrators import (
    adams_moulton4,
    amplification_matrix,
    assumption1_check,
    assumption2_check,
    bdf,
    characteristic_roots,
    implicit_euler,
    sdirk2,
    stability_eval,
)
from .problems import SpatialProblem, advection_diffusion, scalar_problem, wave_first_order
from .solver import (
    IterationHistory,
    Preconditioner,
    SolverConfig,
    error_in_eigencoords,
    iterate,
    precond_apply_inverse,
    precond_apply_inverse_multistep,
    precond_apply_inverse_onestep,
    shifted_solve,
    stage_reduced_frequency_solve,
)
from .spectral import AlphaCirculant, SpectralTransform, alpha_basis_apply, alpha_circulant_eigenvalues, dft

__version__ = "0.1.0"
