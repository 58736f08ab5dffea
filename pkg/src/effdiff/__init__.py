"""Effective diffusivities of layered and randomly oriented anisotropic media."""

__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, DegenerateGradientError, EffDiffError,
                     MaskFormatError, SolverInternalError, TrialError)
from .grid import ScalarField, StructuredGrid, TensorField
from .linalg import SolverOptions
from .solver import (CellSolution, EstimationBC, FluxHistory, boundary_average, estimate,
                     estimate_effective_diffusivity, solve_cell_problem,
                     solve_stationary_bvp, solve_transient)
from .tensors import (LayeredMedium, Rotation2, Rotation3, SingleFieldCoefficients,
                      TwoPhaseCoefficients, harmonic_mean_profile, layered_effective_tensor,
                      rotate_tensor, rotation_matrix, sample_rotation_2d, sample_rotation_3d,
                      transform_partition, trial_seed)
