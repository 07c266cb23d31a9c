"""Driven damped oscillator in a squeezed thermal bath.

Two independent solution routes for the same open-system dynamics: a
closed-form phase-space propagator (Gaussian kernel convolution) and a
truncated-Fock-basis master-equation integrator, plus the full Gaussian
class of quasi-distributions as a reusable phase-space algebra.
"""

from .errors import (
    BlowUp,
    DivergentIntegral,
    DivergentKernel,
    DriveDomainError,
    ExtentTooSmall,
    GridTooCoarse,
    KernelNotNormalizable,
    MismatchedGrids,
    NegativeTime,
    NonConvergence,
    NumericalError,
    SqbathError,
    TailDivergence,
    TruncationWarning,
    UnphysicalBathWarning,
    ValidationError,
    VerificationError,
    ZeroQuadraticNorm,
)
from .kernels import (
    GaussianIntegralParams,
    GaussianPhaseFunction,
    GridSpec,
    OrderingVector,
    PhaseSpaceGrid,
    auto_grid,
    coherent_wigner,
    convolve_grids,
    convolve_orderings,
    eval_kernel,
    gaussian_integral,
    grid_from_csv,
    grid_integral,
    grid_to_csv,
    quadratic_norm,
    sample_function,
    thermal_wigner,
)
from .propagator import (
    BathParams,
    ConstantDrive,
    CosineDrive,
    DriveSpec,
    NoDrive,
    PropagatorCoefficients,
    TabulatedDrive,
    coeff_A,
    coeff_T,
    coeff_lambda1,
    coeff_lambda2,
    coefficients,
    evolution_kernel,
    kernel_consistency,
    mean_trajectory,
    ordering_vector,
    propagate_gaussian,
    propagate_grid,
)
from .fock import (
    FockDensityMatrix,
    IntegratorConfig,
    SeriesTruncation,
    TrajectoryPoint,
    integrate,
    ladder_operators,
    lindblad_rhs,
    moments,
    rotate_frame,
    series_propagate,
    trace_distance,
    wigner_grid,
    wigner_point,
)
from .quasidist import (
    OrderedProductSpec,
    completeness_check,
    ordered_product,
    quasi_distribution,
    reconstruct_rho,
    transition_T0,
    transition_Tr,
)

__version__ = "0.1.0"
