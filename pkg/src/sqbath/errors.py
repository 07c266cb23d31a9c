"""Exceptions and warning categories shared across the package.

Two error families matter to callers: ``ValidationError`` for bad inputs or
configuration (CLI exit code 1) and ``NumericalError`` for failures of the
computation itself, such as divergent integrals or non-normalizable kernels
(CLI exit code 2).
"""


class SqbathError(Exception):
    """Base class for all package errors."""


class ValidationError(SqbathError):
    """Invalid input, configuration, or grid geometry."""


class NumericalError(SqbathError):
    """A computation failed: divergence, overflow, or loss of validity."""


class ZeroQuadraticNorm(NumericalError):
    """Kernel parameter vector has (numerically) zero quadratic norm."""


class DivergentIntegral(NumericalError):
    """Gaussian integral parameters fail the convergence (definiteness) check."""


class DivergentKernel(NumericalError):
    """Transition-operator convolution requested for a non-decaying kernel."""


class KernelNotNormalizable(NumericalError):
    """Evolution kernel discriminant is not positive for the given parameters."""


class TailDivergence(NumericalError):
    """Operator-valued quadrature whose integrand tail fails to decay."""


class NonConvergence(NumericalError):
    """Series solution did not converge within the configured truncation."""


class BlowUp(NumericalError):
    """Integrator state exceeded the magnitude guard."""


class VerificationError(NumericalError):
    """A built-in cross-check of a computed result failed its tolerance."""


class NegativeTime(ValidationError):
    """Propagation time must be nonnegative."""


class DriveDomainError(ValidationError):
    """Tabulated drive does not cover the requested time interval."""


class MismatchedGrids(ValidationError):
    """Grid operation on grids with incompatible spacings."""


class ExtentTooSmall(ValidationError):
    """Requested output grid needs data outside the sampled region."""


class GridTooCoarse(UserWarning):
    """Grid spacing or extent is marginal for the function being sampled."""


class TruncationWarning(UserWarning):
    """Fock-space cutoff is being stressed (tail mass or large displacement)."""


class UnphysicalBathWarning(UserWarning):
    """Squeezing correlation exceeds the physical bound |M|^2 <= nbar(nbar+1)."""
