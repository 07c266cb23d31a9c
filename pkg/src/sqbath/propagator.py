"""Closed-form time evolution of Wigner functions in a squeezed thermal bath.

All outputs live in the rotating frame (free oscillation at ``Omega``
removed); a lab-frame view multiplies phase-space coordinates by
``exp(-i*Omega*t)`` and is applied by the CLI harness for display only.

The evolution law: with ``C = g(.,t) * W0`` (convolution with the normalized
evolution kernel) the Wigner function at time t is

    W(alpha, t) = exp(2*kappa*t) * C(exp(kappa*t)*alpha - lambda1(t)),

where ``lambda1`` accumulates the classical drive and the kernel's parameter
vector grows out of the bath constants.  Gaussian-class initial states stay
Gaussian (`propagate_gaussian`); arbitrary sampled states go through
`propagate_grid`.
"""

from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import (
    DriveDomainError,
    ExtentTooSmall,
    KernelNotNormalizable,
    NegativeTime,
    UnphysicalBathWarning,
    ZeroQuadraticNorm,
)
from .kernels import (
    GaussianPhaseFunction,
    GridSpec,
    OrderingVector,
    PhaseSpaceGrid,
    convolve_grids,
    eval_kernel,
    sample_function,
)

__all__ = [
    "BathParams",
    "NoDrive",
    "ConstantDrive",
    "CosineDrive",
    "TabulatedDrive",
    "DriveSpec",
    "PropagatorCoefficients",
    "drive_value",
    "coeff_T",
    "coeff_lambda1",
    "coeff_lambda2",
    "coeff_A",
    "coefficients",
    "ordering_vector",
    "evolution_kernel",
    "kernel_consistency",
    "propagate_gaussian",
    "propagate_grid",
    "mean_trajectory",
    "coefficients_report",
]


@dataclass(frozen=True)
class BathParams:
    """Squeezed thermal reservoir constants and the oscillator frequency.

    kappa: damping constant (inverse time), > 0.
    nbar:  mean thermal photon number, >= 0.
    M:     squeezing correlation of the reservoir; physical when
           |M|^2 <= nbar*(nbar+1) (warned otherwise, not fatal).
    Omega: oscillator angular frequency.
    """

    kappa: float
    nbar: float = 0.0
    M: complex = 0j
    Omega: float = 0.0

    def __post_init__(self):
        if not (self.kappa > 0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not (self.nbar >= 0 and math.isfinite(self.nbar)):
            raise ValueError(f"nbar must be nonnegative, got {self.nbar}")
        object.__setattr__(self, "M", complex(self.M))
        if not math.isfinite(self.Omega):
            raise ValueError("Omega must be finite")
        if abs(self.M) ** 2 > self.nbar * (self.nbar + 1.0) + 1e-15:
            warnings.warn(
                f"|M|^2 = {abs(self.M)**2:.6g} exceeds nbar(nbar+1) = "
                f"{self.nbar*(self.nbar+1):.6g}; the map can produce "
                "non-positive states",
                UnphysicalBathWarning,
                stacklevel=2,
            )


@dataclass(frozen=True)
class NoDrive:
    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class ConstantDrive:
    f0: float

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.f0)


@dataclass(frozen=True)
class CosineDrive:
    f0: float
    omega: float
    phase: float = 0.0

    def __call__(self, t):
        return self.f0 * np.cos(self.omega * np.asarray(t, dtype=float) + self.phase)


@dataclass(frozen=True)
class TabulatedDrive:
    """Real force samples (t, f), linearly interpolated; times strictly increasing."""

    samples: tuple[tuple[float, float], ...]

    def __post_init__(self):
        samples = tuple((float(t), float(f)) for t, f in self.samples)
        if len(samples) < 2:
            raise ValueError("tabulated drive needs at least two samples")
        ts = [t for t, _ in samples]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("tabulated times must be strictly increasing")
        object.__setattr__(self, "samples", samples)

    @property
    def t_min(self) -> float:
        return self.samples[0][0]

    @property
    def t_max(self) -> float:
        return self.samples[-1][0]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min - 1e-12) or np.any(t > self.t_max + 1e-12):
            raise DriveDomainError(
                f"drive tabulated on [{self.t_min}, {self.t_max}] queried outside"
            )
        ts = np.array([p[0] for p in self.samples])
        fs = np.array([p[1] for p in self.samples])
        return np.interp(t, ts, fs)


DriveSpec = NoDrive | ConstantDrive | CosineDrive | TabulatedDrive


def drive_value(drive: DriveSpec, t):
    """Force f(t); scalar in, scalar out."""
    out = drive(t)
    return float(out) if np.ndim(t) == 0 else out


def _check_time(t: float) -> float:
    t = float(t)
    if t < 0 or not math.isfinite(t):
        raise NegativeTime(f"time must be nonnegative and finite, got {t}")
    return t


def _expi(c: complex, t: float) -> complex:
    """(exp(c*t) - 1)/c, stable as c*t -> 0."""
    ct = c * t
    if abs(ct) < 1e-8:
        return t * (1.0 + ct / 2.0 + ct * ct / 6.0)
    return (cmath.exp(ct) - 1.0) / c


def coeff_T(bath: BathParams, t: float) -> float:
    """Accumulated damping fraction 1 - exp(-2*kappa*t), in [0, 1)."""
    t = _check_time(t)
    return -math.expm1(-2.0 * bath.kappa * t)


def coeff_A(bath: BathParams, t: float) -> float:
    """Diagonal contraction factor: A = exp(-kappa*t) / (nbar*T + 1)."""
    t = _check_time(t)
    return math.exp(-bath.kappa * t) / (bath.nbar * coeff_T(bath, t) + 1.0)


def _adaptive_simpson(fun, a: float, b: float, rel_tol: float, depth: int = 24) -> complex:
    """Adaptive Simpson quadrature for a complex-valued integrand."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, d):
        xm = 0.5 * (x0 + x2)
        xl, xr = 0.5 * (x0 + xm), 0.5 * (xm + x2)
        fl, fr = fun(xl), fun(xr)
        left = simpson(x0, xm, f0, fl, f1)
        right = simpson(xm, x2, f1, fr, f2)
        err = left + right - whole
        if d <= 0 or abs(err) <= 15.0 * rel_tol * max(abs(left + right), 1e-300):
            return left + right + err / 15.0
        return recurse(x0, xm, f0, fl, f1, left, d - 1) + recurse(
            xm, x2, f1, fr, f2, right, d - 1
        )

    if b <= a:
        return 0j
    fa, fm, fb = fun(a), fun(0.5 * (a + b)), fun(b)
    return recurse(a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), depth)


def coeff_lambda1(drive: DriveSpec, bath: BathParams, t: float) -> complex:
    """Drive accumulation ``-i * integral_0^t f(u) exp((kappa + i*Omega)*u) du``.

    Closed form for absent / constant / cosine drives; adaptive Simpson
    (relative tolerance 1e-10, integrand linear between samples) for
    tabulated drives, which must cover [0, t].
    """
    t = _check_time(t)
    c = bath.kappa + 1j * bath.Omega
    if isinstance(drive, NoDrive):
        return 0j
    if isinstance(drive, ConstantDrive):
        return -1j * drive.f0 * _expi(c, t)
    if isinstance(drive, CosineDrive):
        # cos(w u + p) = (e^{i(wu+p)} + e^{-i(wu+p)}) / 2
        w, p = drive.omega, drive.phase
        plus = cmath.exp(1j * p) * _expi(c + 1j * w, t)
        minus = cmath.exp(-1j * p) * _expi(c - 1j * w, t)
        return -0.5j * drive.f0 * (plus + minus)
    if isinstance(drive, TabulatedDrive):
        if drive.t_min > 1e-12 or drive.t_max < t - 1e-12:
            raise DriveDomainError(
                f"tabulation [{drive.t_min}, {drive.t_max}] does not cover [0, {t}]"
            )
        if t == 0.0:
            return 0j

        def integrand(u):
            return drive(u) * cmath.exp(c * u)

        total = 0j
        knots = [p[0] for p in drive.samples if 0.0 < p[0] < t]
        edges = [0.0, *knots, t]
        for a, b in zip(edges, edges[1:]):
            total += _adaptive_simpson(integrand, a, b, rel_tol=1e-10)
        return -1j * total
    raise TypeError(f"unknown drive spec {drive!r}")


def coeff_lambda2(bath: BathParams, t: float) -> complex:
    """Squeezing accumulation ``-kappa*M * integral_0^t exp(2(kappa + i*Omega)u) du``."""
    t = _check_time(t)
    return -bath.kappa * bath.M * _expi(2.0 * (bath.kappa + 1j * bath.Omega), t)


def ordering_vector(bath: BathParams, t: float) -> OrderingVector:
    """Parameter vector of the evolution kernel at time t.

    ``r1 = 4i Im(lambda2)``, ``r2 = 4i Re(lambda2)``,
    ``r3 = (2 nbar + 1)(exp(2 kappa t) - 1)``; its quadratic norm equals the
    kernel discriminant ``r3^2 - 16 |lambda2|^2``.
    """
    t = _check_time(t)
    lam2 = coeff_lambda2(bath, t)
    return OrderingVector(
        4j * lam2.imag,
        4j * lam2.real,
        (2.0 * bath.nbar + 1.0) * math.expm1(2.0 * bath.kappa * t),
    )


@dataclass(frozen=True)
class PropagatorCoefficients:
    """All closed-form coefficients at a single time."""

    t: float
    lambda1: complex
    lambda2: complex
    T: float
    A: float
    ordering: OrderingVector


def coefficients(bath: BathParams, drive: DriveSpec, t: float) -> PropagatorCoefficients:
    t = _check_time(t)
    return PropagatorCoefficients(
        t=t,
        lambda1=coeff_lambda1(drive, bath, t),
        lambda2=coeff_lambda2(bath, t),
        T=coeff_T(bath, t),
        A=coeff_A(bath, t),
        ordering=ordering_vector(bath, t),
    )


def _kernel_discriminant(bath: BathParams, t: float) -> float:
    lam2 = coeff_lambda2(bath, t)
    r3 = (2.0 * bath.nbar + 1.0) * math.expm1(2.0 * bath.kappa * t)
    return r3 * r3 - 16.0 * abs(lam2) ** 2


def evolution_kernel(bath: BathParams, t: float) -> GaussianPhaseFunction:
    """Normalized Gaussian kernel whose convolution advances the Wigner function.

    Raises KernelNotNormalizable when the discriminant
    ``(2 nbar + 1)^2 e^{4 kappa t} T^2 - 16 |lambda2|^2`` is not positive.
    """
    t = _check_time(t)
    disc = _kernel_discriminant(bath, t)
    if disc <= 0.0:
        raise KernelNotNormalizable(
            f"kernel discriminant {disc:.6g} <= 0 for |M|={abs(bath.M):.6g}, "
            f"nbar={bath.nbar:.6g}, t={t:.6g}"
        )
    return GaussianPhaseFunction(ordering_vector(bath, t))


def _kernel_values_direct(bath: BathParams, t: float, alphas: np.ndarray) -> np.ndarray:
    """Kernel evaluated straight from the raw coefficients (no vector form).

    Independent arrangement of the same closed form, used to pin down the
    vector reparameterization in `kernel_consistency`.
    """
    lam2 = coeff_lambda2(bath, t)
    T = coeff_T(bath, t)
    e2 = math.exp(2.0 * bath.kappa * t)
    disc = (2.0 * bath.nbar + 1.0) ** 2 * e2 * e2 * T * T - abs(4.0 * lam2) ** 2
    b = np.asarray(alphas, dtype=complex)
    bc = np.conj(b)
    num = (
        2.0 * (2.0 * bath.nbar + 1.0) * e2 * T * b * bc
        - 4.0 * np.conj(lam2) * b * b
        - 4.0 * lam2 * bc * bc
    )
    return (2.0 / math.sqrt(disc)) * np.exp(-num / disc)


def kernel_consistency(bath: BathParams, t: float, grid_spec: GridSpec) -> float:
    """Max pointwise gap between the direct kernel and its vector form.

    Near t = 0 the kernel is a near-delta with a tiny quadratic norm, so the
    vector form is evaluated without the zero-norm guard (the comparison is
    still well defined; only its conditioning loosens).
    """
    al = grid_spec.alphas()
    direct = _kernel_values_direct(bath, t, al)
    via_vector = eval_kernel(ordering_vector(bath, t), al, eps=0.0)
    return float(np.abs(direct - via_vector).max())


def propagate_gaussian(
    initial: GaussianPhaseFunction,
    bath: BathParams,
    drive: DriveSpec,
    t: float,
) -> GaussianPhaseFunction:
    """Evolve a Gaussian-class Wigner function analytically.

    The input is first brought to canonical scale 1 (exact), then the law
    reads: ordering += kernel vector, mean += lambda1, scale *= e^{kappa t},
    weight *= e^{2 kappa t}.  The mass is conserved.  Covers coherent,
    thermal, and squeezed-Gaussian initial states.
    """
    t = _check_time(t)
    if t > 0.0 and _kernel_discriminant(bath, t) <= 0.0:
        raise KernelNotNormalizable(
            f"kernel not normalizable at t={t:.6g} "
            f"(|M|={abs(bath.M):.6g}, nbar={bath.nbar:.6g})"
        )
    g0 = initial.canonical()
    ekt = math.exp(bath.kappa * t)
    return GaussianPhaseFunction(
        ordering=g0.ordering + ordering_vector(bath, t),
        mean=g0.mean + coeff_lambda1(drive, bath, t),
        weight=g0.weight * ekt * ekt,
        scale=g0.scale * ekt,
    )


#: Kernels narrower than this fraction of a grid cell act as exact deltas in
#: `propagate_grid` (sampling them would alias; the identity is exact there).
DELTA_WIDTH_FRACTION = 0.25


def propagate_grid(
    w0: PhaseSpaceGrid,
    bath: BathParams,
    drive: DriveSpec,
    t: float,
    out_grid_spec: GridSpec | None = None,
    *,
    method: str = "interp",
) -> PhaseSpaceGrid:
    """Evolve an arbitrary sampled Wigner function.

    Convolves ``w0`` with the sampled evolution kernel, then evaluates
    ``W(alpha, t) = e^{2 kappa t} C(e^{kappa t} alpha - lambda1)`` on the
    output grid.  ``method="interp"`` (default) interpolates C bicubically;
    ``method="direct"`` evaluates the convolution integral at the mapped
    points exactly (slow; verification path).

    Raises ExtentTooSmall when mapped output points leave C's sampled region.
    """
    t = _check_time(t)
    if out_grid_spec is None:
        out_grid_spec = w0.spec
    if t > 0.0 and _kernel_discriminant(bath, t) <= 0.0:
        raise KernelNotNormalizable(
            f"kernel not normalizable at t={t:.6g} "
            f"(|M|={abs(bath.M):.6g}, nbar={bath.nbar:.6g})"
        )
    lam1 = coeff_lambda1(drive, bath, t)
    ekt = math.exp(bath.kappa * t)
    scale = ekt * ekt

    kernel = GaussianPhaseFunction(ordering_vector(bath, t)) if t > 0.0 else None
    if kernel is None:
        near_delta = True
    else:
        try:
            near_delta = kernel.widths()[1] < DELTA_WIDTH_FRACTION * min(w0.dx, w0.dy)
        except ZeroQuadraticNorm:
            # quadratic norm below float resolution: the kernel is an exact
            # delta at this grid scale
            near_delta = True

    out_al = out_grid_spec.alphas()
    mapped = ekt * out_al - lam1

    if method == "direct":
        if near_delta:
            _check_mapped_extent(mapped, w0.spec)
            return PhaseSpaceGrid(out_grid_spec, scale * _bicubic(w0, mapped))
        src = w0.alphas().ravel()
        vals = w0.values.ravel() * (w0.dx * w0.dy / math.pi)
        flat = mapped.ravel()
        direct = np.empty(flat.shape, dtype=complex)
        for i, zi in enumerate(flat):
            direct[i] = np.sum(vals * eval_kernel(kernel.ordering, zi - src))
        return PhaseSpaceGrid(out_grid_spec, scale * direct.reshape(mapped.shape))

    if near_delta:
        conv = w0
    else:
        wmin, wmax = kernel.widths()
        half = max(4.0 * wmax, 2.0 * w0.dx)
        n_half = int(math.ceil(half / w0.dx))
        kspec = GridSpec(
            nx=2 * n_half + 1, ny=2 * n_half + 1, center=0j, dx=w0.dx, dy=w0.dy
        )
        kgrid = sample_function(kernel, kspec, min_coverage=4.0)
        conv = convolve_grids(w0, kgrid)

    _check_mapped_extent(mapped, conv.spec)
    wr = _bicubic(conv, mapped)
    return PhaseSpaceGrid(out_grid_spec, scale * wr)


def _check_mapped_extent(mapped: np.ndarray, spec: GridSpec) -> None:
    hx, hy = spec.half_extent()
    tol = 1e-6 * min(spec.dx, spec.dy)
    dx_ = np.abs(mapped.real - spec.center.real).max()
    dy_ = np.abs(mapped.imag - spec.center.imag).max()
    if dx_ > hx + tol or dy_ > hy + tol:
        raise ExtentTooSmall(
            f"mapped output points reach ({dx_:.3g}, {dy_:.3g}) from the grid "
            f"center but the sampled region spans only ({hx:.3g}, {hy:.3g})"
        )


def _bicubic(grid: PhaseSpaceGrid, points: np.ndarray) -> np.ndarray:
    xs, ys = grid.spec.x_coords(), grid.spec.y_coords()
    re = RectBivariateSpline(xs, ys, grid.values.real, kx=3, ky=3)
    im = RectBivariateSpline(xs, ys, grid.values.imag, kx=3, ky=3)
    px, py = points.real.ravel(), points.imag.ravel()
    out = re.ev(px, py) + 1j * im.ev(px, py)
    return out.reshape(points.shape)


def mean_trajectory(
    alpha0: complex, bath: BathParams, drive: DriveSpec, t: float
) -> complex:
    """Rotating-frame mean of alpha: ``e^{-kappa t} (alpha0 + lambda1(t))``."""
    t = _check_time(t)
    return math.exp(-bath.kappa * t) * (complex(alpha0) + coeff_lambda1(drive, bath, t))


def coefficients_report(
    bath: BathParams, drive: DriveSpec, times
) -> list[dict]:
    """JSON-ready coefficient records, one per requested time."""
    out = []
    for t in times:
        c = coefficients(bath, drive, t)
        out.append(
            {
                "t": c.t,
                "lambda1": [c.lambda1.real, c.lambda1.imag],
                "lambda2": [c.lambda2.real, c.lambda2.imag],
                "T": c.T,
                "A": c.A,
                "r": [[z.real, z.imag] for z in c.ordering.as_tuple()],
            }
        )
    return out


def coefficients_report_json(bath: BathParams, drive: DriveSpec, times) -> str:
    return json.dumps(coefficients_report(bath, drive, times), sort_keys=True, indent=2)
