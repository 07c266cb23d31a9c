"""Gaussian phase-space kernels, grids, and the convolution algebra.

Phase-space points are plain complex numbers ``alpha = x + i*y``.  All
integrals use the ``d^2alpha / pi`` measure, so a sampled grid integrates as
``sum(values) * dx * dy / pi``.

A kernel is labelled by a vector of three complex parameters
``(r1, r2, r3)``.  With ``rr = r1^2 + r2^2 + r3^2`` the kernel is

    g_r(alpha) = 2/sqrt(rr) * exp(-(r1*(a^2 - c^2) + i*r2*(a^2 + c^2)
                                    + 2*r3*a*c) / rr),   c = conj(a),

normalized to unit mass whenever its exponent is a decaying (negative
definite) quadratic form.  Convolution of two kernels adds their parameter
vectors, so the decaying kernels form a commutative group under convolution;
`sample_function` / `convolve_grids` realize the same algebra on sampled
grids.

All values here are immutable after construction and safe to share across
threads; grid reductions run in a fixed (row-major) summation order.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import (
    DivergentIntegral,
    GridTooCoarse,
    MismatchedGrids,
    ZeroQuadraticNorm,
)
import warnings

__all__ = [
    "OrderingVector",
    "GaussianPhaseFunction",
    "GaussianIntegralParams",
    "GridSpec",
    "PhaseSpaceGrid",
    "quadratic_norm",
    "eval_kernel",
    "gaussian_integral",
    "convolve_orderings",
    "sample_function",
    "convolve_grids",
    "grid_integral",
    "coherent_wigner",
    "thermal_wigner",
    "kernel_moments",
    "phase_function_moments",
    "auto_grid",
    "grid_to_csv",
    "grid_from_csv",
]

#: Eigenvalue threshold below which the exponent's real quadratic form counts
#: as negative definite (kernel decays at infinity).
DECAY_EIGENVALUE_THRESHOLD = -1e-12

#: |rr| below this is treated as a zero quadratic norm.
RR_EPSILON = 1e-12


def _as_complex(z, name: str) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must be finite, got {z!r}")
    return z


@dataclass(frozen=True)
class OrderingVector:
    """Three complex parameters labelling a Gaussian kernel / ordering."""

    r1: complex
    r2: complex
    r3: complex

    def __post_init__(self):
        for name in ("r1", "r2", "r3"):
            object.__setattr__(self, name, _as_complex(getattr(self, name), name))

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.r1, self.r2, self.r3)

    def __add__(self, other: "OrderingVector") -> "OrderingVector":
        return OrderingVector(self.r1 + other.r1, self.r2 + other.r2, self.r3 + other.r3)

    def __neg__(self) -> "OrderingVector":
        return OrderingVector(-self.r1, -self.r2, -self.r3)

    def scaled(self, factor: complex) -> "OrderingVector":
        return OrderingVector(factor * self.r1, factor * self.r2, factor * self.r3)

    def norm(self) -> float:
        """Euclidean size of the vector (not the quadratic norm)."""
        return math.sqrt(abs(self.r1) ** 2 + abs(self.r2) ** 2 + abs(self.r3) ** 2)

    def exponent_form(self) -> np.ndarray:
        """Complex symmetric 2x2 matrix C of the kernel exponent.

        With ``v = (x, y)`` the exponent of the kernel equals ``v @ C @ v``.
        """
        rr = quadratic_norm(self)
        if abs(rr) < RR_EPSILON:
            raise ZeroQuadraticNorm(f"quadratic norm {rr!r} below epsilon")
        c_xx = -(2j * self.r2 + 2 * self.r3) / rr
        c_yy = -(2 * self.r3 - 2j * self.r2) / rr
        c_xy = -2j * self.r1 / rr
        return np.array([[c_xx, c_xy], [c_xy, c_yy]])

    def is_decaying(self, threshold: float = DECAY_EIGENVALUE_THRESHOLD) -> bool:
        """True when the kernel decays at infinity in every direction."""
        rr = quadratic_norm(self)
        if abs(rr) < RR_EPSILON:
            return False
        eig = np.linalg.eigvalsh(self.exponent_form().real)
        return bool(eig.max() < threshold)

    def widths(self) -> tuple[float, float]:
        """(min, max) Gaussian standard widths along the principal axes."""
        eig = np.linalg.eigvalsh(self.exponent_form().real)
        if eig.max() >= 0:
            raise ValueError("widths are only defined for decaying kernels")
        lam = np.abs(eig)
        return (1.0 / math.sqrt(2.0 * lam.max()), 1.0 / math.sqrt(2.0 * lam.min()))


def quadratic_norm(r: OrderingVector) -> complex:
    """Quadratic norm r1^2 + r2^2 + r3^2 appearing in the kernel."""
    return r.r1 * r.r1 + r.r2 * r.r2 + r.r3 * r.r3


def convolve_orderings(r: OrderingVector, s: OrderingVector) -> OrderingVector:
    """Parameter vector of the convolution g_r * g_s = g_{r+s}."""
    return r + s


def eval_kernel(r: OrderingVector, alpha, *, eps: float = RR_EPSILON):
    """Evaluate the normalized Gaussian kernel g_r at alpha.

    ``alpha`` may be a complex scalar or an ndarray of complex values; the
    return matches the input shape.  The prefactor uses the principal branch
    of ``sqrt(rr)``; for the physically generated vectors (r1, r2 imaginary,
    r3 real positive) ``rr`` is real positive on the kernel's validity
    domain, so no branch discontinuity arises.  Exotic complex vectors fall
    outside that guarantee.

    Raises ZeroQuadraticNorm when ``|rr| < eps``.
    """
    rr = quadratic_norm(r)
    if abs(rr) < eps:
        raise ZeroQuadraticNorm(f"quadratic norm {rr!r} below epsilon {eps}")
    a = np.asarray(alpha, dtype=complex)
    c = np.conj(a)
    quad = r.r1 * (a * a - c * c) + 1j * r.r2 * (a * a + c * c) + 2.0 * r.r3 * a * c
    out = (2.0 / np.sqrt(np.complex128(rr))) * np.exp(-quad / rr)
    if np.isscalar(alpha) or np.ndim(alpha) == 0:
        return complex(out)
    return out


@dataclass(frozen=True)
class GaussianIntegralParams:
    """Parameters of the quadratic exponent ``s|z|^2 + xi z + eta z* + f z^2 + g z*^2``."""

    varsigma: complex
    xi: complex = 0j
    eta: complex = 0j
    f: complex = 0j
    g: complex = 0j

    def __post_init__(self):
        for name in ("varsigma", "xi", "eta", "f", "g"):
            object.__setattr__(self, name, _as_complex(getattr(self, name), name))

    def real_quadratic_form(self) -> np.ndarray:
        """Real 2x2 form governing convergence of the integral."""
        s, f, g = self.varsigma, self.f, self.g
        return np.array(
            [
                [(s + f + g).real, -(f - g).imag],
                [-(f - g).imag, (s - f - g).real],
            ]
        )

    def is_convergent(self, threshold: float = DECAY_EIGENVALUE_THRESHOLD) -> bool:
        eig = np.linalg.eigvalsh(self.real_quadratic_form())
        return bool(eig.max() < threshold)


def gaussian_integral(p: GaussianIntegralParams) -> complex:
    """Closed form of ``integral d^2z/pi exp(s|z|^2 + xi z + eta z* + f z^2 + g z*^2)``.

    Returns ``(s^2 - 4 f g)^(-1/2) exp[(-s xi eta + xi^2 g + eta^2 f) /
    (s^2 - 4 f g)]`` with the square-root branch taken as the principal one,
    which continues the elementary ``f = g = 0`` case on the convergent
    domain.  Raises DivergentIntegral when the convergence check fails.
    """
    if not p.is_convergent():
        raise DivergentIntegral(
            "quadratic form is not negative definite: "
            f"varsigma={p.varsigma!r}, f={p.f!r}, g={p.g!r}"
        )
    disc = p.varsigma * p.varsigma - 4.0 * p.f * p.g
    num = -p.varsigma * p.xi * p.eta + p.xi * p.xi * p.g + p.eta * p.eta * p.f
    return cmath.exp(num / disc) / cmath.sqrt(disc)


def kernel_moments(r: OrderingVector) -> dict[tuple[int, int], complex]:
    """Low-order moments ``integral d^2b/pi conj(b)^p b^q g_r(b)`` for p+q <= 2.

    Closed forms, polynomial in the vector components (hence valid for any
    vector by analytic continuation): first moments vanish, ``(1,1) -> r3/2``,
    ``(2,0) -> -(r1 + i r2)/2``, ``(0,2) -> (r1 - i r2)/2``.
    """
    return {
        (0, 0): 1.0 + 0j,
        (1, 0): 0j,
        (0, 1): 0j,
        (1, 1): r.r3 / 2.0,
        (2, 0): -(r.r1 + 1j * r.r2) / 2.0,
        (0, 2): (r.r1 - 1j * r.r2) / 2.0,
    }


@dataclass(frozen=True)
class GaussianPhaseFunction:
    """A scaled, shifted kernel: ``value(alpha) = weight * g_r(scale*alpha - mean)``.

    Closed under the damping evolution law; represents every Gaussian-class
    Wigner function.  The mass ``integral d^2alpha/pi`` equals
    ``weight / scale^2`` when the kernel is decaying.
    """

    ordering: OrderingVector
    mean: complex = 0j
    weight: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_complex(self.mean, "mean"))
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"weight must be positive, got {self.weight}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")

    def __call__(self, alpha):
        return self.weight * eval_kernel(self.ordering, self.scale * np.asarray(alpha, complex) - self.mean)

    @property
    def mass(self) -> float:
        return self.weight / self.scale**2

    def canonical(self) -> "GaussianPhaseFunction":
        """Equivalent function with scale 1 (exact reparameterization).

        ``w*g_r(s*a - mu) = (w/s^2) * g_{r/s^2}(a - mu/s)``.
        """
        s = self.scale
        if s == 1.0:
            return self
        return GaussianPhaseFunction(
            ordering=self.ordering.scaled(1.0 / (s * s)),
            mean=self.mean / s,
            weight=self.weight / (s * s),
            scale=1.0,
        )

    def center(self) -> complex:
        """Location of the peak in alpha coordinates."""
        return self.mean / self.scale

    def widths(self) -> tuple[float, float]:
        """(min, max) standard widths in alpha coordinates."""
        wmin, wmax = self.ordering.widths()
        return (wmin / self.scale, wmax / self.scale)


def coherent_wigner(alpha0: complex) -> GaussianPhaseFunction:
    """Wigner function of a coherent state: ``2 exp(-2|a - alpha0|^2)``."""
    return GaussianPhaseFunction(OrderingVector(0, 0, 1), mean=complex(alpha0))


def thermal_wigner(nbar0: float) -> GaussianPhaseFunction:
    """Wigner function of a thermal state with mean occupation ``nbar0``."""
    if nbar0 < 0:
        raise ValueError("thermal occupation must be nonnegative")
    return GaussianPhaseFunction(OrderingVector(0, 0, 2.0 * nbar0 + 1.0))


def phase_function_moments(f: GaussianPhaseFunction) -> dict[str, complex]:
    """Normalized moments of alpha under ``f`` (decaying kernels only).

    Keys: ``"mean"`` = <alpha>, ``"abs2"`` = <|alpha|^2>, ``"sq"`` = <alpha^2>,
    ``"sqc"`` = <conj(alpha)^2>.
    """
    g = f.canonical()
    mom = kernel_moments(g.ordering)
    mu = g.mean
    return {
        "mean": mu,
        "abs2": abs(mu) ** 2 + mom[(1, 1)],
        "sq": mu * mu + mom[(0, 2)],
        "sqc": np.conj(mu) ** 2 + mom[(2, 0)],
    }


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular sampling of the complex plane.

    Node ``(ix, iy)`` sits at ``center + (ix - (nx-1)/2)*dx + 1j*(iy - (ny-1)/2)*dy``.
    """

    nx: int
    ny: int
    center: complex = 0j
    dx: float = 0.05
    dy: float = 0.05

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid must have at least one node per axis")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacings must be positive")
        object.__setattr__(self, "center", _as_complex(self.center, "center"))

    @classmethod
    def square(cls, half_extent: float, n: int = 256, center: complex = 0j) -> "GridSpec":
        """n x n grid whose outermost nodes sit at center +- half_extent."""
        if n < 2:
            raise ValueError("square grid needs n >= 2")
        h = 2.0 * half_extent / (n - 1)
        return cls(nx=n, ny=n, center=center, dx=h, dy=h)

    def x_coords(self) -> np.ndarray:
        return self.center.real + (np.arange(self.nx) - (self.nx - 1) / 2.0) * self.dx

    def y_coords(self) -> np.ndarray:
        return self.center.imag + (np.arange(self.ny) - (self.ny - 1) / 2.0) * self.dy

    def alphas(self) -> np.ndarray:
        """Complex coordinates, shape (nx, ny); index [ix, iy]."""
        return self.x_coords()[:, None] + 1j * self.y_coords()[None, :]

    def half_extent(self) -> tuple[float, float]:
        return ((self.nx - 1) / 2.0 * self.dx, (self.ny - 1) / 2.0 * self.dy)


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Sampled complex-valued function with the d^2alpha/pi quadrature rule."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.spec.nx, self.spec.ny):
            raise ValueError(f"values shape {v.shape} does not match spec {self.spec}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nx(self) -> int:
        return self.spec.nx

    @property
    def ny(self) -> int:
        return self.spec.ny

    @property
    def dx(self) -> float:
        return self.spec.dx

    @property
    def dy(self) -> float:
        return self.spec.dy

    @property
    def center(self) -> complex:
        return self.spec.center

    def alphas(self) -> np.ndarray:
        return self.spec.alphas()


def grid_integral(a: PhaseSpaceGrid) -> complex:
    """Quadrature of the grid: sum(values) * dx * dy / pi."""
    return complex(a.values.sum() * a.dx * a.dy / math.pi)


def auto_grid(
    functions,
    n: int = 256,
    coverage: float = 6.0,
    extra_center: complex = 0j,
    min_half_extent: float = 0.0,
) -> GridSpec:
    """Square grid covering every function's peak plus ``coverage`` widths.

    ``extra_center`` enlarges the covered region to include an additional
    point of interest (e.g. a drive displacement).
    """
    half = max(min_half_extent, abs(extra_center))
    for f in functions:
        c = f.center()
        _, wmax = f.widths()
        half = max(half, abs(c.real) + coverage * wmax, abs(c.imag) + coverage * wmax)
    return GridSpec.square(half, n=n)


def sample_function(
    f: GaussianPhaseFunction,
    grid_spec: GridSpec,
    *,
    min_coverage: float = 6.0,
) -> PhaseSpaceGrid:
    """Pointwise samples of ``f`` on the grid.

    Warns (GridTooCoarse) when the spacing exceeds half the smallest kernel
    width or when the extent covers fewer than ``min_coverage`` widths
    around the peak.
    """
    wmin, wmax = f.widths()
    if max(grid_spec.dx, grid_spec.dy) > 0.5 * wmin:
        warnings.warn(
            f"grid spacing {max(grid_spec.dx, grid_spec.dy):.3g} exceeds half the "
            f"smallest kernel width {wmin:.3g}",
            GridTooCoarse,
            stacklevel=2,
        )
    hx, hy = grid_spec.half_extent()
    c = f.center() - grid_spec.center
    if (hx - abs(c.real) < min_coverage * wmax) or (hy - abs(c.imag) < min_coverage * wmax):
        warnings.warn(
            f"grid extent covers fewer than {min_coverage} kernel widths",
            GridTooCoarse,
            stacklevel=2,
        )
    return PhaseSpaceGrid(grid_spec, f(grid_spec.alphas()))


def convolve_grids(a: PhaseSpaceGrid, b: PhaseSpaceGrid) -> PhaseSpaceGrid:
    """Linear convolution ``(a * b)(alpha) = integral d^2b/pi a(b) b(alpha - b)``.

    Zero-padded to the sum of supports (FFT-based, linear semantics); the
    output grid has ``nx_a + nx_b - 1`` nodes per axis and is centered at
    ``center_a + center_b``.  Raises MismatchedGrids on different spacings.
    """
    if not (
        math.isclose(a.dx, b.dx, rel_tol=1e-9, abs_tol=0.0)
        and math.isclose(a.dy, b.dy, rel_tol=1e-9, abs_tol=0.0)
    ):
        raise MismatchedGrids(
            f"spacings differ: ({a.dx}, {a.dy}) vs ({b.dx}, {b.dy})"
        )
    out = fftconvolve(a.values, b.values, mode="full") * (a.dx * a.dy / math.pi)
    spec = GridSpec(
        nx=a.nx + b.nx - 1,
        ny=a.ny + b.ny - 1,
        center=a.center + b.center,
        dx=a.dx,
        dy=a.dy,
    )
    return PhaseSpaceGrid(spec, out)


def crop_to_spec(grid: PhaseSpaceGrid, spec: GridSpec) -> PhaseSpaceGrid:
    """Extract the sub-grid of ``grid`` whose nodes coincide with ``spec``.

    The target nodes must lie on the source lattice (up to 1e-9 of a cell).
    """
    ox = (spec.center.real - grid.center.real) / grid.dx + (grid.nx - spec.nx) / 2.0
    oy = (spec.center.imag - grid.center.imag) / grid.dy + (grid.ny - spec.ny) / 2.0
    ix, iy = round(ox), round(oy)
    if abs(ox - ix) > 1e-9 or abs(oy - iy) > 1e-9:
        raise MismatchedGrids("target grid nodes do not lie on the source lattice")
    if ix < 0 or iy < 0 or ix + spec.nx > grid.nx or iy + spec.ny > grid.ny:
        raise MismatchedGrids("target grid extends beyond the source grid")
    return PhaseSpaceGrid(spec, grid.values[ix : ix + spec.nx, iy : iy + spec.ny])


def grid_to_csv(grid: PhaseSpaceGrid, path) -> None:
    """Write the grid as CSV with a '#'-prefixed metadata header."""
    s = grid.spec
    lines = [
        f"# nx={s.nx}",
        f"# ny={s.ny}",
        f"# center={s.center.real!r},{s.center.imag!r}",
        f"# dx={s.dx!r}",
        f"# dy={s.dy!r}",
    ]
    al = grid.alphas()
    v = grid.values
    for ix in range(s.nx):
        for iy in range(s.ny):
            a = al[ix, iy]
            z = v[ix, iy]
            lines.append(
                f"{ix},{iy},{float(a.real)!r},{float(a.imag)!r},"
                f"{float(z.real)!r},{float(z.imag)!r}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def grid_from_csv(path) -> PhaseSpaceGrid:
    """Read a grid written by `grid_to_csv`."""
    meta: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            else:
                rows.append(line.split(","))
    cre, cim = (float(t) for t in meta["center"].split(","))
    spec = GridSpec(
        nx=int(meta["nx"]),
        ny=int(meta["ny"]),
        center=complex(cre, cim),
        dx=float(meta["dx"]),
        dy=float(meta["dy"]),
    )
    values = np.zeros((spec.nx, spec.ny), dtype=complex)
    for row in rows:
        ix, iy = int(row[0]), int(row[1])
        values[ix, iy] = complex(float(row[4]), float(row[5]))
    return PhaseSpaceGrid(spec, values)
