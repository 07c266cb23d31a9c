import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from sqbath import (
    BathParams,
    ConstantDrive,
    CosineDrive,
    DriveDomainError,
    ExtentTooSmall,
    GaussianPhaseFunction,
    GridSpec,
    KernelNotNormalizable,
    NegativeTime,
    NoDrive,
    OrderingVector,
    TabulatedDrive,
    UnphysicalBathWarning,
    coeff_A,
    coeff_T,
    coeff_lambda1,
    coeff_lambda2,
    coherent_wigner,
    evolution_kernel,
    grid_integral,
    kernel_consistency,
    mean_trajectory,
    ordering_vector,
    propagate_gaussian,
    propagate_grid,
    quadratic_norm,
    sample_function,
)
from sqbath.kernels import kernel_moments
from sqbath.propagator import coefficients, coefficients_report

BATH = BathParams(kappa=0.1, nbar=0.5, M=0.3 + 0.2j, Omega=1.0)


def quad_complex(fun, a, b):
    re = quad(lambda t: fun(t).real, a, b, limit=400, epsabs=1e-13)[0]
    im = quad(lambda t: fun(t).imag, a, b, limit=400, epsabs=1e-13)[0]
    return complex(re, im)


def lambda1_quadrature(drive, bath, t):
    c = bath.kappa + 1j * bath.Omega
    from sqbath.propagator import drive_value

    return -1j * quad_complex(lambda u: drive_value(drive, u) * cmath.exp(c * u), 0.0, t)


class TestBathParams:
    def test_validation(self):
        with pytest.raises(ValueError):
            BathParams(kappa=0.0)
        with pytest.raises(ValueError):
            BathParams(kappa=0.1, nbar=-0.2)

    def test_unphysical_squeezing_warns(self):
        with pytest.warns(UnphysicalBathWarning):
            BathParams(kappa=0.1, nbar=0.1, M=0.9)
        BathParams(kappa=0.1, nbar=0.5, M=0.4)  # physical: silent


class TestDampingFraction:
    def test_zero_time(self):
        assert coeff_T(BATH, 0.0) == 0.0

    def test_asymptote(self):
        assert abs(coeff_T(BathParams(kappa=1.0), 20.0) - 1.0) < 1e-15

    def test_value(self):
        # frozen: 1 - exp(-1) for kappa t = 0.5
        assert coeff_T(BathParams(kappa=0.1), 5.0) == pytest.approx(1.0 - math.exp(-1.0))

    def test_negative_time(self):
        with pytest.raises(NegativeTime):
            coeff_T(BATH, -0.5)


class TestDriveAccumulation:
    def test_no_drive(self):
        for t in (0.0, 0.7, 3.0):
            assert coeff_lambda1(NoDrive(), BATH, t) == 0j

    def test_constant_small_kappa_limit(self):
        bath = BathParams(kappa=1e-9, Omega=0.0)
        lam = coeff_lambda1(ConstantDrive(0.4), bath, 2.0)
        assert abs(lam - (-1j * 0.4 * 2.0)) < 1e-8

    def test_constant_closed_form(self):
        bath = BathParams(kappa=0.3, Omega=1.7)
        c = bath.kappa + 1j * bath.Omega
        t = 1.3
        expected = -1j * 0.25 * (cmath.exp(c * t) - 1.0) / c
        assert coeff_lambda1(ConstantDrive(0.25), bath, t) == pytest.approx(expected)

    @pytest.mark.parametrize(
        "drive",
        [
            ConstantDrive(0.3),
            CosineDrive(0.2, 1.0),
            CosineDrive(0.2, 1.0, phase=0.6),
            CosineDrive(0.15, 2.3, phase=-0.4),
        ],
    )
    def test_against_quadrature(self, drive):
        for t in (0.4, 1.1, 2.7):
            got = coeff_lambda1(drive, BATH, t)
            want = lambda1_quadrature(drive, BATH, t)
            assert abs(got - want) < 1e-10

    def test_resonant_cosine(self):
        # omega = Omega requires no special casing (kappa keeps it regular)
        bath = BathParams(kappa=0.1, Omega=1.0)
        drive = CosineDrive(0.2, 1.0)
        got = coeff_lambda1(drive, bath, 2.0)
        assert abs(got - lambda1_quadrature(drive, bath, 2.0)) < 1e-10

    def test_tabulated_piecewise_linear(self):
        # exact per-segment closed form for a linear-in-t force as oracle
        bath = BathParams(kappa=0.2, Omega=0.8)
        c = bath.kappa + 1j * bath.Omega
        knots = [0.0, 0.5, 1.1, 2.0]
        vals = [0.1, 0.3, -0.2, 0.25]
        drive = TabulatedDrive(tuple(zip(knots, vals)))

        def segment(a, b, fa, fb):
            # integral of (fa + (u-a)(fb-fa)/(b-a)) e^{cu} du
            slope = (fb - fa) / (b - a)
            ea, eb = cmath.exp(c * a), cmath.exp(c * b)
            return (fb * eb - fa * ea) / c - slope * (eb - ea) / (c * c)

        t = 1.7
        want = -1j * (
            segment(0.0, 0.5, 0.1, 0.3)
            + segment(0.5, 1.1, 0.3, -0.2)
            + segment(1.1, t, -0.2, -0.2 + (0.25 + 0.2) * (t - 1.1) / 0.9)
        )
        got = coeff_lambda1(drive, bath, t)
        assert abs(got - want) < 1e-9

    def test_tabulated_coverage_error(self):
        drive = TabulatedDrive(((0.0, 0.1), (1.0, 0.2)))
        with pytest.raises(DriveDomainError):
            coeff_lambda1(drive, BATH, 2.0)

    def test_tabulated_validation(self):
        with pytest.raises(ValueError):
            TabulatedDrive(((0.0, 0.1), (0.0, 0.2)))


class TestSqueezingAccumulation:
    def test_no_squeezing(self):
        assert coeff_lambda2(BathParams(kappa=0.2), 1.5) == 0j

    def test_zero_time(self):
        assert coeff_lambda2(BATH, 0.0) == 0j

    def test_corotating_form(self):
        bath = BathParams(kappa=0.25, nbar=0.0, M=0.3 - 0.1j, Omega=0.0)
        t = 1.2
        want = -(bath.M / 2.0) * math.expm1(2.0 * bath.kappa * t)
        assert coeff_lambda2(bath, t) == pytest.approx(want)

    def test_against_quadrature(self):
        c = 2.0 * (BATH.kappa + 1j * BATH.Omega)
        want = -BATH.kappa * BATH.M * quad_complex(lambda u: cmath.exp(c * u), 0.0, 1.3)
        assert abs(coeff_lambda2(BATH, 1.3) - want) < 1e-12


class TestOrderingVector:
    def test_zero_time(self):
        r = ordering_vector(BATH, 0.0)
        assert r.as_tuple() == (0, 0, 0)

    def test_thermal_only(self):
        bath = BathParams(kappa=0.2, nbar=0.7)
        r = ordering_vector(bath, 1.1)
        assert r.r1 == 0 and r.r2 == 0
        assert r.r3 == pytest.approx((2 * 0.7 + 1) * math.expm1(2 * 0.2 * 1.1))

    def test_component_structure(self):
        for t in (0.2, 1.0, 4.0):
            r = ordering_vector(BATH, t)
            assert r.r1.real == 0 and r.r2.real == 0
            assert r.r3.imag == 0 and r.r3.real >= 0

    def test_r3_monotone(self):
        ts = np.linspace(0.0, 5.0, 40)
        r3s = [ordering_vector(BATH, t).r3.real for t in ts]
        assert all(b >= a for a, b in zip(r3s, r3s[1:]))

    def test_norm_is_discriminant(self):
        for t in (0.3, 1.7):
            lam2 = coeff_lambda2(BATH, t)
            r = ordering_vector(BATH, t)
            want = r.r3.real**2 - 16.0 * abs(lam2) ** 2
            assert quadratic_norm(r) == pytest.approx(want)


class TestCoefficientIdentities:
    def test_identity_chain(self):
        for t in np.geomspace(1e-3, 40.0, 25):
            T = coeff_T(BATH, t)
            A = coeff_A(BATH, t)
            nT1 = BATH.nbar * T + 1.0
            assert abs(A * math.exp(BATH.kappa * t) * nT1 - 1.0) < 1e-12
            assert abs(2.0 * A * math.sinh(BATH.kappa * t) * nT1 - T) < 1e-12

    def test_report_shape(self):
        rep = coefficients_report(BATH, CosineDrive(0.2, 1.0), [0.0, 1.0])
        assert rep[0]["T"] == 0.0 and rep[0]["lambda1"] == [0.0, 0.0]
        assert set(rep[1]) == {"t", "lambda1", "lambda2", "T", "A", "r"}


class TestEvolutionKernel:
    def test_thermal_isotropic(self):
        bath = BathParams(kappa=0.2, nbar=0.7)
        k = evolution_kernel(bath, 0.9)
        assert k.ordering.r1 == 0 and k.ordering.r2 == 0

    def test_moments_vanish_at_small_time(self):
        prev = math.inf
        for t in (0.5, 0.05, 0.005, 0.0005, 0.00005):
            mom = kernel_moments(ordering_vector(BATH, t))
            size = abs(mom[(1, 1)]) + abs(mom[(2, 0)])
            assert size < prev
            prev = size
        assert prev < 2e-5

    def test_normalization_sweep(self):
        from sqbath.kernels import auto_grid

        bath = BathParams(kappa=0.12, nbar=0.6, M=0.5 + 0.3j, Omega=0.9)
        for kt in (0.05, 0.3, 1.0, 2.5, 6.0):
            kern = evolution_kernel(bath, kt / bath.kappa)
            grid = sample_function(kern, auto_grid([kern], n=256))
            assert abs(grid_integral(grid) - 1.0) < 1e-8

    def test_not_normalizable(self):
        with pytest.warns(UnphysicalBathWarning):
            bad = BathParams(kappa=0.1, nbar=0.0, M=3.0, Omega=0.0)
        with pytest.raises(KernelNotNormalizable):
            evolution_kernel(bad, 1.0)
        with pytest.raises(KernelNotNormalizable):
            evolution_kernel(BATH, 0.0)  # exact delta at t = 0

    def test_physical_parameters_always_normalizable(self):
        # |M|^2 <= nbar(nbar+1) keeps the discriminant positive for t > 0
        rng = np.random.default_rng(2)
        for _ in range(40):
            nbar = rng.uniform(0.0, 2.0)
            mmag = rng.uniform(0.0, 1.0) * math.sqrt(nbar * (nbar + 1.0))
            bath = BathParams(
                kappa=rng.uniform(0.05, 1.0),
                nbar=nbar,
                M=mmag * cmath.exp(1j * rng.uniform(0, 2 * math.pi)),
                Omega=rng.uniform(-2.0, 2.0),
            )
            for t in (1e-4, 0.3, 2.0, 20.0):
                evolution_kernel(bath, t)  # must not raise


class TestKernelConsistency:
    def test_thermal_case(self):
        bath = BathParams(kappa=0.2, nbar=0.4)
        assert kernel_consistency(bath, 1.0, GridSpec.square(4.0, 64)) < 1e-12

    def test_squeezed_case(self):
        # release-gating check of the vector reparameterization
        assert kernel_consistency(BATH, 1.0, GridSpec.square(4.0, 64)) < 1e-12

    def test_small_time_conditioning(self):
        assert kernel_consistency(BATH, 1e-8, GridSpec.square(4.0, 64)) < 1e-6


class TestPropagateGaussian:
    def test_zero_time_identity(self):
        f0 = coherent_wigner(0.7 + 0.2j)
        f = propagate_gaussian(f0, BATH, CosineDrive(0.2, 1.0), 0.0)
        assert f.ordering == f0.ordering
        assert f.mean == f0.mean
        assert f.weight == f0.weight and f.scale == f0.scale

    def test_coherent_structure(self):
        drive = CosineDrive(0.2, 1.0)
        alpha0 = 1.0 + 0.5j
        t = 1.3
        f = propagate_gaussian(coherent_wigner(alpha0), BATH, drive, t)
        r = ordering_vector(BATH, t)
        assert f.ordering.r1 == r.r1 and f.ordering.r2 == r.r2
        assert f.ordering.r3 == pytest.approx(1.0 + r.r3)
        assert f.mean == pytest.approx(alpha0 + coeff_lambda1(drive, BATH, t))
        assert f.scale == pytest.approx(math.exp(BATH.kappa * t))
        assert f.weight == pytest.approx(math.exp(2 * BATH.kappa * t))
        assert f.mass == pytest.approx(1.0)

    def test_thermal_relaxation_limit(self):
        bath = BathParams(kappa=0.1, nbar=0.8, M=0.0, Omega=0.7)
        spec = GridSpec.square(3.5, 64)
        want = (2.0 / (2 * bath.nbar + 1)) * np.exp(
            -2.0 * np.abs(spec.alphas()) ** 2 / (2 * bath.nbar + 1)
        )
        # centered squeezed-Gaussian start: anisotropy washes out as e^{-2 kt}
        f0 = GaussianPhaseFunction(OrderingVector(0.3j, -0.2j, 1.3))
        f = propagate_gaussian(f0, bath, NoDrive(), 100.0)
        assert np.abs(f(spec.alphas()) - want).max() < 1e-6
        # displaced start: the mean decays only as e^{-kt}, so push further
        g = propagate_gaussian(coherent_wigner(1.0 + 0.3j), bath, NoDrive(), 160.0)
        assert np.abs(g(spec.alphas()) - want).max() < 1e-6

    def test_scaled_input_consistency(self):
        # non-unit input scale follows the same law after canonicalization:
        # cross-checked against the direct convolution quadrature
        f0 = GaussianPhaseFunction(OrderingVector(0.2j, 0.1j, 1.2), mean=0.4 - 0.2j, weight=1.8, scale=1.5)
        t = 0.8
        got = propagate_gaussian(f0, BATH, ConstantDrive(0.2), t)
        w0 = sample_function(f0, GridSpec.square(4.0, 160), min_coverage=4.0)
        ref = propagate_grid(w0, BATH, ConstantDrive(0.2), t, GridSpec.square(1.5, 24), method="direct")
        assert np.abs(got(ref.spec.alphas()) - ref.values).max() < 1e-6
        assert got.mass == pytest.approx(f0.mass)

    def test_not_normalizable_propagates(self):
        with pytest.warns(UnphysicalBathWarning):
            bad = BathParams(kappa=0.1, nbar=0.0, M=2.0)
        with pytest.raises(KernelNotNormalizable):
            propagate_gaussian(coherent_wigner(0.0), bad, NoDrive(), 1.0)


class TestPropagateGrid:
    def test_near_zero_time_reproduces(self):
        f0 = coherent_wigner(0.6 - 0.4j)
        w0 = sample_function(f0, GridSpec.square(4.0, 128))
        out = propagate_grid(w0, BATH, CosineDrive(0.2, 1.0), 1e-9)
        assert np.abs(out.values - w0.values).max() < 1e-6

    def test_matches_analytic_path(self):
        drive = CosineDrive(0.2, 1.0)
        f0 = coherent_wigner(1.0 + 0.5j)
        w0 = sample_function(f0, GridSpec.square(5.0, 256))
        t = 1.0
        out = propagate_grid(w0, BATH, drive, t)
        ref = propagate_gaussian(f0, BATH, drive, t)(w0.spec.alphas())
        assert np.abs(out.values - ref).max() < 5e-4

    def test_mass_conserved(self):
        f0 = coherent_wigner(0.8)
        w0 = sample_function(f0, GridSpec.square(5.0, 192))
        out = propagate_grid(w0, BATH, NoDrive(), 1.5)
        assert abs(grid_integral(out) - grid_integral(w0)) < 1e-4

    def test_extent_too_small(self):
        f0 = coherent_wigner(0.5)
        w0 = sample_function(f0, GridSpec.square(4.0, 64), min_coverage=4.0)
        big_out = GridSpec.square(40.0, 32)
        with pytest.raises(ExtentTooSmall):
            propagate_grid(w0, BATH, NoDrive(), 2.0, big_out)

    def test_direct_method_agrees(self):
        f0 = coherent_wigner(0.3 + 0.2j)
        w0 = sample_function(f0, GridSpec.square(4.5, 128))
        out_spec = GridSpec.square(1.2, 16)
        a = propagate_grid(w0, BATH, NoDrive(), 0.7, out_spec)
        b = propagate_grid(w0, BATH, NoDrive(), 0.7, out_spec, method="direct")
        assert np.abs(a.values - b.values).max() < 1e-5


class TestMeanTrajectory:
    def test_pure_damping(self):
        alpha0 = 1.2 - 0.4j
        for t in (0.0, 0.9, 3.0):
            got = mean_trajectory(alpha0, BATH, NoDrive(), t)
            assert got == pytest.approx(alpha0 * math.exp(-BATH.kappa * t))

    def test_zero_time(self):
        assert mean_trajectory(0.5j, BATH, CosineDrive(0.2, 1.0), 0.0) == pytest.approx(0.5j)

    def test_driven_matches_moment_formula(self):
        drive = CosineDrive(0.3, 1.4, phase=0.2)
        t = 1.7
        want = math.exp(-BATH.kappa * t) * (0.4 + coeff_lambda1(drive, BATH, t))
        assert mean_trajectory(0.4, BATH, drive, t) == pytest.approx(want)


def test_coefficients_container():
    c = coefficients(BATH, NoDrive(), 0.9)
    assert c.t == 0.9
    assert c.T == coeff_T(BATH, 0.9)
    assert c.A == coeff_A(BATH, 0.9)
    assert c.lambda1 == 0j
