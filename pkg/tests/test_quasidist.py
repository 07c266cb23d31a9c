import itertools
import math

import numpy as np
import pytest

from sqbath import (
    DivergentKernel,
    FockDensityMatrix,
    GaussianPhaseFunction,
    GridSpec,
    OrderedProductSpec,
    OrderingVector,
    TailDivergence,
    completeness_check,
    convolve_grids,
    grid_integral,
    ladder_operators,
    ordered_product,
    quasi_distribution,
    reconstruct_rho,
    sample_function,
    transition_T0,
    transition_Tr,
    wigner_grid,
)
from sqbath.kernels import crop_to_spec
from sqbath.quasidist import (
    _closed_weighted_sum,
    _kernel_moment_table,
    _transition_closed,
    operator_to_csv,
    ordering_rule_deviation,
)

ZERO = OrderingVector(0, 0, 0)
E3 = OrderingVector(0, 0, 1)
MIX = OrderingVector(0.4j, 0.4j, 1)

pytestmark = pytest.mark.filterwarnings("ignore::sqbath.errors.TruncationWarning")


def weyl_symmetrization(m: int, n: int, N: int) -> np.ndarray:
    """Average over all orderings of m raising and n lowering factors."""
    a, ad = ladder_operators(N)
    total = np.zeros((N, N), complex)
    words = set(itertools.permutations("+" * m + "-" * n))
    for word in words:
        op = np.eye(N, dtype=complex)
        for ch in word:
            op = op @ (ad if ch == "+" else a)
        total += op
    return total / len(words)


class TestDisplacedParity:
    def test_parity_at_origin(self):
        T = transition_T0(0.0, 10)
        assert np.abs(T - 2.0 * np.diag((-1.0) ** np.arange(10))).max() < 1e-14

    def test_hermitian(self):
        T = transition_T0(0.7 - 0.4j, 16)
        assert np.abs(T - T.conj().T).max() < 1e-12

    def test_vacuum_trace_rule(self):
        rho = FockDensityMatrix.vacuum(24)
        for alpha in (0.3, 0.9j, 1.1 - 0.5j):
            got = np.trace(transition_T0(alpha, 24) @ rho.entries)
            assert abs(got - 2.0 * math.exp(-2.0 * abs(alpha) ** 2)) < 1e-12

    def test_closed_elements_match_low_block(self):
        # exact matrix elements vs truncated-generator construction, away
        # from the cutoff corner
        for alpha in (0.4 + 0.3j, -0.8j):
            Texp = transition_T0(alpha, 24)
            Tcl = _transition_closed(np.asarray(alpha), ZERO, 24)
            assert np.abs(Texp[:10, :10] - Tcl[:10, :10]).max() < 1e-7


class TestTransitionTr:
    def test_zero_vector_is_parity(self):
        assert np.array_equal(transition_Tr(0.5, ZERO, 12), transition_T0(0.5, 12))

    def test_near_delta_limit(self):
        # the smoothing perturbs element (m, n) by O(r3 * (m + n + 1)), so
        # the identity limit is checked where that bound sits below 1e-3
        r = OrderingVector(0, 0, 1e-3)
        got = transition_Tr(0.4 + 0.1j, r, 12)
        ref = transition_T0(0.4 + 0.1j, 12)
        assert abs(got[0, 0] - ref[0, 0]) < 1e-3
        assert np.abs(got - ref)[:4, :4].max() < 5e-3
        tighter = transition_Tr(0.4 + 0.1j, OrderingVector(0, 0, 2e-4), 12)
        assert np.abs(tighter - ref)[:4, :4].max() < 1e-3

    def test_divergent_kernel(self):
        with pytest.raises(DivergentKernel):
            transition_Tr(0.0, OrderingVector(0, 0, -0.5), 12)

    def test_husimi_trace_rule(self):
        # smoothing a coherent state's parity trace gives exp(-|a-a0|^2)
        alpha0 = 0.5 + 0.3j
        rho = FockDensityMatrix.coherent(alpha0, 20)
        for alpha in (0.2, 1.0 + 0.1j, -0.4j):
            got = np.trace(transition_Tr(alpha, E3, 20) @ rho.entries)
            assert abs(got - math.exp(-abs(alpha - alpha0) ** 2)) < 1e-5

    def test_unit_trace(self):
        # geometric tail: the exact-element operator has unit trace once the
        # cutoff passes the pairing's decay scale
        for r in (E3, MIX, OrderingVector(0, 0, 0.5)):
            T = _transition_closed(np.asarray(0.7 + 0.2j), r, 40)
            assert abs(np.trace(T) - 1.0) < 1e-9

    def test_hermitian_for_physical_class(self):
        T = transition_Tr(0.3 - 0.2j, MIX, 14)
        assert np.abs(T - T.conj().T).max() < 1e-10

    def test_quadrature_matches_closed_form(self):
        # narrow kernel: the quadrature stays inside the reliable region of
        # the truncated parities, so the two routes agree on the low block
        r = OrderingVector(0.1j, -0.05j, 0.3)
        alpha = 0.4 + 0.3j
        Tq = transition_Tr(alpha, r, 20)
        Tc = _transition_closed(np.asarray(alpha), r, 20)
        assert np.abs(Tq[:8, :8] - Tc[:8, :8]).max() < 5e-4


class TestQuasiDistribution:
    def test_zero_vector_returns_wigner(self):
        rho = FockDensityMatrix.thermal(0.3, 16)
        spec = GridSpec.square(2.0, 32)
        wq = quasi_distribution(rho, ZERO, spec)
        w0 = wigner_grid(rho, spec)
        assert np.array_equal(wq.values, w0.values)

    def test_coherent_husimi_shape(self):
        # valid inside the cutoff-reliable window; edge cells lose smoothing
        # mass from outside the grid
        alpha0 = 0.7 + 0.4j
        rho = FockDensityMatrix.coherent(alpha0, 40)
        spec = GridSpec.square(2.3, 64)
        wq = quasi_distribution(rho, E3, spec, verify=False)
        ana = GaussianPhaseFunction(OrderingVector(0, 0, 2), mean=alpha0)
        diff = np.abs(wq.values - ana(spec.alphas()))
        assert diff[10:-10, 10:-10].max() < 3e-4

    def test_spot_check_against_trace_rule(self):
        rho = FockDensityMatrix.coherent(0.5 + 0.2j, 20)
        spec = GridSpec.square(2.2, 48)
        quasi_distribution(rho, E3, spec, verify=True)  # must not raise

    def test_mass_preserved_by_smoothing(self):
        rho = FockDensityMatrix.vacuum(48)
        spec = GridSpec.square(3.0, 96)
        w0 = wigner_grid(rho, spec)
        wq = quasi_distribution(rho, OrderingVector(0, 0, 0.5), spec, verify=False)
        assert abs(grid_integral(wq) - grid_integral(w0)) < 1e-4
        assert abs(grid_integral(w0) - 1.0) < 1e-3  # trace rule on the grid

    def test_group_action_consistency(self):
        rho = FockDensityMatrix.coherent(0.4, 40)
        spec = GridSpec.square(2.4, 64)
        r, s = OrderingVector(0, 0, 0.6), OrderingVector(0.2j, 0, 0.5)
        w_r = quasi_distribution(rho, r, spec, verify=False)
        kern = GaussianPhaseFunction(s)
        kspec = GridSpec(nx=55, ny=55, center=0j, dx=spec.dx, dy=spec.dy)
        ks = sample_function(kern, kspec, min_coverage=3.0)
        lhs = crop_to_spec(convolve_grids(w_r, ks), spec)
        rhs = quasi_distribution(rho, r + s, spec, verify=False)
        inner = (slice(10, -10), slice(10, -10))
        assert np.abs(lhs.values[inner] - rhs.values[inner]).max() < 2e-4


class TestReconstruct:
    def test_vacuum_round_trip_at_zero(self):
        rho = FockDensityMatrix.vacuum(12)
        w = wigner_grid(rho.embedded(40), GridSpec.square(3.2, 96))
        rec = reconstruct_rho(w, ZERO, 12)
        assert np.linalg.norm(rec.entries - rho.entries) < 1e-4
        assert abs(rec.trace() - 1.0) < 1e-3

    def test_thermal_round_trip(self):
        rho = FockDensityMatrix.thermal(0.4, 12)
        r = OrderingVector(0, 0, 0.5)
        spec = GridSpec.square(3.2, 96)
        wq = quasi_distribution(rho.embedded(36), r, spec, verify=False)
        rec = reconstruct_rho(wq, r, 12)
        assert np.linalg.norm(rec.entries - rho.entries) < 1e-3
        assert abs(rec.trace() - 1.0) < 1e-3

    def test_husimi_reconstruction_is_singular(self):
        rho = FockDensityMatrix.thermal(0.4, 10)
        spec = GridSpec.square(3.0, 48)
        wq = quasi_distribution(rho.embedded(24), E3, spec, verify=False)
        with pytest.raises(TailDivergence):
            reconstruct_rho(wq, E3, 10)

    def test_corrupted_window_rejected(self):
        # far corners of a small-cutoff Wigner grid are garbage; the tail
        # monitor must refuse them
        rho = FockDensityMatrix.thermal(0.4, 30)
        w = wigner_grid(rho, GridSpec.square(4.5, 64))
        with pytest.raises(TailDivergence):
            reconstruct_rho(w, OrderingVector(0, 0, 0.5), 30)


class TestCompleteness:
    def test_parity_family(self):
        spec = GridSpec.square(5.0, 128)
        assert completeness_check(ZERO, 16, spec) < 1e-3
        assert completeness_check(E3, 16, spec) < 1e-3

    def test_divergent_raises(self):
        with pytest.raises(DivergentKernel):
            completeness_check(OrderingVector(0, 0, -0.4), 12, GridSpec.square(4.0, 64))

    def test_deviation_grows_toward_corner(self):
        N = 16
        spec = GridSpec.square(5.0, 128)
        total = _closed_weighted_sum(
            spec.alphas(), np.full((128, 128), spec.dx * spec.dy / math.pi), E3, N
        )
        devs = [
            np.linalg.norm(total[:K, :K] - np.eye(K), 2) for K in (4, 8, 12, 16)
        ]
        assert devs[0] <= devs[1] <= devs[2] <= devs[3]
        assert devs[-1] > 10 * devs[0]


class TestOrderedProducts:
    def test_identity(self):
        out = ordered_product(OrderedProductSpec(0, 0, MIX), 16)
        assert np.abs(out - np.eye(16)).max() < 1e-3

    def test_linear_terms_ordering_independent(self):
        a, _ = ladder_operators(16)
        mats = [
            ordered_product(OrderedProductSpec(0, 1, r), 16, verify=False)
            for r in (ZERO, E3, MIX)
        ]
        for op in mats:
            assert np.abs(op - a).max() < 1e-4
        assert np.abs(mats[0] - mats[1]).max() < 1e-10

    def test_symmetric_product(self):
        a, ad = ladder_operators(16)
        out = ordered_product(OrderedProductSpec(1, 1, ZERO), 16, verify=False)
        sym = weyl_symmetrization(1, 1, 16)
        # the truncated symmetrization oracle is exact away from the corner
        assert np.abs(out - sym)[:15, :15].max() < 1e-8
        assert np.abs(out - (ad @ a + 0.5 * np.eye(16)))[:15, :15].max() < 1e-8

    def test_normal_side_product(self):
        _, ad = ladder_operators(16)
        a, _ = ladder_operators(16)
        out = ordered_product(OrderedProductSpec(1, 1, E3), 16, verify=False)
        assert np.abs(out - ad @ a)[:15, :15].max() < 1e-8

    def test_quartic_weyl_matches_symmetrization(self):
        out = ordered_product(OrderedProductSpec(2, 2, ZERO), 14, verify=False)
        sym = weyl_symmetrization(2, 2, 14)
        assert np.abs(out - sym)[:10, :10].max() < 1e-6

    def test_defining_property_all_vectors(self):
        for r in (ZERO, E3, MIX):
            for m, n in ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (0, 2)):
                spec = OrderedProductSpec(m, n, r)
                op = ordered_product(spec, 16, verify=False)
                assert ordering_rule_deviation(op, spec) < 1e-3

    def test_range_validation(self):
        with pytest.raises(ValueError):
            OrderedProductSpec(3, 2, ZERO)


class TestMomentTable:
    def test_against_grid_quadrature(self):
        r = OrderingVector(0.3j, -0.2j, 1.4)
        table = _kernel_moment_table(r, 2, 2)
        g = sample_function(GaussianPhaseFunction(r), GridSpec.square(7.0, 256))
        al = g.alphas()
        cell = g.dx * g.dy / math.pi
        for p, q in ((0, 0), (1, 1), (2, 0), (0, 2), (2, 2), (1, 2)):
            want = (np.conj(al) ** p * al**q * g.values).sum() * cell
            assert abs(table[p, q] - want) < 1e-6


def test_operator_csv(tmp_path):
    op = transition_T0(0.2, 4)
    path = tmp_path / "op.csv"
    operator_to_csv(op, path, m=1, n=0)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "# N=4"
    assert len(lines) == 3 + 16
