import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qsemis.graph import Graph, brute_force_mis, ket_to_index
from qsemis.hamiltonian import cost_diagonal
from qsemis.linalg import stencil_coefficients
from qsemis.qaoa import optimize_layerwise
from qsemis.qse import (
    EmptySubspaceError,
    Kernels,
    TimeGrid,
    assemble_state,
    build_kernels,
    default_mu0,
    evaluate_metrics,
    filter_success_probability,
    gaussian_filter_weights,
    generator_times,
    ite_weights,
    projected_residuals,
    reencode_probability,
    rte_extract_kernels,
    rte_samples,
    solve_deflation,
    solve_truncated,
    weighted_evolution,
)
from qsemis.simulator import ShotModel, StateVector, basis_state, expect_diagonal, plus_state, time_evolve

EDGE = Graph(2, ((0, 1),))


@pytest.fixture(scope="module")
def cube_setup(cube):
    d = cost_diagonal(cube)
    return d, optimize_layerwise(d).state, brute_force_mis(cube)


@pytest.fixture(scope="module")
def k33p_setup(k33p):
    d = cost_diagonal(k33p)
    return d, optimize_layerwise(d).state, brute_force_mis(k33p)


def random_pair(k, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    S = a @ a.conj().T / k + np.eye(k)
    b = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return Kernels((b + b.conj().T) / 2, S, np.zeros(k))


class TestGrid:
    def test_k1(self):
        assert list(generator_times(1).times) == [0.0]

    def test_k2(self):
        assert np.allclose(generator_times(2).times, [-math.pi / 2, math.pi / 2])

    def test_k3(self):
        assert np.allclose(generator_times(3).times, [-2 * math.pi / 3, 0, 2 * math.pi / 3])

    @pytest.mark.parametrize("K", range(2, 20))
    def test_invariants(self, K):
        g = generator_times(K)
        assert g.K == K and g.is_equally_spaced()
        assert np.allclose(g.times, -g.times[::-1])
        assert g.times[-1] == pytest.approx(math.pi * (1 - 1 / K))

    def test_bad_k(self):
        with pytest.raises(ValueError):
            generator_times(0)

    def test_k_and_2k_minus_1_grids_not_nested(self):
        small, big = generator_times(4).times, generator_times(7).times
        assert not all(np.isclose(big, t).any() for t in small)


class TestKernels:
    def test_k1(self, cube_setup):
        d, phi, _ = cube_setup
        k = build_kernels(phi, d, generator_times(1))
        assert k.S == pytest.approx(np.ones((1, 1)))
        assert k.H[0, 0] == pytest.approx(expect_diagonal(phi, d))

    def test_single_edge_k2(self):
        k = build_kernels(plus_state(2), cost_diagonal(EDGE), generator_times(2))
        assert k.S[0, 1] == pytest.approx(-0.5, abs=1e-12)

    @pytest.mark.parametrize("K", [1, 2, 5, 8, 16])
    def test_structure(self, cube_setup, K):
        d, phi, _ = cube_setup
        k = build_kernels(phi, d, generator_times(K))
        assert np.allclose(np.diag(k.S), 1, atol=1e-12)
        assert np.abs(k.S - k.S.conj().T).max() <= 1e-10
        assert np.abs(k.H - k.H.conj().T).max() <= 1e-10
        assert np.linalg.eigvalsh(k.S).min() >= -1e-10
        for m in range(-(K - 1), K):
            assert np.ptp(np.diagonal(k.S, m)) < 1e-12 and np.ptp(np.diagonal(k.H, m)) < 1e-12

    @pytest.mark.parametrize("K", [2, 3, 8, 12])
    def test_toeplitz_matches_full(self, cube_setup, K):
        d, phi, _ = cube_setup
        grid = generator_times(K)
        lag = build_kernels(phi, d, grid, use_toeplitz=True)
        full = build_kernels(phi, d, grid, use_toeplitz=False)
        assert np.abs(lag.S - full.S).max() <= 1e-12
        assert np.abs(lag.H - full.H).max() <= 1e-12

    def test_full_matches_statevector(self, single_edge):
        d = cost_diagonal(single_edge)
        phi = StateVector(2, np.array([0.1, 0.5j, 0.3, 0.8]) / np.linalg.norm([0.1, 0.5, 0.3, 0.8]))
        grid = TimeGrid(np.array([-1.0, 0.2, 0.9]))
        k = build_kernels(phi, d, grid)
        chis = [time_evolve(phi, d, t).amps for t in grid.times]
        for a in range(3):
            for b in range(3):
                assert k.S[a, b] == pytest.approx(np.vdot(chis[a], chis[b]))
                assert k.H[a, b] == pytest.approx(np.vdot(chis[a], d.values * chis[b]))

    def test_toeplitz_rejected_on_uneven_grid(self, single_edge):
        with pytest.raises(ValueError):
            build_kernels(plus_state(2), cost_diagonal(single_edge), TimeGrid(np.array([0, 1, 3.0])), use_toeplitz=True)

    def test_dimension_mismatch(self, single_edge):
        with pytest.raises(ValueError):
            build_kernels(plus_state(3), cost_diagonal(single_edge), generator_times(2))

    def test_sampled_structure_and_determinism(self, cube_setup):
        d, phi, _ = cube_setup
        m = ShotModel(10_000, 5, "sampled")
        a = build_kernels(phi, d, generator_times(6), m)
        b = build_kernels(phi, d, generator_times(6), m)
        assert np.array_equal(a.H, b.H) and np.array_equal(a.S, b.S)
        assert np.allclose(np.diag(a.S), 1)
        assert np.allclose(a.S, a.S.conj().T) and np.allclose(a.H, a.H.conj().T)
        exact = build_kernels(phi, d, generator_times(6))
        assert np.abs(a.S - exact.S).max() < 0.05
        assert not np.array_equal(a.S, exact.S)

    def test_sampled_full_grid(self, cube_setup):
        d, phi, _ = cube_setup
        grid = TimeGrid(np.array([-1.0, 0.3, 2.0]))
        k = build_kernels(phi, d, grid, ShotModel(100_000, 1, "sampled"))
        exact = build_kernels(phi, d, grid)
        assert np.allclose(np.diag(k.S), 1)
        assert np.abs(k.H - exact.H).max() < 0.2


class TestTruncated:
    def test_identity_overlap(self):
        k = Kernels(np.diag([2.0, -1.0, 0.5]).astype(complex), np.eye(3, dtype=complex), np.zeros(3))
        sol = solve_truncated(k)
        assert np.allclose(sol.energies, [-1, 0.5, 2])
        assert np.allclose(np.abs(sol.weights), np.eye(3)[:, [1, 2, 0]])

    def test_k1(self, cube_setup):
        d, phi, _ = cube_setup
        sol = solve_truncated(build_kernels(phi, d, generator_times(1)))
        assert sol.ground_energy == pytest.approx(expect_diagonal(phi, d))
        assert abs(sol.ground_weights[0]) == pytest.approx(1)

    @pytest.mark.parametrize("seed", range(5))
    def test_dense_generalised_oracle(self, seed):
        k = random_pair(6, seed)
        sol = solve_truncated(k, 1e-12)
        assert np.allclose(sol.energies, scipy.linalg.eigh(k.H, k.S, eigvals_only=True), atol=1e-9)

    def test_empty_subspace(self):
        k = Kernels(np.eye(2, dtype=complex), 1e-6 * np.eye(2, dtype=complex), np.zeros(2))
        with pytest.raises(EmptySubspaceError, match="empty subspace"):
            solve_truncated(k)

    def test_bad_threshold(self):
        with pytest.raises(ValueError):
            solve_truncated(random_pair(2, 0), 0.0)

    @pytest.mark.parametrize("K", [1, 2, 3, 4, 8, 16])
    def test_solution_invariants(self, cube_setup, K):
        d, phi, _ = cube_setup
        k = build_kernels(phi, d, generator_times(K))
        sol = solve_truncated(k)
        norms = np.einsum("ij,ik,kj->j", sol.weights.conj(), k.S, sol.weights).real
        assert np.allclose(norms, 1, atol=1e-8)
        assert projected_residuals(k, sol).max() <= 1e-7
        assert np.all(np.diff(sol.energies) >= 0)
        assert sol.ground_energy >= d.emin - 1e-9
        assert sol.ground_energy <= expect_diagonal(phi, d) + 1e-9

    @pytest.mark.parametrize("fixture", ["cube_setup", "k33p_setup"])
    def test_doubling_k_never_raises_energy(self, fixture, request):
        # the grids are not nested, so this is a regression check on the fixtures,
        # not a theorem; K -> 2K - 1 does raise the energy on k33p at K = 4
        d, phi, _ = request.getfixturevalue(fixture)
        energies = {K: solve_truncated(build_kernels(phi, d, generator_times(K))).ground_energy
                    for K in (1, 2, 4, 8, 16)}
        for K in (1, 2, 4, 8):
            assert energies[2 * K] <= energies[K] + 1e-9


class TestDeflation:
    def test_trivial(self):
        k = Kernels(np.diag([-2.0, -1.0]).astype(complex), np.eye(2, dtype=complex), np.zeros(2))
        sol = solve_deflation(k)
        assert sol.ground_energy == pytest.approx(-2, abs=1e-8)
        assert np.allclose(np.abs(sol.ground_weights), [1, 0], atol=1e-6)

    @pytest.mark.parametrize("K", [2, 3, 4])
    def test_matches_truncated(self, cube_setup, K):
        d, phi, _ = cube_setup
        k = build_kernels(phi, d, generator_times(K))
        assert solve_deflation(k).ground_energy == pytest.approx(solve_truncated(k).ground_energy, abs=1e-4)

    def test_orthogonality(self, cube_setup):
        d, phi, _ = cube_setup
        k = build_kernels(phi, d, generator_times(4))
        ev = np.linalg.eigvalsh(k.H)
        lam = 10 * (ev[-1] - ev[0])
        sol = solve_deflation(k, n_states=2, mu0=lam, lambdas=[lam])
        f0, f1 = sol.weights[:, 0], sol.weights[:, 1]
        assert abs(np.vdot(f0, k.S @ f1)) <= 1e-3
        assert sol.converged

    def test_default_mu0_positive(self, cube_setup):
        d, phi, _ = cube_setup
        assert default_mu0(build_kernels(phi, d, generator_times(1))) >= 10

    def test_bad_multipliers(self):
        k = random_pair(2, 1)
        with pytest.raises(ValueError):
            solve_deflation(k, mu0=-1)
        with pytest.raises(ValueError):
            solve_deflation(k, n_states=3, lambdas=[1.0])


class TestAssembly:
    def test_identity_weight(self, cube_setup):
        d, phi, _ = cube_setup
        s, norm2 = assemble_state(phi, d, [0.0], [1.0])
        assert np.allclose(s.amps, phi.amps) and norm2 == pytest.approx(1)

    def test_single_edge_k2_improves(self):
        d = cost_diagonal(EDGE)
        phi = plus_state(2)
        grid = generator_times(2)
        sol = solve_truncated(build_kernels(phi, d, grid))
        s, _ = assemble_state(phi, d, grid, sol.ground_weights)
        mis = [0b01, 0b10]
        assert s.probabilities[mis].sum() > phi.probabilities[mis].sum()

    @pytest.mark.parametrize("K", [2, 5, 8])
    def test_norm_and_energy(self, cube_setup, K):
        d, phi, _ = cube_setup
        grid = generator_times(K)
        k = build_kernels(phi, d, grid)
        sol = solve_truncated(k)
        s, norm2 = assemble_state(phi, d, grid, sol.ground_weights)
        assert s.norm() == pytest.approx(1, abs=1e-12)
        assert norm2 == pytest.approx(1, abs=1e-8)
        assert expect_diagonal(s, d) == pytest.approx(sol.ground_energy, abs=1e-8)

    def test_zero_vector(self, cube_setup):
        d, phi, _ = cube_setup
        with pytest.raises(ValueError):
            assemble_state(phi, d, [0.0, 0.0], [1.0, -1.0])


class TestMetrics:
    def test_exact_mis(self, cube_setup):
        d, _, o = cube_setup
        m = evaluate_metrics(basis_state(8, o.indices[0]), d, o)
        assert (m.approx_ratio, m.fidelity, m.hamming_error, m.parity_error) == (1, 1, 0, 0)
        assert m.mis_fidelity == 1

    def test_plus_on_cube(self, cube_setup):
        d, _, o = cube_setup
        assert evaluate_metrics(plus_state(8), d, o).fidelity == pytest.approx(2 / 256)

    def test_fidelity_counts_ties(self):
        d = cost_diagonal(EDGE)
        m = evaluate_metrics(basis_state(2, 0b11), d, brute_force_mis(EDGE))
        assert m.fidelity == 1 and m.mis_fidelity == 0
        assert m.hamming_error == 1 and m.parity_error == 2

    def test_positive_energy_clipped(self):
        g = Graph(3, ((0, 1), (1, 2), (0, 2)))
        d = cost_diagonal(g)
        # energy 0 at 111, ratio reported as 0
        assert evaluate_metrics(basis_state(3, 7), d, brute_force_mis(g)).approx_ratio == 0

    @pytest.mark.parametrize("fixture", ["cube_setup", "k33p_setup"])
    def test_k8_fidelity(self, fixture, request):
        d, phi, o = request.getfixturevalue(fixture)
        grid = generator_times(8)
        sol = solve_truncated(build_kernels(phi, d, grid))
        s, _ = assemble_state(phi, d, grid, sol.ground_weights)
        m8 = evaluate_metrics(s, d, o)
        m1 = evaluate_metrics(phi, d, o)
        assert m8.fidelity >= 0.98
        assert m8.hamming_error < m1.hamming_error

    @settings(max_examples=30)
    @given(st.integers(0, 10_000))
    def test_ranges(self, seed):
        g = Graph(4, ((0, 1), (1, 2), (2, 3)))
        d = cost_diagonal(g)
        rng = np.random.default_rng(seed)
        v = rng.normal(size=16) + 1j * rng.normal(size=16)
        m = evaluate_metrics(StateVector(4, v / np.linalg.norm(v)), d, brute_force_mis(g))
        assert 0 <= m.mis_fidelity <= m.fidelity <= 1
        assert m.approx_ratio <= 1 + 1e-12


class TestReencode:
    def test_unit_weight(self):
        assert reencode_probability([1, 0], np.eye(2)) == 1

    def test_half(self):
        assert reencode_probability([0.5, 0.5], np.eye(2)) == pytest.approx(0.5)

    @settings(max_examples=40)
    @given(st.integers(0, 10_000))
    def test_bounds(self, seed):
        k = random_pair(5, seed)
        dg = np.sqrt(np.real(np.diag(k.S)))
        S = k.S / np.outer(dg, dg)
        f = np.random.default_rng(seed).normal(size=5) + 1j
        assert 0 <= reencode_probability(f, S) <= 1 + 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            reencode_probability([0, 0], np.eye(2))
        with pytest.raises(ValueError):
            reencode_probability([1, 0], np.eye(3))


class TestFilters:
    def test_gaussian_k1(self):
        times, w = gaussian_filter_weights(1, 0.3)
        assert np.allclose(times, [0.3, -0.3]) and np.allclose(w, [0.5, 0.5])

    def test_gaussian_k2(self):
        times, w = gaussian_filter_weights(2, 0.3)
        assert np.allclose(times, [0.6, 0, -0.6]) and np.allclose(w, [0.25, 0.5, 0.25])

    @given(st.integers(1, 30), st.floats(1e-3, 2), st.floats(-5, 5))
    def test_gaussian_sum(self, K, t, shift):
        times, w = gaussian_filter_weights(K, t, shift)
        assert len(times) == K + 1
        assert np.abs(w).sum() == pytest.approx(1)
        assert w.sum() == pytest.approx(np.dot(np.exp(1j * shift * times), np.abs(w)))

    def test_gaussian_is_iterated_average(self, cube_setup):
        d, phi, _ = cube_setup
        t, K, shift = 0.23, 5, -4.0
        e = d.values - shift
        expected = np.cos(e * t) ** K * phi.amps
        times, w = gaussian_filter_weights(K, t, shift)
        assert np.abs(weighted_evolution(phi, d, times, w) - expected).max() <= 1e-12

    def test_filter_assemble_equivalence(self, cube_setup):
        d, phi, _ = cube_setup
        times, w = gaussian_filter_weights(6, 0.2, d.emin)
        explicit = sum(wk * time_evolve(phi, d, tk).amps for tk, wk in zip(times, w))
        s, norm2 = assemble_state(phi, d, times, w)
        assert np.abs(s.amps - explicit / np.sqrt(norm2)).max() <= 1e-12

    def test_ite_k2_binomial(self):
        times, w = ite_weights(2, 0.1)
        assert np.allclose(times, [0.2, 0, -0.2])
        assert np.allclose(w, [-0.5j, 1.0, 0.5j])

    @given(st.integers(1, 30), st.floats(1e-3, 2))
    def test_ite_sum(self, K, t):
        assert ite_weights(K, t)[1].sum() == pytest.approx(1)

    @pytest.mark.parametrize("eps", [-2.0, 0.5, 3.0])
    def test_ite_first_order(self, eps):
        # one step on an eigenstate of shifted energy eps: 1 - eps t + O(t^2)
        for t in (1e-2, 1e-3):
            times, w = ite_weights(1, t)
            factor = np.dot(w, np.exp(-1j * eps * times))
            assert abs(factor - (1 - eps * t)) <= eps * eps * t * t

    def test_ite_matches_product(self, cube_setup):
        d, phi, _ = cube_setup
        t, K, shift = 0.17, 4, -3.0
        e = d.values - shift
        step = ((1 + 1j) * np.exp(1j * e * t) + (1 - 1j) * np.exp(-1j * e * t)) / 2
        times, w = ite_weights(K, t, shift)
        assert np.abs(weighted_evolution(phi, d, times, w) - step**K * phi.amps).max() <= 1e-12

    @pytest.mark.parametrize("bad", [(0, 0.1), (2, 0.0)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            gaussian_filter_weights(*bad)
        with pytest.raises(ValueError):
            ite_weights(*bad)


class TestSuccessProbability:
    def test_eigenstate(self, cube):
        d = cost_diagonal(cube)
        x = ket_to_index("10100101")
        exact, approx = filter_success_probability(basis_state(8, x), d, 4, 0.3, d.values[x])
        assert exact == pytest.approx(1) and approx == pytest.approx(1)

    def test_small_t_limit(self, cube_setup):
        d, phi, _ = cube_setup
        exact, _ = filter_success_probability(phi, d, 1, 1e-6, 0.0)
        assert exact == pytest.approx(1, abs=1e-9)

    def test_single_edge_order(self):
        d = cost_diagonal(EDGE)
        phi = plus_state(2)
        errs = [abs(np.subtract(*filter_success_probability(phi, d, 4, t, -1.0))) for t in (0.1, 0.05)]
        assert 14 <= errs[0] / errs[1] <= 18

    def test_bounded(self, cube_setup):
        d, phi, _ = cube_setup
        for t in (0.05, 0.3, 1.0):
            exact, approx = filter_success_probability(phi, d, 3, t, d.emin)
            assert 0 <= exact <= 1 and 0 <= approx <= 1


class TestRte:
    def exact_h(self, phi, d, tl, tr):
        return np.vdot(time_evolve(phi, d, tl).amps, d.values * time_evolve(phi, d, tr).amps)

    def test_single_edge_p2_quarters(self):
        d = cost_diagonal(EDGE)
        phi = plus_state(2)
        st2 = stencil_coefficients(2)
        target = self.exact_h(phi, d, -0.4, 0.9)
        errs = []
        for t in (0.1, 0.05):
            _, h = rte_extract_kernels(rte_samples(phi, d, -0.4, 0.9, st2, t), st2, t)
            errs.append(abs(h - target))
        assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)

    @pytest.mark.parametrize("eps", [0.0, -1.0, -3.0])
    def test_single_eigenvalue_closed_form(self, eps):
        # a two-point derivative of exp(-i eps tau) gives sin(eps t)/t, exact when eps = 0
        st2 = stencil_coefficients(2)
        t = 0.1
        samples = np.exp(-1j * eps * np.array(st2.offsets) * t)
        s, h = rte_extract_kernels(samples, st2, t)
        assert h == pytest.approx(math.sin(eps * t) / t, abs=1e-14)
        assert s == pytest.approx(math.cos(eps * t), abs=1e-14)

    def test_p4_beats_p2_on_cube(self, cube_setup):
        d, phi, _ = cube_setup
        target = self.exact_h(phi, d, 0.0, 1.2)
        errs = {}
        for p in (2, 4):
            stn = stencil_coefficients(p)
            _, h = rte_extract_kernels(rte_samples(phi, d, 0.0, 1.2, stn, 0.05), stn, 0.05)
            errs[p] = abs(h - target)
        assert errs[4] < errs[2]

    def test_overlap_interpolation(self, cube_setup):
        d, phi, _ = cube_setup
        stn = stencil_coefficients(6)
        s, _ = rte_extract_kernels(rte_samples(phi, d, 0.3, -0.5, stn, 0.01), stn, 0.01)
        target = np.vdot(time_evolve(phi, d, 0.3).amps, time_evolve(phi, d, -0.5).amps)
        assert abs(s - target) < 1e-9

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rte_extract_kernels([1, 2, 3], stencil_coefficients(2), 0.1)
