"""
Tests for local solvers, the copy layout and the distributed algorithms,
checked against the explicit Extended ADMM and the centralized minimizer
"""
import numpy as np
import pytest

from conftest import random_partial_instance, random_quadratics
from engine.algorithms import (
    compute_v_alg1,
    dual_update_alg1,
    node_v_alg2,
    run_algorithm1,
    run_algorithm2,
    run_algorithm3,
    run_consensus,
)
from engine.local import QuadraticLocalProblem, centralized_quadratic, local_solve
from engine.reference import extended_admm_reference
from engine.state import (
    CopyLayout,
    CopyState,
    DisconnectedComponentError,
    EngineConfig,
    EngineError,
    LocalSolverError,
    ReferenceUnsupportedError,
    free_positions,
)
from graph.coloring import greedy_color
from graph.components import ComponentMap, non_connected_components
from graph.network import Network
from graph.steiner import augment_components
from harness.metrics import relative_error


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


class TestLocalSolve:
    def test_quadratic_stationarity(self):
        rng = rng_for(0)
        M = rng.standard_normal((3, 3))
        E = M.T @ M + np.eye(3)
        w = rng.standard_normal(3)
        problem = QuadraticLocalProblem(0, (0, 1), [1, 2], E, w)
        v = {0: rng.standard_normal(1), 1: rng.standard_normal(2)}
        weights = {0: 2.0, 1: 0.5}
        x = problem.stack(problem.solve(v, weights))
        residual = 2 * E @ x + w + problem.stack(v) + np.array([2.0, 0.5, 0.5]) * x
        assert np.max(np.abs(residual)) < 1e-10

    def test_scalar_case(self):
        problem = QuadraticLocalProblem(0, (0,), [1], [[1.0]], [-2.0])
        assert problem.solve({0: np.zeros(1)}, {0: 0.0})[0] == pytest.approx([1.0])
        assert problem.value(np.array([1.0])) == pytest.approx(-1.0)

    def test_rejects_asymmetric_and_singular(self):
        with pytest.raises(EngineError, match="symmetric"):
            QuadraticLocalProblem(0, (0, 1), [1, 1], [[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])
        problem = QuadraticLocalProblem(3, (0,), [1], [[0.0]], [1.0])
        with pytest.raises(LocalSolverError, match="node 3"):
            problem.solve({0: np.zeros(1)}, {0: 0.0})

    def test_components_outside_the_domain_have_closed_form(self):
        problem = QuadraticLocalProblem(0, (1,), [1, 1], [[1.0]], [0.0])
        slots = {0: slice(0, 1), 1: slice(1, 2)}
        result = local_solve(problem, slots, np.array([3.0, 2.0]), np.array([2.0, 2.0]), node=0)
        np.testing.assert_allclose(result, [-1.5, -0.5])

        relay = local_solve(None, {2: slice(0, 2)}, np.array([4.0, -8.0]), np.array([4.0, 4.0]))
        np.testing.assert_allclose(relay, [-1.0, 2.0])
        with pytest.raises(LocalSolverError, match="component 3"):
            local_solve(None, {2: slice(0, 1), 3: slice(1, 2)}, np.array([4.0, 1.0]), np.array([4.0, 0.0]), node=5)

    def test_global_slots_are_solved_in_one_block(self):
        problem = QuadraticLocalProblem(0, (2,), [1, 1, 1, 1], [[1.0]], [0.0])
        slots = {l: slice(l, l + 1) for l in range(4)}
        free = free_positions(problem, slots)
        np.testing.assert_array_equal(free, [0, 1, 3])
        v = np.array([1.0, 2.0, 3.0, 4.0])
        result = local_solve(problem, slots, v, np.full(4, 2.0), free=free)
        # own component: (2 + 2) x = -3
        np.testing.assert_allclose(result, [-0.5, -1.0, -0.75, -2.0])

    def test_centralized_quadratic_gradient(self):
        net, cmap, problems = random_partial_instance(11, P=7, n_components=6)
        x = centralized_quadratic(problems, cmap.sizes)
        gradient = np.zeros(cmap.total_size)
        for problem in problems:
            if problem is None:
                continue
            idx = np.concatenate([cmap.offsets[l] + np.arange(cmap.sizes[l]) for l in problem.domain])
            gradient[idx] += 2 * problem.E @ x[idx] + problem.w
        assert np.max(np.abs(gradient)) < 1e-9


class TestLayout:
    def test_slots_degrees_and_payload(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0, 1], [0, 1], [1], []], sizes=[2, 1])
        layout = CopyLayout(path_network, cmap)
        assert layout.dims == [2, 3, 3, 1, 0]
        assert layout.slots[1] == {0: slice(0, 2), 1: slice(2, 3)}
        assert layout.degree[1] == {0: 2, 1: 1}
        assert layout.degree[2] == {0: 1, 1: 2}
        assert [link.neighbor for link in layout.links[2]] == [1, 3]
        assert layout.payload_per_cs == cmap.payload_per_cs() == 9

    def test_disconnected_component_is_refused(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [], [], [], [0]])
        with pytest.raises(DisconnectedComponentError) as info:
            CopyLayout(path_network, cmap)
        assert info.value.components == (0,)

    def test_problem_outside_domain_is_refused(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0], [], [], [1]])
        bad = QuadraticLocalProblem(0, (0, 1), [1, 1], np.eye(2), np.zeros(2))
        with pytest.raises(EngineError, match="outside"):
            CopyLayout(path_network, cmap, [bad, None, None, None, None])

    def test_copy_accessors(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0], [], [], [1]])
        state = CopyState(CopyLayout(path_network, cmap), rho=2.0)
        assert state.iteration == 1
        assert state.copy(1, 0).shape == (1,)
        with pytest.raises(EngineError, match="no copy"):
            state.copy(2, 0)


class TestExtendedAdmmEquivalence:
    @pytest.mark.parametrize("seed", range(6))
    def test_copies_and_condensed_duals_match(self, seed):
        net, cmap, problems = random_partial_instance(seed, P=int(rng_for(seed).integers(4, 9)))
        coloring = greedy_color(net)
        config = EngineConfig(rho=1.3, max_cs=50, tolerance=0.0)

        copies, duals = [], []

        def record(state, cs):
            copies.append(state.flat().copy())
            duals.append([g.copy() for g in state.gamma])

        trace, state = run_algorithm1(net, coloring, cmap, problems, config, on_iteration=record)
        assert trace.cs_count == 50

        reference = extended_admm_reference(net, coloring, cmap, problems, config, iterations=50)
        layout = reference.layout
        for k in range(1, 51):
            np.testing.assert_allclose(copies[k - 1], reference.copies[k - 1], atol=1e-9, rtol=0)
            for p in range(net.node_count):
                for l, s in layout.slots[p].items():
                    np.testing.assert_allclose(duals[k - 1][p][s], reference.condensed_dual(k, p, l), atol=1e-9, rtol=0)

    def test_edge_duals_are_antisymmetric(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0], [0], [], []])
        problems = random_quadratics(rng_for(3), cmap)
        coloring = greedy_color(path_network)
        reference = extended_admm_reference(path_network, coloring, cmap, problems, EngineConfig(rho=1.0), iterations=3)
        assert [row[:3] for row in reference.rows] == [(0, 0, 1), (0, 1, 2)]
        np.testing.assert_allclose(reference.edge_dual(3, 0, 0, 1), -reference.edge_dual(3, 0, 1, 0))
        np.testing.assert_allclose(
            reference.condensed_dual(3, 1, 0), reference.edge_dual(3, 0, 1, 2) + reference.edge_dual(3, 0, 1, 0)
        )
        with pytest.raises(EngineError):
            reference.edge_dual(3, 0, 0, 2)

    @pytest.mark.parametrize("seed", range(100))
    def test_color_blocks_have_diagonal_gram(self, seed):
        net, cmap, problems = random_partial_instance(500 + seed, P=6, n_components=4)
        coloring = greedy_color(net)
        reference = extended_admm_reference(net, coloring, cmap, problems, EngineConfig(rho=1.0), iterations=1)
        for gram in reference.gram_blocks().values():
            off_diagonal = gram - np.diag(np.diag(gram))
            assert not off_diagonal.any()
            assert np.all(np.diag(gram) > 0)

    def test_reference_needs_quadratics(self, path_network):
        class Opaque:
            node, domain = 0, (0,)

            def solve(self, v, weights, x0=None):
                return {0: np.zeros(1)}

        cmap = ComponentMap.from_domains(5, [[0], [0], [], [], [1]])
        with pytest.raises(ReferenceUnsupportedError):
            extended_admm_reference(
                path_network, greedy_color(path_network), cmap, [Opaque(), None, None, None, None],
                EngineConfig(rho=1.0), iterations=1,
            )

    def test_reference_size_guard(self, partial_instance):
        net, cmap, problems = partial_instance(4)
        with pytest.raises(ReferenceUnsupportedError):
            extended_admm_reference(net, greedy_color(net), cmap, problems, EngineConfig(rho=1.0), max_scalars=1)


class TestStepFormulas:
    def test_v_and_dual_update_on_a_path(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0], [0], [], []])
        coloring = greedy_color(path_network)
        state = CopyState(CopyLayout(path_network, cmap), rho=2.0)
        state.x = [np.array([1.0]), np.array([2.0]), np.array([4.0]), np.zeros(0), np.zeros(0)]
        state.x_prev = [np.array([10.0]), np.array([20.0]), np.array([40.0]), np.zeros(0), np.zeros(0)]
        state.gamma = [np.array([0.5]), np.array([0.25]), np.array([0.0]), np.zeros(0), np.zeros(0)]

        # node 1 (color 1) sees fresh copies of nodes 0 and 2 (color 0)
        assert compute_v_alg1(state, 1, 0, coloring) == pytest.approx([0.25 - 2.0 * (1.0 + 4.0)])
        # node 0 (color 0) sees the stale copy of node 1
        assert compute_v_alg1(state, 0, 0, coloring) == pytest.approx([0.5 - 2.0 * 20.0])
        assert dual_update_alg1(state, 1, 0) == pytest.approx([0.25 + 2.0 * ((2.0 - 1.0) + (2.0 - 4.0))])
        assert state.gamma[1] == pytest.approx([0.25])


class TestConvergence:
    def test_bipartite_instance_reaches_1e_8(self):
        net = Network.from_edges(10, [(p, (p + 1) % 10) for p in range(10)])
        coloring = greedy_color(net)
        assert coloring.num_colors == 2
        rng = rng_for(42)
        domains = [[p, (p + 1) % 10] for p in range(10)]
        cmap = ComponentMap.from_domains(10, domains)
        problems = random_quadratics(rng, cmap, strength=1.0)
        reference = centralized_quadratic(problems, cmap.sizes)

        config = EngineConfig(rho=1.0, max_cs=2000, tolerance=0.0, target_error=1e-8)
        trace, state = run_algorithm1(net, coloring, cmap, problems, config, reference)
        assert trace.status == "converged"
        assert trace.final_error < 1e-8
        assert relative_error(state, reference) < 1e-8

    def test_algorithm2_converges(self, partial_instance):
        net, cmap, problems = partial_instance(21, P=7)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=3000, tolerance=0.0, target_error=1e-6)
        trace, _ = run_algorithm2(net, cmap, problems, config, reference)
        assert trace.status == "converged"
        assert trace.records[-1].payload_cumulative == trace.cs_count * cmap.payload_per_cs()

    def test_global_mode_costs_more_per_step(self, partial_instance):
        net, cmap, problems = partial_instance(22, P=7)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=3000, tolerance=0.0, target_error=1e-6)
        coloring = greedy_color(net)
        partial, _ = run_algorithm1(net, coloring, cmap, problems, config, reference)
        full, _ = run_algorithm1(net, coloring, cmap.global_mode(), problems, config, reference, name="dadmm")
        assert partial.status == full.status == "converged"
        assert full.records[0].payload == 7 * cmap.total_size
        assert full.records[0].payload > partial.records[0].payload

    def test_thread_pool_gives_identical_iterates(self, partial_instance):
        net, cmap, problems = partial_instance(23, P=8)
        coloring = greedy_color(net)
        _, s1 = run_algorithm1(net, coloring, cmap, problems, EngineConfig(rho=1.0, max_cs=30, tolerance=0.0))
        _, s2 = run_algorithm1(
            net, coloring, cmap, problems, EngineConfig(rho=1.0, max_cs=30, tolerance=0.0, workers=4)
        )
        np.testing.assert_array_equal(s1.flat(), s2.flat())

    def test_divergence_is_reported(self, partial_instance):
        net, cmap, problems = partial_instance(24, P=6)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=100, tolerance=0.0, divergence_limit=1e-30)
        trace, _ = run_algorithm1(net, greedy_color(net), cmap, problems, config, reference)
        assert trace.status == "diverged"
        assert trace.cs_count == 1


def draw_non_connected(seed):
    for attempt in range(100):
        net, cmap, problems = random_partial_instance(seed * 100 + attempt, P=8, n_components=6, connected=False)
        if non_connected_components(net, cmap):
            return net, cmap, problems
    raise AssertionError("no non-connected instance drawn")


class TestNonConnected:
    def make(self, seed):
        return draw_non_connected(seed)

    def test_algorithm1_refuses(self):
        net, cmap, problems = self.make(1)
        with pytest.raises(DisconnectedComponentError):
            run_algorithm1(net, greedy_color(net), cmap, problems, EngineConfig(rho=1.0))

    @pytest.mark.parametrize("seed", range(3))
    def test_algorithm3_reaches_the_minimizer(self, seed):
        net, cmap, problems = self.make(seed)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=5000, tolerance=0.0, target_error=1e-8)
        trace, state = run_algorithm3(net, greedy_color(net), cmap, problems, config, reference)
        assert trace.status == "converged"
        assert state.layout.cmap.is_augmented
        # Steiner copies are not part of the error
        assert state.original_copies().size == sum(
            cmap.sizes[l] for p in range(net.node_count) for l in cmap.node_domains[p]
        )

    def test_augmented_algorithm2_reaches_the_minimizer(self):
        net, cmap, problems = self.make(5)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=8000, tolerance=0.0, target_error=1e-6)
        trace, _ = run_algorithm2(net, cmap, problems, config, reference, augment=True)
        assert trace.status == "converged"

    def test_algorithm3_matches_explicit_reference(self):
        net, cmap, problems = self.make(7)
        coloring = greedy_color(net)
        config = EngineConfig(rho=0.7, max_cs=20, tolerance=0.0)
        copies = []
        run_algorithm3(net, coloring, cmap, problems, config, on_iteration=lambda s, k: copies.append(s.flat().copy()))

        augmented = augment_components(net, cmap)
        reference = extended_admm_reference(net, coloring, augmented, problems, config, iterations=20)
        for k in range(20):
            np.testing.assert_allclose(copies[k], reference.copies[k], atol=1e-9, rtol=0)


def three_node_path():
    """0 - 1 - 2 sharing one scalar, f_p = e_p x^2 + w_p x"""
    net = Network.from_edges(3, [(0, 1), (1, 2)])
    cmap = ComponentMap.from_domains(3, [[0], [0], [0]])
    problems = [
        QuadraticLocalProblem(p, (0,), [1], [[e]], [w])
        for p, (e, w) in enumerate([(1.0, 1.0), (2.0, -2.0), (0.5, 3.0)])
    ]
    return net, cmap, problems


class TestAlgorithm2Steps:
    def test_first_iteration_by_hand(self):
        net, cmap, problems = three_node_path()
        _, state = run_algorithm2(net, cmap, problems, EngineConfig(rho=1.0, max_cs=1, tolerance=0.0))
        # x_p = -w_p / (2 e_p + rho D_p) from v = 0
        x = [-1.0 / 3.0, 1.0 / 3.0, -1.5]
        np.testing.assert_allclose(np.concatenate(state.x), x)
        # gamma_p = rho / 2 * sum_j (x_p - x_j)
        gamma = [0.5 * (x[0] - x[1]), 0.5 * ((x[1] - x[0]) + (x[1] - x[2])), 0.5 * (x[2] - x[1])]
        np.testing.assert_allclose(np.concatenate(state.gamma), gamma)

        state.snapshot()
        assert node_v_alg2(state, 1) == pytest.approx([gamma[1] - 0.5 * (2 * x[1] + x[0] + x[2])])
        assert node_v_alg2(state, 1) == pytest.approx([11.0 / 6.0])
        assert node_v_alg2(state, 0) == pytest.approx([-1.0 / 3.0])

    def test_fixed_point(self):
        net, cmap, problems = three_node_path()
        reference = centralized_quadratic(problems, cmap.sizes)
        assert reference == pytest.approx([-2.0 / 7.0])
        config = EngineConfig(rho=1.0, max_cs=5000, tolerance=0.0, target_error=1e-11)
        trace, state = run_algorithm2(net, cmap, problems, config, reference)
        assert trace.status == "converged"

        state.snapshot()
        for p, problem in enumerate(problems):
            x_p = state.x[p]
            gradient = 2 * problem.E @ x_p + problem.w
            # stationarity of f_p closes with the dual
            np.testing.assert_allclose(gradient + state.gamma[p], 0.0, atol=1e-8)
            expected = state.gamma[p] - state.rho * state.layout.degree[p][0] * x_p
            np.testing.assert_allclose(node_v_alg2(state, p), expected, atol=1e-8)


class TestDualConservation:
    @pytest.mark.parametrize("kind", ["alg1", "alg2", "alg3", "consensus"])
    def test_duals_sum_to_zero_per_component(self, kind, partial_instance):
        if kind == "alg3":
            net, cmap, problems = draw_non_connected(4)
        else:
            net, cmap, problems = partial_instance(41, P=7)
        sums = []

        def check(state, cs):
            layout_cmap = state.layout.cmap
            sums.append(max(float(np.max(np.abs(state.dual_sum(l)))) for l in range(layout_cmap.n_components)))

        config = EngineConfig(rho=1.3, max_cs=40, tolerance=0.0)
        if kind == "alg1":
            run_algorithm1(net, greedy_color(net), cmap, problems, config, on_iteration=check)
        elif kind == "alg2":
            run_algorithm2(net, cmap, problems, config, on_iteration=check)
        elif kind == "alg3":
            run_algorithm3(net, greedy_color(net), cmap, problems, config, on_iteration=check)
        else:
            run_consensus(net, cmap, problems, config, on_iteration=check)
        assert len(sums) == 40
        assert max(sums) < 1e-9


class TestConsensus:
    def test_first_step_by_hand(self):
        net, cmap, problems = three_node_path()
        _, state = run_consensus(net, cmap, problems, EngineConfig(rho=1.0, max_cs=1, tolerance=0.0))
        # x_p = -w_p / (2 e_p + rho) against z = 0, then z is their average
        x = np.array([-1.0 / 3.0, 2.0 / 5.0, -1.5])
        np.testing.assert_allclose(np.concatenate(state.x), x)
        np.testing.assert_allclose(np.concatenate(state.gamma), x - x.mean())

    def test_reaches_the_minimizer(self, partial_instance):
        net, cmap, problems = partial_instance(31, P=7)
        reference = centralized_quadratic(problems, cmap.sizes)
        config = EngineConfig(rho=1.0, max_cs=5000, tolerance=0.0, target_error=1e-8)
        trace, _ = run_consensus(net, cmap, problems, config, reference)
        assert trace.status == "converged"
        assert trace.records[0].payload == cmap.payload_per_cs()

    def test_refuses_components_without_a_hub(self, path_network):
        cmap = ComponentMap.from_domains(5, [[0], [0], [0], [0], []])
        problems = random_quadratics(rng_for(3), cmap)
        with pytest.raises(EngineError, match="star-shaped"):
            run_consensus(path_network, cmap, problems, EngineConfig(rho=1.0))

    def test_refuses_steiner_trees(self):
        net, cmap, problems = draw_non_connected(6)
        with pytest.raises(EngineError, match="Steiner"):
            run_consensus(net, augment_components(net, cmap), problems, EngineConfig(rho=1.0))
