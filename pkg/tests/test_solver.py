"""Tests for the slice program, its oracles and the multi-restart solver."""

from typing import List

import numpy as np
import pytest

from slicescope.coherence import SliceMask
from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import ConfigError
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph
from slicescope.logging_config import logger
from slicescope.solver import (
    QpProblem,
    SliceWeights,
    SolverConfig,
    SolverResult,
    extract_slice,
    objective_gradient,
    objective_value,
    separability_objective,
    solve,
)
from slicescope.solver import _frank_wolfe_step, _ProjectedGradient, _swap_refine
from slicescope.solver.oracles import (
    brute_force_oracle,
    find_separating_ordering,
    linear_maximization_oracle,
    project_capped_box,
)
from slicescope.solver.problem import raw_objective


def random_problem(rng: np.random.Generator, n: int, k: int, lam: float, alpha: float) -> QpProblem:
    graph = build_knn_graph(EmbeddingSet(rng.standard_normal((n, 2))), GraphBuildConfig(k=k))
    return QpProblem(rng.random(n), graph, lam, alpha)


def fixed_result(w: List[float]) -> SolverResult:
    return SolverResult(weights=SliceWeights(np.array(w)), objective=0.0, iterations=0, converged=True, restart_index=0)


class TestObjective:
    """Objective and gradient on the toy instance."""

    def test_toy_value(self, toy_problem: QpProblem) -> None:
        """Test indicator {0,1} gives 1.9 + 2."""
        assert objective_value(toy_problem, np.array([1.0, 1.0, 0.0, 0.0])) == pytest.approx(3.9)

    def test_zero_weights(self, toy_problem: QpProblem) -> None:
        """Test the origin."""
        assert objective_value(toy_problem, np.zeros(4)) == 0.0

    def test_linear_when_lambda_zero(self, toy_graph: KnnGraph) -> None:
        """Test λ = 0 reduces to l·w."""
        problem = QpProblem(np.array([1.0, 0.9, 0.8, 0.7]), toy_graph, lam=0.0, alpha=0.5)
        w = np.array([0.5, 0.25, 1.0, 0.0])
        assert objective_value(problem, w) == float(problem.losses @ w)

    def test_toy_gradient(self, toy_problem: QpProblem) -> None:
        """Test ∇ at indicator {0,1}."""
        gradient = objective_gradient(toy_problem, np.array([1.0, 1.0, 0.0, 0.0]))
        assert gradient.tolist() == pytest.approx([3.0, 2.9, 0.8, 0.7])

    def test_gradient_at_origin(self, toy_problem: QpProblem) -> None:
        """Test ∇ at zero equals the losses."""
        assert objective_gradient(toy_problem, np.zeros(4)).tolist() == toy_problem.losses.tolist()

    def test_infeasible_weights(self, toy_problem: QpProblem) -> None:
        """Test weights over budget are rejected."""
        with pytest.raises(ConfigError, match="infeasible"):
            objective_value(toy_problem, np.ones(4))

    def test_bad_parameters(self, toy_graph: KnnGraph) -> None:
        """Test negative λ and empty budgets."""
        with pytest.raises(ConfigError):
            QpProblem(np.ones(4), toy_graph, lam=-1.0, alpha=0.5)
        with pytest.raises(ConfigError):
            QpProblem(np.ones(4), toy_graph, lam=1.0, alpha=0.1)

    def test_separability_toy(self, toy_problem: QpProblem) -> None:
        """Test λ1 = λ2 = 0.5 on the toy instance gives 3.9 − 1."""
        w = np.array([1.0, 1.0, 0.0, 0.0])
        assert separability_objective(toy_problem, w, 0.5, 0.5) == pytest.approx(2.9)

    def test_separability_without_penalty(self, toy_problem: QpProblem) -> None:
        """Test λ2 = 0 reduces to the objective."""
        w = np.array([0.5, 0.5, 0.5, 0.5])
        assert separability_objective(toy_problem, w, 1.0, 0.0) == pytest.approx(objective_value(toy_problem, w))

    def test_separability_split_must_sum(self, toy_problem: QpProblem) -> None:
        """Test λ1 + λ2 must equal λ."""
        with pytest.raises(ConfigError):
            separability_objective(toy_problem, np.zeros(4), 0.5, 0.2)


class TestOracles:
    """Linear oracle, projection, enumeration and ordering search."""

    def test_lmo_integer_budget(self) -> None:
        """Test sort-and-fill with budget 2."""
        assert linear_maximization_oracle(np.array([3.0, 1.0, 2.0, -5.0]), 2).w.tolist() == [1, 0, 1, 0]

    def test_lmo_fractional_budget(self) -> None:
        """Test the remainder goes to the next positive coordinate."""
        assert linear_maximization_oracle(np.array([3.0, 1.0, 2.0, -5.0]), 2.5).w.tolist() == [1, 0.5, 1, 0]

    def test_lmo_negative_gradient(self) -> None:
        """Test an all-negative gradient selects nothing."""
        assert linear_maximization_oracle(-np.ones(5), 3).w.tolist() == [0.0] * 5

    def test_projection_is_feasible(self) -> None:
        """Test projected points respect box and budget."""
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.normal(0.5, 1.5, 20)
            w = project_capped_box(v, 4.0)
            assert SliceWeights(w).is_feasible(4.0)
            if np.clip(v, 0, 1).sum() > 4.0:
                assert w.sum() == pytest.approx(4.0, abs=1e-9)

    def test_brute_force_toy(self, toy_problem: QpProblem) -> None:
        """Test enumeration of the six pairs."""
        mask, value = brute_force_oracle(toy_problem)
        assert mask == SliceMask.from_indices([0, 1], 4)
        assert value == pytest.approx(3.9)

    def test_brute_force_large_lambda(self, toy_graph: KnnGraph) -> None:
        """Test λ = 1000 favors the densest pair, ties to the larger loss sum."""
        problem = QpProblem(np.array([1.0, 0.9, 0.8, 0.7]), toy_graph, lam=1e3, alpha=0.5)
        mask, _ = brute_force_oracle(problem)
        assert mask.indices().tolist() == [0, 1]

    def test_brute_force_full_budget(self, toy_graph: KnnGraph) -> None:
        """Test budget n selects everything."""
        problem = QpProblem(np.array([1.0, 0.9, 0.8, 0.7]), toy_graph, lam=1.0, alpha=1.0)
        mask, _ = brute_force_oracle(problem)
        assert mask.size == 4

    def test_brute_force_needs_integer_budget(self, toy_graph: KnnGraph) -> None:
        """Test fractional budgets cannot be enumerated."""
        with pytest.raises(ConfigError):
            brute_force_oracle(QpProblem(np.ones(4), toy_graph, lam=1.0, alpha=0.6))

    def test_separating_ordering_toy(self, toy_graph: KnnGraph) -> None:
        """Test an ordering avoiding the edges 0↔1 and 2↔3."""
        order = find_separating_ordering(toy_graph)
        assert order is not None
        assert sorted(order) == [0, 1, 2, 3]
        q = toy_graph.symmetric_adjacency.toarray()
        assert all(q[a, b] == 0 for a, b in zip(order, order[1:]))

    def test_separating_ordering_impossible(self) -> None:
        """Test a complete graph has no such ordering."""
        graph = build_knn_graph(EmbeddingSet(np.arange(5.0)[:, None]), GraphBuildConfig(k=4))
        assert find_separating_ordering(graph) is None


class TestSolve:
    """Multi-restart ascent."""

    @pytest.mark.parametrize("method", ["frank_wolfe", "projected_gradient"])
    def test_toy_solution(self, toy_problem: QpProblem, method: str) -> None:
        """Test both methods find {0,1} with objective 3.9."""
        result = solve(toy_problem, SolverConfig(method=method))
        assert extract_slice(result, toy_problem) == SliceMask.from_indices([0, 1], 4)
        assert result.objective == pytest.approx(3.9)

    def test_lambda_zero_is_loss_sort(self) -> None:
        """Test λ = 0 selects the top losses."""
        problem = random_problem(np.random.default_rng(3), 30, 3, 0.0, 0.2)
        result = solve(problem, SolverConfig())
        top = np.argsort(-problem.losses, kind="stable")[:6]
        assert extract_slice(result, problem).indices().tolist() == sorted(top.tolist())

    def test_budget_is_spent(self) -> None:
        """Test Σw equals a fractional budget."""
        problem = random_problem(np.random.default_rng(4), 25, 2, 1.0, 0.3)
        result = solve(problem, SolverConfig(method="projected_gradient"))
        assert result.weights.total == pytest.approx(problem.budget, abs=1e-6)
        assert result.weights.is_feasible(problem.budget)

    def test_deterministic(self) -> None:
        """Test a fixed seed reproduces the result bit for bit."""
        problem = random_problem(np.random.default_rng(5), 40, 3, 1.5, 0.25)
        a = solve(problem, SolverConfig(seed=11))
        b = solve(problem, SolverConfig(seed=11))
        assert np.array_equal(a.weights.w, b.weights.w)
        assert a.objective == b.objective
        assert a.restart_index == b.restart_index

    @pytest.mark.parametrize("method", ["frank_wolfe", "projected_gradient"])
    def test_iterates_ascend_and_stay_feasible(self, method: str) -> None:
        """Test every step is feasible and never lowers the objective."""
        rng = np.random.default_rng(6)
        problem = random_problem(rng, 30, 3, 2.0, 0.2)
        w = project_capped_box(rng.random(30), problem.budget)
        f = raw_objective(problem, w)
        stepper = _ProjectedGradient(problem) if method == "projected_gradient" else None
        for _ in range(50):
            if stepper is not None:
                w, stationary = stepper.step(w, f)
            else:
                w, stationary = _frank_wolfe_step(problem, w, f)
            assert SliceWeights(w).is_feasible(problem.budget)
            f_next = raw_objective(problem, w)
            assert f_next >= f - 1e-12
            f = f_next
            if stationary:
                break

    def test_fractional_point_beats_every_selection(self, toy_graph: KnnGraph) -> None:
        """Test equal losses on an adjacent pair favor splitting one unit of budget."""
        problem = QpProblem(np.full(4, 0.5), toy_graph, lam=1.0, alpha=0.25)
        assert find_separating_ordering(toy_graph) is not None
        _, oracle = brute_force_oracle(problem)
        result = solve(problem, SolverConfig())
        assert oracle == pytest.approx(0.5)
        assert result.objective == pytest.approx(1.0)
        assert result.vertex_objective == pytest.approx(oracle)
        assert extract_slice(result, problem).size == 1

    @pytest.mark.parametrize("method", ["frank_wolfe", "projected_gradient"])
    def test_best_selection_is_reported(self, method: str) -> None:
        """Test the best selection has ⌊budget⌋ members and never beats the objective."""
        problem = random_problem(np.random.default_rng(9), 40, 3, 2.0, 0.2)
        result = solve(problem, SolverConfig(method=method))
        assert result.vertex is not None
        assert int(result.vertex.sum()) == problem.slice_size
        assert result.vertex_objective == pytest.approx(
            objective_value(problem, result.vertex.astype(np.float64))
        )
        assert result.objective >= result.vertex_objective - 1e-12

    def test_swap_refine_reaches_swap_optimum(self) -> None:
        """Test no single exchange improves a refined selection."""
        rng = np.random.default_rng(10)
        for _ in range(30):
            n = int(rng.integers(10, 30))
            problem = random_problem(rng, n, int(rng.integers(1, 4)), float(rng.choice([0.5, 2.0])), 0.3)
            start = np.zeros(n, dtype=bool)
            start[rng.choice(n, size=problem.slice_size, replace=False)] = True
            member, _ = _swap_refine(problem, start, 10_000)
            assert int(member.sum()) == problem.slice_size
            value = raw_objective(problem, member.astype(np.float64))
            for i in np.flatnonzero(member):
                for j in np.flatnonzero(~member):
                    swapped = member.astype(np.float64)
                    swapped[i], swapped[j] = 0.0, 1.0
                    assert raw_objective(problem, swapped) <= value + 1e-9

    def test_extract_clear_weights(self, toy_problem: QpProblem) -> None:
        """Test binary weights map to their support."""
        assert extract_slice(fixed_result([1, 1, 0, 0]), toy_problem).indices().tolist() == [0, 1]

    def test_extract_loss_tie_break(self, toy_graph: KnnGraph) -> None:
        """Test equal weights fall back to larger loss."""
        problem = QpProblem(np.array([0.1, 0.9, 0.5, 0.0]), toy_graph, lam=1.0, alpha=0.5)
        assert extract_slice(fixed_result([0.5, 0.5, 0.5, 0.0]), problem).indices().tolist() == [1, 2]

    def test_extract_index_tie_break(self, toy_graph: KnnGraph) -> None:
        """Test equal weights and losses fall back to index."""
        problem = QpProblem(np.full(4, 0.3), toy_graph, lam=1.0, alpha=0.5)
        assert extract_slice(fixed_result([0.5] * 4), problem).indices().tolist() == [0, 1]


def test_gradient_matches_finite_differences() -> None:
    """Test central differences with h = 1e-5 on 100 random instances."""
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(100):
        n = int(rng.integers(5, 20))
        problem = random_problem(rng, n, int(rng.integers(1, 4)), float(rng.uniform(0, 3)), 0.5)
        w = rng.random(n)
        numeric = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            numeric[i] = (raw_objective(problem, w + e) - raw_objective(problem, w - e)) / (2 * h)
        assert np.max(np.abs(numeric - objective_gradient(problem, w))) < 1e-6


def test_separability_identity() -> None:
    """Test separability = objective − λ2·α·n·k on 1000 binding-budget points."""
    rng = np.random.default_rng(8)
    for _ in range(1000):
        n = int(rng.integers(4, 25))
        k = int(rng.integers(1, min(n, 6)))
        w = rng.random(n)
        w[int(rng.integers(n))] = 1.0
        lam = float(rng.uniform(0, 3))
        lambda_within = float(rng.uniform(0, lam))
        lambda_between = lam - lambda_within
        graph = build_knn_graph(EmbeddingSet(rng.standard_normal((n, 3))), GraphBuildConfig(k=k))
        problem = QpProblem(rng.random(n), graph, lam, float(w.sum()) / n)
        expected = objective_value(problem, w) - lambda_between * problem.alpha * n * k
        actual = separability_objective(problem, w, lambda_within, lambda_between)
        assert actual == pytest.approx(expected, rel=1e-9, abs=1e-12)


@pytest.mark.slow
def test_parity_with_brute_force() -> None:
    """Test solve never falls below enumeration and its best selection matches it."""
    rng = np.random.default_rng(2024)
    config = SolverConfig(restarts=16)
    trials = 200
    vertex_matches = 0
    for trial in range(trials):
        n = int(rng.integers(8, 19))
        k = int(rng.choice([1, 2, 3]))
        m = int(rng.integers(2, n // 2 + 1))
        lam = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        problem = random_problem(rng, n, k, lam, m / n)

        result = solve(problem, config)
        _, oracle = brute_force_oracle(problem)
        tol = 1e-6 * (1 + abs(oracle))
        assert result.objective >= oracle - tol, f"trial {trial}: {result.objective} < {oracle}"
        # every loss is positive almost surely, so the budget binds
        assert result.weights.total == pytest.approx(problem.budget, abs=1e-6)
        assert result.vertex_objective <= oracle + tol
        if abs(result.vertex_objective - oracle) <= tol:
            vertex_matches += 1
        else:
            logger.warning("Best selection below enumeration", extra={"trial": trial})

    assert vertex_matches >= 0.99 * trials
