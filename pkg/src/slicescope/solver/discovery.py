"""End-to-end discovery: graph, program, extraction, repeated on the remaining rows."""

from dataclasses import dataclass
from typing import Dict, List, Literal, Optional

import numpy as np

from slicescope.coherence import SliceMask
from slicescope.config import defaults
from slicescope.dataset_io import DatasetBundle
from slicescope.errors import ConfigError, InputError
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph
from slicescope.logging_config import log_discovery_round
from slicescope.monitoring import slices_discovered
from slicescope.solver import SolverConfig, SolverResult, extract_slice, solve
from slicescope.solver.problem import FEASIBILITY_TOL, QpProblem, whole_budget

BudgetMode = Literal["fixed", "proportional"]


def default_alpha(n: int) -> float:
    """Slice proportion: 0.05 below 5,000 rows, 0.01 otherwise."""
    mcsd = defaults("mcsd")
    threshold = int(mcsd.get("small_dataset_rows", 5000))
    if n < threshold:
        return float(mcsd.get("alpha_small", 0.05))
    return float(mcsd.get("alpha_large", 0.01))


@dataclass(frozen=True, eq=False)
class DiscoveryRound:
    """One discovered slice with the program that produced it."""

    mask: SliceMask
    result: SolverResult
    problem: QpProblem
    graph: KnnGraph
    rows: np.ndarray


def discover_rounds(
    bundle: DatasetBundle,
    graph_config: GraphBuildConfig,
    alpha: float,
    lam: float,
    config: SolverConfig,
    count: int = 1,
    budget_mode: BudgetMode = "fixed",
) -> List[DiscoveryRound]:
    """Discover ``count`` disjoint slices, removing each one and rebuilding the graph.

    In ``fixed`` mode every round selects the first round's ⌊α·n⌋ samples; in
    ``proportional`` mode α applies to the rows that remain.
    """
    if count < 1:
        raise ConfigError(f"slice count must be at least 1, got {count}")
    n = bundle.n
    target = alpha * n
    remaining = np.arange(n)
    rounds: List[DiscoveryRound] = []
    for round_index in range(count):
        n_left = remaining.shape[0]
        round_alpha = alpha if budget_mode == "proportional" else target / max(n_left, 1)
        if n_left == 0 or round_alpha > 1 + FEASIBILITY_TOL or whole_budget(round_alpha * n_left) < 1:
            raise ConfigError(
                f"insufficient remaining samples for slice {round_index + 1}: {n_left} rows left"
            )
        round_alpha = min(round_alpha, 1.0)
        part = bundle.subset(remaining)
        graph = build_knn_graph(part.embeddings, graph_config)
        problem = QpProblem(part.losses.values, graph, lam, round_alpha)
        result = solve(problem, config)
        local = extract_slice(result, problem)
        chosen = remaining[local.member]
        rounds.append(
            DiscoveryRound(
                mask=SliceMask.from_indices(chosen, n),
                result=result,
                problem=problem,
                graph=graph,
                rows=remaining,
            )
        )
        slices_discovered.inc()
        log_discovery_round(round_index, n_left, int(chosen.shape[0]), result.objective)
        remaining = remaining[~local.member]
    return rounds


def discover_slices(
    bundle: DatasetBundle,
    graph_config: GraphBuildConfig,
    alpha: float,
    lam: float,
    config: SolverConfig,
    count: int = 1,
    budget_mode: BudgetMode = "fixed",
) -> List[SliceMask]:
    """Pairwise-disjoint slice masks over the bundle's original indices."""
    rounds = discover_rounds(bundle, graph_config, alpha, lam, config, count, budget_mode)
    return [r.mask for r in rounds]


def discover_per_category(
    bundle: DatasetBundle,
    categories: np.ndarray,
    graph_config: GraphBuildConfig,
    alpha: Optional[float],
    lam: float,
    config: SolverConfig,
) -> Dict[str, SliceMask]:
    """One slice per class category, each discovered on that category's rows only."""
    labels = np.asarray(categories).astype(str)
    if labels.shape[0] != bundle.n:
        raise InputError(f"{labels.shape[0]} category labels for {bundle.n} samples")
    slices: Dict[str, SliceMask] = {}
    for value in np.unique(labels):
        rows = np.flatnonzero(labels == value)
        part = bundle.subset(rows)
        part_alpha = alpha if alpha is not None else default_alpha(part.n)
        (local,) = discover_slices(part, graph_config, part_alpha, lam, config, count=1)
        slices[str(value)] = SliceMask.from_indices(rows[local.member], bundle.n)
    return slices
