"""Subproblem oracles and exact references for the slice program."""

import itertools
import math
from typing import Iterator, List, Optional, Tuple

import numpy as np

from slicescope.coherence import SliceMask
from slicescope.errors import ConfigError
from slicescope.knn_graph import KnnGraph
from slicescope.solver.problem import FEASIBILITY_TOL, QpProblem, SliceWeights, whole_budget

MAX_ORACLE_N = 24


def linear_maximization_oracle(gradient: np.ndarray, budget: float) -> SliceWeights:
    """Maximize g·w over {0 ≤ w ≤ 1, Σw ≤ budget}.

    Coordinates are ranked by gradient (descending, ties by index); the top
    ⌊budget⌋ positive ones get 1 and the next positive one the fractional rest.
    """
    g = np.asarray(gradient, dtype=np.float64)
    n = g.shape[0]
    if budget > n + FEASIBILITY_TOL:
        raise ConfigError(f"budget {budget} exceeds dimension {n}")
    order = np.lexsort((np.arange(n), -g))
    positive = order[g[order] > 0]
    full = min(whole_budget(budget), n)
    w = np.zeros(n)
    w[positive[:full]] = 1.0
    rest = budget - full
    if rest > FEASIBILITY_TOL and positive.shape[0] > full:
        w[positive[full]] = rest
    return SliceWeights(w)


def project_capped_box(v: np.ndarray, budget: float, tol: float = 1e-10) -> np.ndarray:
    """Euclidean projection onto {0 ≤ w ≤ 1, Σw ≤ budget}.

    Clip first; when the sum constraint binds, bisect on a shift τ so that
    Σ clip(v − τ, 0, 1) = budget.
    """
    w = np.clip(v, 0.0, 1.0)
    if w.sum() <= budget:
        return w
    lo, hi = 0.0, float(np.max(v))
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        total = np.clip(v - tau, 0.0, 1.0).sum()
        if abs(total - budget) <= tol:
            return np.clip(v - tau, 0.0, 1.0)
        if total > budget:
            lo = tau
        else:
            hi = tau
    return np.clip(v - hi, 0.0, 1.0)


def _combinations(n: int, m: int, batch: int) -> Iterator[np.ndarray]:
    it = itertools.combinations(range(n), m)
    while True:
        chunk = list(itertools.islice(it, batch))
        if not chunk:
            return
        yield np.asarray(chunk, dtype=np.int64)


def brute_force_oracle(problem: QpProblem, batch: int = 4096) -> Tuple[SliceMask, float]:
    """Exact maximum over binary w with exactly ``budget`` ones.

    Ties go to the larger loss sum, then to the lexicographically first subset.
    """
    n = problem.n
    if n > MAX_ORACLE_N:
        raise ConfigError(f"instance too large for enumeration: n={n} > {MAX_ORACLE_N}")
    m = int(round(problem.budget))
    if abs(problem.budget - m) > FEASIBILITY_TOL:
        raise ConfigError(f"enumeration needs an integer budget, got {problem.budget}")

    q = problem.graph.adjacency.toarray()
    best_value = -math.inf
    best_loss = -math.inf
    best_subset: Optional[np.ndarray] = None
    for subsets in _combinations(n, m, batch):
        loss_sums = problem.losses[subsets].sum(axis=1)
        internal = q[subsets[:, :, None], subsets[:, None, :]].sum(axis=(1, 2))
        values = loss_sums + problem.lam * internal
        top = values.max()
        candidates = np.flatnonzero(values >= top - 1e-12)
        pick = candidates[np.argmax(loss_sums[candidates])]
        value, loss_sum = float(values[pick]), float(loss_sums[pick])
        if value > best_value + 1e-12 or (abs(value - best_value) <= 1e-12 and loss_sum > best_loss + 1e-12):
            best_value, best_loss, best_subset = value, loss_sum, subsets[pick]
    assert best_subset is not None
    return SliceMask.from_indices(best_subset, n), best_value


def find_separating_ordering(graph: KnnGraph, max_steps: int = 200_000) -> Optional[List[int]]:
    """An ordering r with q between consecutive r's zero in both directions.

    This is a Hamiltonian path in the complement of the undirected graph,
    searched by depth-first search that prefers the most constrained next node.
    Returns ``None`` when none is found within ``max_steps`` expansions.
    """
    n = graph.n
    adjacent = graph.symmetric_adjacency.toarray() > 0
    free = ~adjacent
    np.fill_diagonal(free, False)
    steps = 0

    def extend(path: List[int], used: np.ndarray) -> bool:
        nonlocal steps
        if len(path) == n:
            return True
        steps += 1
        if steps > max_steps:
            return False
        options = np.flatnonzero(free[path[-1]] & ~used)
        # fewest onward options first
        onward = (free[options] & ~used).sum(axis=1)
        for node in options[np.argsort(onward, kind="stable")]:
            used[node] = True
            path.append(int(node))
            if extend(path, used):
                return True
            path.pop()
            used[node] = False
        return False

    for start in range(n):
        used = np.zeros(n, dtype=bool)
        used[start] = True
        path = [start]
        if extend(path, used):
            return path
        if steps > max_steps:
            break
    return None
