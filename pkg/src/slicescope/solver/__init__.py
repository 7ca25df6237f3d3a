"""Multi-restart local ascent for the slice-discovery quadratic program."""

import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from slicescope.coherence import SliceMask
from slicescope.errors import SolverError
from slicescope.logging_config import log_solver_run
from slicescope.monitoring import solver_iterations, solver_runs
from slicescope.solver.oracles import linear_maximization_oracle, project_capped_box
from slicescope.solver.problem import (
    QpProblem,
    SliceWeights,
    objective_gradient,
    objective_value,
    raw_objective,
    separability_objective,
    whole_budget,
)
from slicescope.tasks import parallel_map

__all__ = [
    "QpProblem",
    "SliceWeights",
    "SolverConfig",
    "SolverResult",
    "extract_slice",
    "objective_gradient",
    "objective_value",
    "separability_objective",
    "solve",
]

Method = Literal["frank_wolfe", "projected_gradient"]

METHOD_ALIASES = {"fw": "frank_wolfe", "pg": "projected_gradient"}


class SolverConfig(BaseModel):
    """Solver settings."""

    method: Method = "frank_wolfe"
    restarts: int = Field(8, ge=1)
    max_iters: int = Field(500, ge=1)
    tol: float = Field(1e-7, gt=0)
    seed: int = 0
    polish: bool = True


@dataclass(frozen=True, eq=False)
class SolverResult:
    """Best run over all restarts.

    ``vertex`` is the best binary selection of ⌊budget⌋ samples seen by any
    restart. It can score below ``objective``, which may sit at a fractional point.
    """

    weights: SliceWeights
    objective: float
    iterations: int
    converged: bool
    restart_index: int
    vertex: Optional[np.ndarray] = None
    vertex_objective: float = math.nan

    def to_dict(self, problem: QpProblem) -> Dict[str, Any]:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_index": self.restart_index,
            "weights": self.weights.w.tolist(),
            "vertex_objective": self.vertex_objective,
            "vertex_indices": [] if self.vertex is None else np.flatnonzero(self.vertex).tolist(),
            "slice_indices": extract_slice(self, problem).indices().tolist(),
        }


def _check_finite(value: float) -> float:
    if not math.isfinite(value):
        raise SolverError(f"non-finite objective {value}")
    return value


def _greedy_vertex(problem: QpProblem) -> np.ndarray:
    order = np.lexsort((np.arange(problem.n), -problem.losses))
    w = np.zeros(problem.n)
    w[order[: problem.slice_size]] = 1.0
    return w


def _random_start(problem: QpProblem, rng: np.random.Generator) -> np.ndarray:
    return project_capped_box(rng.uniform(0.0, 1.0, problem.n), problem.budget)


def _frank_wolfe_step(problem: QpProblem, w: np.ndarray, f: float) -> Tuple[np.ndarray, bool]:
    """One conditional-gradient step with exact line search; flag is True at a stationary point."""
    g = objective_gradient(problem, w)
    direction = linear_maximization_oracle(g, problem.budget).w - w
    slope = float(g @ direction)
    if slope <= 1e-15 * max(1.0, abs(f)):
        return w, True
    # f(w + γd) = f(w) + γ·slope + γ²·curvature
    curvature = problem.lam * float(direction @ (problem.graph.adjacency @ direction))
    gamma = 1.0
    if curvature < 0:
        gamma = min(1.0, -slope / (2.0 * curvature))
    return np.clip(w + gamma * direction, 0.0, 1.0), False


class _ProjectedGradient:
    """Projected gradient ascent with step halving until ascent."""

    def __init__(self, problem: QpProblem):
        self.problem = problem
        sym = problem.graph.symmetric_adjacency
        bound = problem.lam * float(abs(sym).sum(axis=1).max()) if sym.nnz else 0.0
        self.eta = 1.0 / max(1.0, bound)

    def step(self, w: np.ndarray, f: float) -> Tuple[np.ndarray, bool]:
        problem = self.problem
        g = objective_gradient(problem, w)
        eta = self.eta
        while eta >= 1e-12:
            candidate = project_capped_box(w + eta * g, problem.budget)
            if raw_objective(problem, candidate) >= f:
                self.eta = min(eta * 2.0, 1e6)
                return candidate, bool(np.allclose(candidate, w, rtol=0.0, atol=1e-15))
            eta /= 2.0
        return w, True


def _complete_budget(problem: QpProblem, w: np.ndarray) -> np.ndarray:
    """Spend leftover budget by gradient order.

    With λ ≥ 0 and q ≥ 0 the objective is non-decreasing in every coordinate,
    so this never lowers it and leaves Σw = budget.
    """
    free = problem.budget - w.sum()
    if free <= 1e-12:
        return w
    w = w.copy()
    g = objective_gradient(problem, w)
    for i in np.lexsort((np.arange(problem.n), -g)):
        room = 1.0 - w[i]
        if room <= 0:
            continue
        add = min(room, free)
        w[i] += add
        free -= add
        if free <= 1e-15:
            break
    return w


def _swap_refine(problem: QpProblem, member: np.ndarray, max_swaps: int) -> Tuple[np.ndarray, int]:
    """Best-improvement 1-swaps on a binary selection.

    For a member i, some outsider among the ``degree + 1`` with the largest
    gain is not adjacent to i, so the best partner of every member lies in
    that short list.
    """
    sym = problem.graph.symmetric_adjacency
    losses, lam = problem.losses, problem.lam
    width = int(np.diff(sym.indptr).max(initial=0)) + 1
    member = member.copy()
    contact = sym @ member.astype(np.float64)
    swaps = 0
    while swaps < max_swaps:
        ins, outs = np.flatnonzero(member), np.flatnonzero(~member)
        if ins.size == 0 or outs.size == 0:
            break
        gain_in = losses[outs] + lam * contact[outs]
        top = np.lexsort((outs, -gain_in))[:width]
        candidates = outs[top]
        gain_out = losses[ins] + lam * contact[ins]
        delta = gain_in[top][None, :] - gain_out[:, None] - lam * sym[ins][:, candidates].toarray()
        best = int(np.argmax(delta))
        if delta.flat[best] <= 1e-12:
            break
        i, j = ins[best // candidates.size], candidates[best % candidates.size]
        member[i], member[j] = False, True
        contact += sym[j].toarray().ravel() - sym[i].toarray().ravel()
        swaps += 1
    return member, swaps


def _ascend(
    problem: QpProblem, w: np.ndarray, method: str, config: SolverConfig
) -> Tuple[np.ndarray, float, int, bool]:
    """Monotone ascent from ``w`` with one method until it stalls."""
    f = _check_finite(raw_objective(problem, w))
    pg = _ProjectedGradient(problem) if method == "projected_gradient" else None
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iters + 1):
        if pg is not None:
            w_next, stationary = pg.step(w, f)
        else:
            w_next, stationary = _frank_wolfe_step(problem, w, f)
        f_next = _check_finite(raw_objective(problem, w_next))
        improvement = f_next - f
        if f_next >= f:
            w, f = w_next, f_next
        if stationary or improvement <= config.tol * max(abs(f), 1e-12):
            converged = True
            break
    return w, f, iterations, converged


def _best_vertex(
    problem: QpProblem, w: np.ndarray, config: SolverConfig, rng: np.random.Generator
) -> Tuple[np.ndarray, float, int]:
    """Best binary selection of ⌊budget⌋ samples reachable from ``w``.

    Without polishing this is the top of ``w``. With polishing, both that
    rounding and a random selection are refined by 1-swaps.
    """
    m = problem.slice_size
    rounded = np.zeros(problem.n, dtype=bool)
    rounded[_selection_order(w, problem)[:m]] = True
    if not config.polish:
        return rounded, _check_finite(raw_objective(problem, rounded.astype(np.float64))), 0

    shuffled = np.zeros(problem.n, dtype=bool)
    shuffled[rng.choice(problem.n, size=m, replace=False)] = True
    best, best_value, swaps = rounded, -math.inf, 0
    for start in (rounded, shuffled):
        member, used = _swap_refine(problem, start, config.max_iters)
        swaps += used
        value = _check_finite(raw_objective(problem, member.astype(np.float64)))
        if value > best_value:
            best, best_value = member, value
    return best, best_value, swaps


def _run(problem: QpProblem, config: SolverConfig, restart: int) -> SolverResult:
    rng = np.random.default_rng([config.seed, restart])
    w = _greedy_vertex(problem) if restart == 0 else _random_start(problem, rng)
    other = "projected_gradient" if config.method == "frank_wolfe" else "frank_wolfe"

    w, f, iterations, converged = _ascend(problem, w, config.method, config)
    # the other method may still climb from this stationary point
    w, f, more, _ = _ascend(problem, w, other, config)
    iterations += more
    w = _complete_budget(problem, w)
    f = _check_finite(raw_objective(problem, w))

    vertex, f_vertex, swaps = _best_vertex(problem, w, config, rng)
    iterations += swaps
    if f_vertex >= f:
        start = _complete_budget(problem, vertex.astype(np.float64))
        w, _, more, _ = _ascend(problem, start, config.method, config)
        iterations += more
        w = _complete_budget(problem, w)
        f = _check_finite(raw_objective(problem, w))

    solver_runs.labels(method=config.method).inc()
    solver_iterations.observe(iterations)
    log_solver_run(config.method, restart, f, iterations, converged)
    return SolverResult(
        weights=SliceWeights(w),
        objective=f,
        iterations=iterations,
        converged=converged,
        restart_index=restart,
        vertex=vertex,
        vertex_objective=f_vertex,
    )


def solve(problem: QpProblem, config: SolverConfig) -> SolverResult:
    """Best of ``config.restarts`` local ascents.

    Restart 0 starts from the loss-greedy vertex, the others from seeded random
    feasible points. Each run ascends with the configured method, then hands
    off to the other one. The winner is the largest objective, ties to the
    lower restart index, so parallel and serial runs agree. The result also
    carries the best binary selection seen over all restarts.
    """
    runs: List[SolverResult] = parallel_map(lambda r: _run(problem, config, r), range(config.restarts))
    best = max(runs, key=lambda r: (r.objective, -r.restart_index))
    top_vertex = max(runs, key=lambda r: (r.vertex_objective, -r.restart_index))
    return replace(best, vertex=top_vertex.vertex, vertex_objective=top_vertex.vertex_objective)


def _selection_order(w: np.ndarray, problem: QpProblem) -> np.ndarray:
    # weights compared on a 1e-9 grid so float noise does not defeat the tie rules
    rounded = np.round(w, 9)
    return np.lexsort((np.arange(problem.n), -problem.losses, -rounded))


def extract_slice(result: SolverResult, problem: QpProblem) -> SliceMask:
    """The ⌊budget⌋ samples with largest weight; ties by larger loss, then smaller index."""
    order = _selection_order(result.weights.w, problem)
    return SliceMask.from_indices(order[: whole_budget(problem.budget)], problem.n)
