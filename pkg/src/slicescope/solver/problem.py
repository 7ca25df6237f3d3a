"""The slice-discovery quadratic program and its objective.

maximize   l·w + λ Σ_ij w_i w_j q_ij
subject to Σ w_i ≤ αn,  0 ≤ w_i ≤ 1
"""

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from slicescope.dataset_io import LossVector
from slicescope.errors import ConfigError, InputError
from slicescope.knn_graph import KnnGraph

FEASIBILITY_TOL = 1e-9


def whole_budget(budget: float) -> int:
    """Number of samples a budget selects, robust to float fuzz in α·n."""
    return int(math.floor(budget + FEASIBILITY_TOL))


@dataclass(frozen=True, eq=False)
class QpProblem:
    """One instance of the program over a fixed graph."""

    losses: np.ndarray
    graph: KnnGraph
    lam: float
    alpha: float

    def __post_init__(self) -> None:
        losses = LossVector(getattr(self.losses, "values", self.losses)).values
        if losses.shape[0] != self.graph.n:
            raise InputError(f"{losses.shape[0]} losses for a graph of {self.graph.n} nodes")
        if not math.isfinite(self.lam) or self.lam < 0:
            raise ConfigError(f"lambda must be finite and nonnegative, got {self.lam}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.alpha * self.graph.n < 1 - FEASIBILITY_TOL:
            raise ConfigError(
                f"budget alpha*n = {self.alpha * self.graph.n:.4g} is below one sample"
            )
        object.__setattr__(self, "losses", losses)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def budget(self) -> float:
        return self.alpha * self.graph.n

    @property
    def slice_size(self) -> int:
        return whole_budget(self.budget)


@dataclass(frozen=True, eq=False)
class SliceWeights:
    """Continuous sample weights w ∈ [0, 1]^n."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def total(self) -> float:
        return float(self.w.sum())

    def is_feasible(self, budget: float, tol: float = FEASIBILITY_TOL) -> bool:
        w = self.w
        return bool(
            np.all(np.isfinite(w))
            and w.min(initial=0.0) >= -tol
            and w.max(initial=0.0) <= 1 + tol
            and w.sum() <= budget + tol
        )


WeightsLike = Union[SliceWeights, np.ndarray]


def as_array(w: WeightsLike) -> np.ndarray:
    return w.w if isinstance(w, SliceWeights) else np.asarray(w, dtype=np.float64)


def quadratic_term(problem: QpProblem, w: np.ndarray) -> float:
    """Σ_ij w_i w_j q_ij over the directed edge list."""
    return float(w @ (problem.graph.adjacency @ w))


def raw_objective(problem: QpProblem, w: np.ndarray) -> float:
    """Objective without feasibility checks (solver inner loop)."""
    return float(problem.losses @ w) + problem.lam * quadratic_term(problem, w)


def objective_value(problem: QpProblem, w: WeightsLike) -> float:
    """Evaluate the program's objective at a feasible point."""
    weights = SliceWeights(as_array(w))
    if weights.w.shape[0] != problem.n:
        raise InputError(f"weights have length {weights.w.shape[0]}, expected {problem.n}")
    if not weights.is_feasible(problem.budget):
        raise ConfigError(
            f"infeasible weights: sum={weights.total:.6g} budget={problem.budget:.6g}, "
            f"range=[{weights.w.min():.3g}, {weights.w.max():.3g}]"
        )
    return raw_objective(problem, weights.w)


def objective_gradient(problem: QpProblem, w: WeightsLike) -> np.ndarray:
    """∂/∂w_i = l_i + λ Σ_j (q_ij + q_ji) w_j."""
    array = as_array(w)
    return problem.losses + problem.lam * (problem.graph.symmetric_adjacency @ array)


def separability_objective(
    problem: QpProblem,
    w: WeightsLike,
    lambda_within: float,
    lambda_between: float,
) -> float:
    """l·w + λ1 Σ w_i w_j q_ij − λ2 Σ w_i (1 − w_j) q_ij, with λ1 + λ2 = λ.

    Penalizes edges leaving the slice; on the binding budget it differs from the
    objective by the constant λ2·α·n·k.
    """
    if abs(lambda_within + lambda_between - problem.lam) > 1e-12 * max(1.0, abs(problem.lam)):
        raise ConfigError(
            f"lambda_within + lambda_between = {lambda_within + lambda_between} != lambda = {problem.lam}"
        )
    array = as_array(w)
    inside = quadratic_term(problem, array)
    out_mass = float(array @ (problem.graph.adjacency @ np.ones(problem.n)))
    return float(problem.losses @ array) + lambda_within * inside - lambda_between * (out_mass - inside)
