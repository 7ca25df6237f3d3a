"""λ selection on held-out halves and one-at-a-time sensitivity sweeps."""

from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from slicescope.coherence import manifold_compactness, rescale_compactness
from slicescope.config import defaults
from slicescope.dataset_io import DatasetBundle, split
from slicescope.errors import ConfigError, InputError
from slicescope.knn_graph import GraphBuildConfig, build_knn_graph
from slicescope.logging_config import logger
from slicescope.slicer import TrainConfig, predict_proba, select_test_slice, train_slicer
from slicescope.solver import SolverConfig
from slicescope.solver.discovery import discover_rounds, discover_slices


def default_lambda_grid() -> List[float]:
    return [float(v) for v in defaults("tuning").get("lambda_grid", [0.5, 0.8, 1.0, 1.5, 2.0, 2.5, 3.0])]


class LambdaTrial(BaseModel):
    lam: float
    accuracy: float = Field(ge=0, le=1)
    performance_gap: float
    compactness: float = Field(ge=0)


class TuneResult(BaseModel):
    lambda_grid: List[float]
    per_lambda: List[LambdaTrial]
    chosen_lambda: float
    threshold: float
    threshold_met: bool


class SweepPoint(BaseModel):
    parameter: str
    value: float
    slice_size: int
    accuracy: Optional[float] = None
    compactness: float
    compactness_rescaled_k10: float


def _require_labels(bundle: DatasetBundle) -> np.ndarray:
    if bundle.outcomes.correct is None:
        raise InputError("tuning needs correctness labels", column="correct")
    return np.asarray(bundle.outcomes.correct)


def tune_lambda(
    validation: DatasetBundle,
    grid: Sequence[float],
    alpha: float,
    epsilon: float,
    seed: int,
    graph_config: Optional[GraphBuildConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    train_config: Optional[TrainConfig] = None,
) -> TuneResult:
    """Pick the most compact λ whose held-out slice underperforms by at least ``epsilon``.

    Discovery and slicer training use one half of ``validation``; the slicer then
    selects the top α share of the other half, where accuracy gap and compactness
    are measured. Without a qualifying λ the largest gap wins and
    ``threshold_met`` is false.
    """
    lambdas = [float(v) for v in grid]
    if not lambdas:
        raise ConfigError("lambda grid is empty")
    _require_labels(validation)
    graph_config = graph_config or GraphBuildConfig()
    solver_config = solver_config or SolverConfig(seed=seed)
    train_config = train_config or TrainConfig(seed=seed)

    fit_half, held_half = split(validation, [0.5, 0.5], seed)
    for half in (fit_half, held_half):
        if int(alpha * half.n) < 1 or half.n <= graph_config.k:
            raise ConfigError(f"degenerate half of {half.n} rows for alpha={alpha}, k={graph_config.k}")
    held_correct = _require_labels(held_half)
    held_graph = build_knn_graph(held_half.embeddings, graph_config)
    overall = float(held_correct.mean())

    trials: List[LambdaTrial] = []
    for lam in lambdas:
        (mask,) = discover_slices(fit_half, graph_config, alpha, lam, solver_config)
        model = train_slicer(fit_half.embeddings, mask, train_config)
        selected = select_test_slice(predict_proba(model, held_half.embeddings), alpha)
        accuracy = float(held_correct[selected.member].mean())
        trials.append(
            LambdaTrial(
                lam=lam,
                accuracy=accuracy,
                performance_gap=overall - accuracy,
                compactness=manifold_compactness(held_graph, selected),
            )
        )
        logger.info("Lambda trial", extra=trials[-1].model_dump())

    qualifying = [t for t in trials if t.performance_gap >= epsilon]
    if qualifying:
        chosen = max(qualifying, key=lambda t: t.compactness)
    else:
        chosen = max(trials, key=lambda t: t.performance_gap)
        logger.warning("No lambda meets the gap threshold", extra={"epsilon": epsilon})
    return TuneResult(
        lambda_grid=lambdas,
        per_lambda=trials,
        chosen_lambda=chosen.lam,
        threshold=epsilon,
        threshold_met=bool(qualifying),
    )


def sweep_hyperparameters(
    bundle: DatasetBundle,
    lambdas: Sequence[float],
    alphas: Sequence[float],
    ks: Sequence[int],
    base_lambda: float,
    base_alpha: float,
    base_k: int,
    solver_config: Optional[SolverConfig] = None,
) -> List[SweepPoint]:
    """Vary one of λ, α, k at a time around the base point and measure the direct slice.

    Compactness is reported raw and rescaled to k = 10 so different k compare.
    """
    solver_config = solver_config or SolverConfig()
    correct = bundle.outcomes.correct
    points: List[SweepPoint] = []

    def measure(parameter: str, value: float, lam: float, alpha: float, k: int) -> None:
        (found,) = discover_rounds(bundle, GraphBuildConfig(k=k), alpha, lam, solver_config)
        mask = found.mask
        compactness = manifold_compactness(found.graph, mask)
        points.append(
            SweepPoint(
                parameter=parameter,
                value=value,
                slice_size=mask.size,
                accuracy=None if correct is None else float(correct[mask.member].mean()),
                compactness=compactness,
                compactness_rescaled_k10=rescale_compactness(compactness, k),
            )
        )

    for lam in lambdas:
        measure("lambda", float(lam), float(lam), base_alpha, base_k)
    for alpha in alphas:
        measure("alpha", float(alpha), base_lambda, float(alpha), base_k)
    for k in ks:
        measure("k", float(k), base_lambda, base_alpha, int(k))
    return points
