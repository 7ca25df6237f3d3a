"""Slice evaluation: risk, coherence and ranking metrics against planted truth."""

from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from slicescope.coherence import CoherenceReport, SliceMask, coherence_report
from slicescope.config import defaults
from slicescope.dataset_io import DatasetBundle
from slicescope.errors import ConfigError, InputError
from slicescope.knn_graph import KnnGraph


class EvalConfig(BaseModel):
    """Evaluation protocol settings."""

    alpha_test: Optional[float] = Field(None, gt=0, le=1)
    precision_ks: List[int] = Field(
        default_factory=lambda: list(defaults("evaluation").get("precision_ks", [10, 25]))
    )
    epsilon: float = Field(default_factory=lambda: float(defaults("evaluation").get("epsilon", 0.15)), ge=0)


class SliceReport(BaseModel):
    """Metrics for one slice. Accuracies and gaps are fractions, not percents."""

    slice_size: int = Field(ge=1)
    mean_loss: float
    accuracy: Optional[float] = Field(None, ge=0, le=1)
    overall_accuracy: Optional[float] = Field(None, ge=0, le=1)
    performance_gap: Optional[float] = None
    epsilon_satisfied: Optional[bool] = None
    coherence: CoherenceReport
    precision_at: Dict[str, float] = Field(default_factory=dict)
    average_precision: Optional[float] = Field(None, ge=0, le=1)


def _ranking(probabilities: np.ndarray) -> np.ndarray:
    """Indices by descending probability, ties by smaller index."""
    return np.lexsort((np.arange(probabilities.shape[0]), -probabilities))


def _ranked_truth(probabilities: np.ndarray, truth: np.ndarray) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    t = np.asarray(truth, dtype=bool)
    if p.shape != t.shape or p.ndim != 1:
        raise InputError(f"probabilities {p.shape} and truth {t.shape} must be equal-length vectors")
    if not t.any():
        raise InputError("truth has no positives")
    return t[_ranking(p)]


def precision_at_k(probabilities: np.ndarray, truth: np.ndarray, k: int) -> float:
    """Fraction of the top-k ranked samples that are true members."""
    ranked = _ranked_truth(probabilities, truth)
    if k < 1 or k > ranked.shape[0]:
        raise ConfigError(f"k={k} outside [1, {ranked.shape[0]}]")
    return float(ranked[:k].mean())


def average_precision(probabilities: np.ndarray, truth: np.ndarray) -> float:
    """Retrieval AP: mean of precision@r over the ranks r holding a positive."""
    ranked = _ranked_truth(probabilities, truth)
    hits = np.cumsum(ranked)
    ranks = np.arange(1, ranked.shape[0] + 1)
    return float(np.sum(hits[ranked] / ranks[ranked]) / ranked.sum())


def evaluate_slice(
    bundle: DatasetBundle,
    graph: KnnGraph,
    mask: SliceMask,
    config: EvalConfig,
    scores: Optional[np.ndarray] = None,
) -> SliceReport:
    """Score one slice.

    Ranking metrics use ``scores`` when given (classifier probabilities),
    otherwise mask membership.
    """
    if mask.n != bundle.n or graph.n != bundle.n:
        raise InputError(f"mask ({mask.n}), graph ({graph.n}) and bundle ({bundle.n}) lengths differ")
    if mask.size < 1:
        raise InputError("empty slice")

    losses = bundle.losses.values
    report: Dict[str, object] = {
        "slice_size": mask.size,
        "mean_loss": float(losses[mask.member].mean()),
        "coherence": coherence_report(graph, bundle.embeddings, mask),
    }

    correct = bundle.outcomes.correct
    if correct is not None:
        accuracy = float(correct[mask.member].mean())
        overall = float(correct.mean())
        gap = overall - accuracy
        report.update(
            accuracy=accuracy,
            overall_accuracy=overall,
            performance_gap=gap,
            epsilon_satisfied=bool(gap >= config.epsilon),
        )

    truth = bundle.outcomes.slice_label
    if truth is not None and truth.any():
        ranking_scores = mask.member.astype(np.float64) if scores is None else np.asarray(scores, np.float64)
        if ranking_scores.shape != (bundle.n,):
            raise InputError(f"scores have shape {ranking_scores.shape}, expected ({bundle.n},)")
        report["precision_at"] = {
            str(k): precision_at_k(ranking_scores, truth, k)
            for k in config.precision_ks
            if 1 <= k <= bundle.n
        }
        report["average_precision"] = average_precision(ranking_scores, truth)

    return SliceReport.model_validate(report)
