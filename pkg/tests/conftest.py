"""Shared fixtures: the four-point toy instance and small bundle builders."""

from typing import Callable, Optional

import numpy as np
import pytest

from slicescope.dataset_io import DatasetBundle, EmbeddingSet, LossVector, OutcomeVector
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph
from slicescope.solver import QpProblem

TOY_POINTS = [[0.0], [0.1], [1.0], [1.1]]
TOY_LOSSES = [1.0, 0.9, 0.8, 0.7]


@pytest.fixture
def toy_bundle() -> DatasetBundle:
    """Four 1-D points forming two pairs, losses decreasing by index."""
    return DatasetBundle(
        embeddings=EmbeddingSet(np.array(TOY_POINTS)),
        losses=LossVector(np.array(TOY_LOSSES)),
        outcomes=OutcomeVector(correct=[False, False, True, True], slice_label=[True, True, False, False]),
    )


@pytest.fixture
def toy_graph(toy_bundle: DatasetBundle) -> KnnGraph:
    """k=1 graph with edges 0↔1 and 2↔3."""
    return build_knn_graph(toy_bundle.embeddings, GraphBuildConfig(k=1))


@pytest.fixture
def toy_problem(toy_graph: KnnGraph) -> QpProblem:
    """Toy program with budget 2 and λ = 1."""
    return QpProblem(np.array(TOY_LOSSES), toy_graph, lam=1.0, alpha=0.5)


@pytest.fixture
def make_bundle() -> Callable[..., DatasetBundle]:
    """Random bundle factory with optional outcome labels."""

    def build(n: int = 50, d: int = 3, seed: int = 0, labels: bool = True, ids: Optional[list] = None) -> DatasetBundle:
        rng = np.random.default_rng(seed)
        outcomes = OutcomeVector()
        if labels:
            outcomes = OutcomeVector(correct=rng.random(n) < 0.8, slice_label=rng.random(n) < 0.2)
        return DatasetBundle(
            embeddings=EmbeddingSet(rng.standard_normal((n, d))),
            losses=LossVector(rng.random(n)),
            outcomes=outcomes,
            ids=ids,
        )

    return build
