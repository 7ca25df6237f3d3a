"""Directed k-nearest-neighbor graph approximating the data manifold."""

import time
from dataclasses import dataclass
from functools import cached_property
from typing import List, Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy import sparse
from scipy.spatial.distance import cdist

from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import ConfigError, InputError
from slicescope.logging_config import log_graph_build
from slicescope.monitoring import knn_build_seconds
from slicescope.tasks import parallel_map


class GraphBuildConfig(BaseModel):
    """Graph construction parameters."""

    k: int = Field(10, ge=1)
    distance: Literal["euclidean"] = "euclidean"
    parallel_chunk: int = Field(256, ge=1)


@dataclass(frozen=True, eq=False)
class KnnGraph:
    """Row i lists node i's k nearest neighbors, nearest first.

    Edge weights are implied: q_ij = 1 iff j is in row i. The graph is directed
    and has no self-loops, so every out-degree is exactly k.
    """

    neighbors: np.ndarray

    def __post_init__(self) -> None:
        neighbors = np.array(self.neighbors, dtype=np.int64)
        if neighbors.ndim != 2 or neighbors.shape[1] < 1:
            raise InputError(f"neighbor table must be n×k, got shape {neighbors.shape}")
        n = neighbors.shape[0]
        if neighbors.size and (neighbors.min() < 0 or neighbors.max() >= n):
            raise InputError("neighbor index out of range")
        if np.any(neighbors == np.arange(n)[:, None]):
            raise InputError("self-loop in neighbor table")
        neighbors.setflags(write=False)
        object.__setattr__(self, "neighbors", neighbors)

    @property
    def n(self) -> int:
        return int(self.neighbors.shape[0])

    @property
    def k(self) -> int:
        return int(self.neighbors.shape[1])

    def edges(self) -> Tuple[np.ndarray, np.ndarray]:
        """Ordered edge list (i, j) for every q_ij = 1."""
        return np.repeat(np.arange(self.n), self.k), self.neighbors.reshape(-1)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Sparse 0/1 matrix Q with Q[i, j] = q_ij."""
        rows, cols = self.edges()
        data = np.ones(rows.shape[0], dtype=np.float64)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def symmetric_adjacency(self) -> sparse.csr_matrix:
        """Q + Qᵀ, the operator in the objective gradient."""
        return (self.adjacency + self.adjacency.T).tocsr()


def _chunk_neighbors(data: np.ndarray, start: int, stop: int, k: int) -> np.ndarray:
    distances = cdist(data[start:stop], data, metric="euclidean")
    distances[np.arange(stop - start), np.arange(start, stop)] = np.inf
    # stable sort breaks distance ties by ascending index
    order = np.argsort(distances, axis=1, kind="stable")
    return order[:, :k]


def build_knn_graph(embeddings: EmbeddingSet, config: GraphBuildConfig) -> KnnGraph:
    """Exact brute-force kNN under Euclidean distance.

    Rows are processed in chunks of ``config.parallel_chunk``; each row's result
    depends only on that row, so chunking and thread count never change the graph.
    """
    n = embeddings.n
    if config.k >= n:
        raise ConfigError(f"k={config.k} must be smaller than the number of samples n={n}")
    data = embeddings.data
    if not np.all(np.isfinite(data)):
        raise InputError("non-finite embedding")

    started = time.perf_counter()
    bounds: List[Tuple[int, int]] = [
        (start, min(start + config.parallel_chunk, n)) for start in range(0, n, config.parallel_chunk)
    ]
    blocks = parallel_map(lambda b: _chunk_neighbors(data, b[0], b[1], config.k), bounds)
    graph = KnnGraph(np.vstack(blocks))

    duration = time.perf_counter() - started
    knn_build_seconds.observe(duration)
    log_graph_build(n, config.k, len(bounds), duration)
    return graph


def out_degree(graph: KnnGraph, node: int) -> int:
    """Number of outgoing edges of ``node`` (always k)."""
    if not 0 <= node < graph.n:
        raise InputError(f"node {node} out of range for n={graph.n}")
    return int(np.count_nonzero(graph.neighbors[node] >= 0))


def induced_pair_weight_sum(graph: KnnGraph, member: np.ndarray) -> int:
    """Count ordered pairs (i, j), both in the slice, with q_ij = 1.

    ``member`` is a boolean array of length n (or a SliceMask's ``member``).
    """
    member = np.asarray(getattr(member, "member", member), dtype=bool)
    if member.shape != (graph.n,):
        raise InputError(f"mask has length {member.shape[0]}, graph has {graph.n} nodes")
    rows = graph.neighbors[member]
    return int(np.count_nonzero(member[rows]))
