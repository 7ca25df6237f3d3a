"""Manifold compactness and the Euclidean dispersion baselines it is compared with."""

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from pydantic import BaseModel, Field

from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import ConfigError, InputError
from slicescope.knn_graph import KnnGraph, induced_pair_weight_sum

REFERENCE_K = 10


@dataclass(frozen=True, eq=False)
class SliceMask:
    """Binary slice membership over a sample set."""

    member: np.ndarray

    def __post_init__(self) -> None:
        member = np.array(self.member, dtype=bool).reshape(-1)
        member.setflags(write=False)
        object.__setattr__(self, "member", member)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "SliceMask":
        member = np.zeros(n, dtype=bool)
        idx = np.fromiter((int(i) for i in indices), dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InputError(f"slice index out of range for n={n}")
        member[idx] = True
        return cls(member)

    @property
    def n(self) -> int:
        return int(self.member.shape[0])

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.member))

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.member)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SliceMask):
            return NotImplemented
        return bool(np.array_equal(self.member, other.member))

    def __hash__(self) -> int:
        return hash(self.member.tobytes())


class CoherenceReport(BaseModel):
    """Coherence of one slice: compactness plus Euclidean dispersion statistics."""

    compactness: float = Field(ge=0)
    compactness_rescaled_k10: float = Field(ge=0)
    variance: float = Field(ge=0)
    mean_abs_dev: float = Field(ge=0)
    median_abs_dev: float = Field(ge=0)
    iqr: float = Field(ge=0)


def _check_mask(graph: KnnGraph, mask: SliceMask) -> None:
    if mask.n != graph.n:
        raise InputError(f"mask has length {mask.n}, graph has {graph.n} nodes")
    if mask.size < 1:
        raise InputError("empty slice")


def manifold_compactness(graph: KnnGraph, mask: SliceMask) -> float:
    """Average out-degree of the slice's induced subgraph, in [0, k]."""
    _check_mask(graph, mask)
    return induced_pair_weight_sum(graph, mask.member) / mask.size


def subsampled_compactness(
    graph: KnnGraph,
    mask: SliceMask,
    subset_size: int = 150,
    repeats: int = 20,
    seed: int = 0,
) -> float:
    """Mean compactness over ``repeats`` uniform size-``subset_size`` subsets of the slice.

    Fixing the subset size makes slices of different sizes comparable.
    Sampling uses the counter-based Philox generator.
    """
    _check_mask(graph, mask)
    if subset_size < 1 or repeats < 1:
        raise ConfigError("subset_size and repeats must be positive")
    if mask.size < subset_size:
        raise InputError(f"slice of size {mask.size} is smaller than subset_size={subset_size}")
    rng = np.random.Generator(np.random.Philox(seed))
    members = mask.indices()
    total = 0.0
    for _ in range(repeats):
        chosen = rng.choice(members, size=subset_size, replace=False)
        sub = np.zeros(graph.n, dtype=bool)
        sub[chosen] = True
        total += induced_pair_weight_sum(graph, sub) / subset_size
    return total / repeats


def euclidean_dispersion(embeddings: EmbeddingSet, mask: SliceMask) -> Tuple[float, float, float, float]:
    """(variance, MeanAD, MedianAD, IQR) of member distances to the slice centroid.

    Variance is the mean squared distance divided by d; quantiles interpolate linearly.
    """
    if mask.n != embeddings.n:
        raise InputError(f"mask has length {mask.n}, embeddings have {embeddings.n} rows")
    if mask.size < 2:
        raise InputError(f"dispersion needs at least 2 members, got {mask.size}")
    points = embeddings.data[mask.member]
    distances = np.linalg.norm(points - points.mean(axis=0), axis=1)
    variance = float(np.mean(distances**2) / embeddings.d)
    mean_abs_dev = float(np.mean(np.abs(distances - distances.mean())))
    median_abs_dev = float(np.median(np.abs(distances - np.median(distances))))
    q25, q75 = np.percentile(distances, [25, 75], method="linear")
    return variance, mean_abs_dev, median_abs_dev, float(q75 - q25)


def rescale_compactness(value: float, k: int, reference_k: int = REFERENCE_K) -> float:
    """Express a compactness measured with ``k`` neighbors on the ``reference_k`` scale."""
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    return value * reference_k / k


def coherence_report(graph: KnnGraph, embeddings: EmbeddingSet, mask: SliceMask) -> CoherenceReport:
    """All coherence statistics for one slice; dispersion is zero for a single member."""
    compactness = manifold_compactness(graph, mask)
    if mask.size >= 2:
        variance, mean_abs_dev, median_abs_dev, iqr = euclidean_dispersion(embeddings, mask)
    else:
        variance = mean_abs_dev = median_abs_dev = iqr = 0.0
    return CoherenceReport(
        compactness=compactness,
        compactness_rescaled_k10=rescale_compactness(compactness, graph.k),
        variance=variance,
        mean_abs_dev=mean_abs_dev,
        median_abs_dev=median_abs_dev,
        iqr=iqr,
    )
