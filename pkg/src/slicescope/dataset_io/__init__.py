"""Dataset bundles: embeddings, losses and outcome metadata for one sample set."""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from slicescope.dataset_io.validation import ArrayValidator
from slicescope.errors import ConfigError, InputError


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """n×d matrix of feature-extractor outputs; row i is sample i."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InputError(f"embeddings must be a 2-D matrix, got {data.ndim}-D")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InputError(f"embeddings must be non-empty, got shape {data.shape}")
        ArrayValidator.finite_matrix(data)
        object.__setattr__(self, "data", _frozen(data))

    @property
    def n(self) -> int:
        return int(self.data.shape[0])

    @property
    def d(self) -> int:
        return int(self.data.shape[1])

    def take(self, indices: np.ndarray) -> "EmbeddingSet":
        return EmbeddingSet(self.data[indices])


@dataclass(frozen=True, eq=False)
class LossVector:
    """Per-sample model loss."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        ArrayValidator.losses(values)
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class OutcomeVector:
    """Optional correctness flags and ground-truth slice labels."""

    correct: Optional[np.ndarray] = None
    slice_label: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        for name in ("correct", "slice_label"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, _frozen(np.array(value, dtype=bool).reshape(-1)))

    def take(self, indices: np.ndarray) -> "OutcomeVector":
        return OutcomeVector(
            correct=None if self.correct is None else self.correct[indices],
            slice_label=None if self.slice_label is None else self.slice_label[indices],
        )


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Validated inputs for one sample set; immutable once built."""

    embeddings: EmbeddingSet
    losses: LossVector
    outcomes: OutcomeVector = field(default_factory=OutcomeVector)
    ids: Optional[List[str]] = None

    def __post_init__(self) -> None:
        n = self.embeddings.n
        ArrayValidator.length("losses", self.losses.values, n)
        ArrayValidator.length("correct", self.outcomes.correct, n)
        ArrayValidator.length("slice_label", self.outcomes.slice_label, n)
        ArrayValidator.length("ids", self.ids, n)
        if self.ids is not None:
            object.__setattr__(self, "ids", [str(v) for v in self.ids])

    @property
    def n(self) -> int:
        return self.embeddings.n

    @property
    def d(self) -> int:
        return self.embeddings.d

    @property
    def sample_ids(self) -> List[str]:
        """Identifiers, defaulting to ``row-<index>``."""
        if self.ids is not None:
            return list(self.ids)
        return [f"row-{i}" for i in range(self.n)]

    def subset(self, indices: Sequence[int]) -> "DatasetBundle":
        """Rows ``indices`` in the given order; identifiers are carried over."""
        idx = np.asarray(indices, dtype=np.int64)
        ids = self.sample_ids
        return DatasetBundle(
            embeddings=self.embeddings.take(idx),
            losses=LossVector(self.losses.values[idx]),
            outcomes=self.outcomes.take(idx),
            ids=[ids[i] for i in idx],
        )

    def equals(self, other: "DatasetBundle") -> bool:
        """Exact equality of every field, including absence of optional ones."""

        def same(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.array_equal(a, b))

        return (
            same(self.embeddings.data, other.embeddings.data)
            and same(self.losses.values, other.losses.values)
            and same(self.outcomes.correct, other.outcomes.correct)
            and same(self.outcomes.slice_label, other.outcomes.slice_label)
            and self.ids == other.ids
        )


def split_indices(n: int, fractions: Sequence[float], seed: int) -> List[np.ndarray]:
    """Seeded partition of ``range(n)`` into parts of the requested fractions.

    Part sizes are ``floor(fraction * n)``; the remainder first fills parts that
    would otherwise be empty, then goes one sample each to the leading parts.
    """
    if not fractions:
        raise ConfigError("at least one fraction is required")
    if any(f <= 0 for f in fractions):
        raise ConfigError("fractions must be positive")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"fractions must sum to 1, got {sum(fractions)}")

    sizes = [int(np.floor(f * n + 1e-9)) for f in fractions]
    remainder = n - sum(sizes)
    for i, size in enumerate(sizes):
        if remainder > 0 and size == 0:
            sizes[i] = 1
            remainder -= 1
    i = 0
    while remainder > 0:
        sizes[i % len(sizes)] += 1
        remainder -= 1
        i += 1
    if any(size == 0 for size in sizes):
        raise ConfigError(f"fractions {list(fractions)} leave an empty part for n={n}")

    order = np.random.default_rng(seed).permutation(n)
    parts: List[np.ndarray] = []
    start = 0
    for size in sizes:
        parts.append(np.sort(order[start:start + size]))
        start += size
    return parts


def split(bundle: DatasetBundle, fractions: Sequence[float], seed: int) -> List[DatasetBundle]:
    """Split a bundle into disjoint seeded parts (row order kept within each part)."""
    return [bundle.subset(part) for part in split_indices(bundle.n, fractions, seed)]
