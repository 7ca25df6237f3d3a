"""Unit tests for manifold compactness and Euclidean dispersion."""

import numpy as np
import pytest

from slicescope.coherence import (
    SliceMask,
    coherence_report,
    euclidean_dispersion,
    manifold_compactness,
    rescale_compactness,
    subsampled_compactness,
)
from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import InputError
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph


@pytest.fixture
def blob_graph() -> KnnGraph:
    """k=10 graph over 300 random points."""
    data = np.random.default_rng(0).standard_normal((300, 4))
    return build_knn_graph(EmbeddingSet(data), GraphBuildConfig(k=10))


def test_toy_compactness(toy_graph: KnnGraph) -> None:
    """Test mask {0,1} on the toy graph gives 2/2."""
    assert manifold_compactness(toy_graph, SliceMask.from_indices([0, 1], 4)) == 1.0


def test_no_internal_edges(toy_graph: KnnGraph) -> None:
    """Test a mask without internal edges."""
    assert manifold_compactness(toy_graph, SliceMask.from_indices([0, 2], 4)) == 0.0


def test_closed_slice_reaches_k() -> None:
    """Test a slice containing every member's full neighbor list."""
    data = np.concatenate([np.zeros((6, 2)), np.full((6, 2), 100.0)]) + np.arange(12)[:, None] * 1e-3
    graph = build_knn_graph(EmbeddingSet(data), GraphBuildConfig(k=3))
    assert manifold_compactness(graph, SliceMask.from_indices(range(6), 12)) == 3.0


def test_isolated_addition_lowers_compactness() -> None:
    """Test adding a node with no edges to or from the slice."""
    rng = np.random.default_rng(1)
    data = np.concatenate([rng.standard_normal((10, 2)), 100.0 + rng.standard_normal((10, 2))])
    graph = build_knn_graph(EmbeddingSet(data), GraphBuildConfig(k=3))
    base = SliceMask.from_indices(range(10), 20)
    grown = SliceMask.from_indices(list(range(10)) + [15], 20)
    assert manifold_compactness(graph, base) == 3.0
    assert manifold_compactness(graph, grown) == pytest.approx(30 / 11)


def test_matches_reference_on_random_instances() -> None:
    """Test compactness against a direct double loop over pairs."""
    rng = np.random.default_rng(5)
    for _ in range(1000):
        n = int(rng.integers(3, 12))
        k = int(rng.integers(1, n))
        graph = build_knn_graph(EmbeddingSet(rng.standard_normal((n, 2))), GraphBuildConfig(k=k))
        member = rng.random(n) < 0.5
        member[int(rng.integers(n))] = True
        q = graph.adjacency.toarray()
        pairs = sum(q[i, j] for i in range(n) for j in range(n) if member[i] and member[j])
        assert manifold_compactness(graph, SliceMask(member)) == pairs / member.sum()


def test_empty_mask_rejected(toy_graph: KnnGraph) -> None:
    """Test an empty slice."""
    with pytest.raises(InputError):
        manifold_compactness(toy_graph, SliceMask(np.zeros(4, dtype=bool)))


class TestSubsampled:
    """Fixed-size subsampled compactness."""

    def test_exact_size_matches_full(self, blob_graph: KnnGraph) -> None:
        """Test a slice of exactly 150 members."""
        mask = SliceMask.from_indices(range(150), 300)
        assert subsampled_compactness(blob_graph, mask) == pytest.approx(manifold_compactness(blob_graph, mask))

    def test_range_and_determinism(self, blob_graph: KnnGraph) -> None:
        """Test defaults give a value in [0, k], reproducible per seed."""
        mask = SliceMask.from_indices(range(0, 300, 2), 300)
        grown = SliceMask.from_indices(range(250), 300)
        value = subsampled_compactness(blob_graph, grown, seed=3)
        assert 0.0 <= value <= 10.0
        assert value == subsampled_compactness(blob_graph, grown, seed=3)
        assert subsampled_compactness(blob_graph, mask) >= 0.0

    def test_slice_too_small(self, blob_graph: KnnGraph) -> None:
        """Test slices below the subset size."""
        with pytest.raises(InputError):
            subsampled_compactness(blob_graph, SliceMask.from_indices(range(20), 300))


class TestDispersion:
    """Distance-to-centroid statistics."""

    def test_identical_points(self) -> None:
        """Test a degenerate distribution."""
        embeddings = EmbeddingSet(np.ones((5, 3)))
        assert euclidean_dispersion(embeddings, SliceMask(np.ones(5, dtype=bool))) == (0.0, 0.0, 0.0, 0.0)

    def test_two_points(self) -> None:
        """Test two points at distance 2 in one dimension."""
        embeddings = EmbeddingSet(np.array([[-1.0], [1.0]]))
        assert euclidean_dispersion(embeddings, SliceMask(np.ones(2, dtype=bool))) == (1.0, 0.0, 0.0, 0.0)

    def test_homogeneity_and_translation(self) -> None:
        """Test doubling scales variance by 4 and the rest by 2; shifting changes nothing."""
        data = np.random.default_rng(2).standard_normal((40, 3))
        mask = SliceMask(np.arange(40) % 3 == 0)
        base = euclidean_dispersion(EmbeddingSet(data), mask)
        doubled = euclidean_dispersion(EmbeddingSet(2 * data), mask)
        shifted = euclidean_dispersion(EmbeddingSet(data + 7.5), mask)
        assert doubled[0] == pytest.approx(4 * base[0])
        assert list(doubled[1:]) == pytest.approx([2 * v for v in base[1:]])
        assert list(shifted) == pytest.approx(list(base))

    def test_needs_two_members(self) -> None:
        """Test a single-member slice."""
        with pytest.raises(InputError):
            euclidean_dispersion(EmbeddingSet(np.zeros((3, 1))), SliceMask.from_indices([1], 3))


def test_rescale_compactness() -> None:
    """Test linear rescaling to k = 10."""
    assert rescale_compactness(4.0, 5) == 8.0
    assert rescale_compactness(3.3, 10) == 3.3
    assert rescale_compactness(0.0, 7) == 0.0


def test_translation_invariance() -> None:
    """Test shifting all embeddings changes neither graph nor compactness."""
    data = np.random.default_rng(4).standard_normal((60, 3))
    mask = SliceMask(np.arange(60) < 20)
    a = build_knn_graph(EmbeddingSet(data), GraphBuildConfig(k=5))
    b = build_knn_graph(EmbeddingSet(data + 3.0), GraphBuildConfig(k=5))
    assert np.array_equal(a.neighbors, b.neighbors)
    assert manifold_compactness(a, mask) == manifold_compactness(b, mask)


def test_report_single_member(toy_graph: KnnGraph) -> None:
    """Test dispersion is zero for a one-member slice."""
    embeddings = EmbeddingSet(np.array([[0.0], [0.1], [1.0], [1.1]]))
    report = coherence_report(toy_graph, embeddings, SliceMask.from_indices([2], 4))
    assert report.compactness == 0.0
    assert report.variance == 0.0
    assert report.compactness_rescaled_k10 == 0.0
