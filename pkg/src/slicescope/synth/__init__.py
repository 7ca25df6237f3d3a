"""Synthetic settings with planted error slices."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from slicescope.coherence import SliceMask, euclidean_dispersion, subsampled_compactness
from slicescope.dataset_io import DatasetBundle, EmbeddingSet, LossVector, OutcomeVector
from slicescope.errors import ConfigError
from slicescope.knn_graph import GraphBuildConfig, build_knn_graph
from slicescope.logging_config import log_generator_gate

Kind = Literal["correlation", "rare", "noisy"]
KINDS: Tuple[Kind, ...] = ("correlation", "rare", "noisy")

MAX_ATTEMPTS = 5
RARE_FRACTION = 0.03

# Loss profiles: |N(mean, std)| by correctness
CORRECT_LOSS = (0.1, 0.05)
INCORRECT_LOSS = (1.0, 0.2)


class GeneratorParams(BaseModel):
    """Gaussian-mixture generator settings. ``n`` is the size of each split."""

    n: int = Field(2000, ge=20)
    dim: int = Field(16, ge=2)
    clusters: int = Field(6, ge=2)
    separation: float = Field(8.0, gt=0)
    cluster_std: float = Field(1.0, gt=0)
    planted_fraction: Optional[float] = Field(None, gt=0, lt=0.5)
    p_bad: float = Field(0.3, ge=0, le=1)
    p_good: float = Field(0.95, ge=0, le=1)
    noise_fraction: float = Field(0.25, gt=0, le=1)
    neighbors: int = Field(10, ge=1)
    min_purity: float = Field(0.95, ge=0, le=1)
    strict_purity: bool = False

    @model_validator(mode="after")
    def check_geometry(self) -> "GeneratorParams":
        if self.clusters > self.dim:
            raise ValueError(f"clusters ({self.clusters}) cannot exceed dim ({self.dim})")
        if self.p_bad >= self.p_good:
            raise ValueError("p_bad must be below p_good")
        return self

    def fraction_for(self, kind: str) -> float:
        if self.planted_fraction is not None:
            return self.planted_fraction
        if kind == "rare":
            return RARE_FRACTION
        return min(1.0 / self.clusters, 0.49)


@dataclass(frozen=True, eq=False)
class SyntheticSetting:
    kind: str
    validation: DatasetBundle
    test: DatasetBundle
    params: GeneratorParams
    seed: int
    attempts: int
    neighbor_purity: float
    purity_floor: float
    purity_gate_passed: bool

    @property
    def planted_mask_val(self) -> SliceMask:
        return SliceMask(np.asarray(self.validation.outcomes.slice_label))

    @property
    def planted_mask_test(self) -> SliceMask:
        return SliceMask(np.asarray(self.test.outcomes.slice_label))


def _cluster_centers(params: GeneratorParams, rng: np.random.Generator) -> np.ndarray:
    """Centers at pairwise distance ``separation``: scaled orthonormal directions."""
    basis, _ = np.linalg.qr(rng.standard_normal((params.dim, params.clusters)))
    return (params.separation / np.sqrt(2.0)) * basis.T


def _cluster_sizes(n: int, clusters: int, planted_fraction: float) -> np.ndarray:
    """Exact per-cluster counts; cluster 0 is planted."""
    planted = max(1, int(round(planted_fraction * n)))
    rest = n - planted
    sizes = np.full(clusters - 1, rest // (clusters - 1))
    sizes[: rest % (clusters - 1)] += 1
    if sizes.min() < 1:
        raise ConfigError(f"n={n} too small for {clusters} clusters")
    return np.concatenate([[planted], sizes])


def _losses(correct: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    good = np.abs(rng.normal(*CORRECT_LOSS, size=correct.shape[0]))
    bad = np.abs(rng.normal(*INCORRECT_LOSS, size=correct.shape[0]))
    return np.where(correct, good, bad)


def _draw_split(
    kind: str, params: GeneratorParams, centers: np.ndarray, rng: np.random.Generator
) -> DatasetBundle:
    sizes = _cluster_sizes(params.n, params.clusters, params.fraction_for(kind))
    labels = rng.permutation(np.repeat(np.arange(params.clusters), sizes))
    data = centers[labels] + params.cluster_std * rng.standard_normal((params.n, params.dim))
    planted = labels == 0

    p_correct = np.where(planted & (kind != "noisy"), params.p_bad, params.p_good)
    correct = rng.random(params.n) < p_correct
    if kind == "noisy":
        members = np.flatnonzero(planted)
        flips = max(1, int(round(params.noise_fraction * members.shape[0])))
        flipped = rng.choice(members, size=flips, replace=False)
        correct[flipped] = False

    return DatasetBundle(
        embeddings=EmbeddingSet(data),
        losses=LossVector(_losses(correct, rng)),
        outcomes=OutcomeVector(correct=correct, slice_label=planted),
    )


def _is_error_slice(bundle: DatasetBundle) -> bool:
    planted = np.asarray(bundle.outcomes.slice_label)
    losses = bundle.losses.values
    return bool(losses[planted].mean() > losses.mean())


def neighbor_purity(bundle: DatasetBundle, k: int = 10) -> float:
    """Fraction of planted samples' kNN neighbors that are planted too."""
    planted = np.asarray(bundle.outcomes.slice_label)
    graph = build_knn_graph(bundle.embeddings, GraphBuildConfig(k=k))
    return float(planted[graph.neighbors[planted]].mean())


def purity_floor(bundle: DatasetBundle, params: GeneratorParams) -> float:
    """Purity the acceptance gate asks for.

    A planted cluster with no more than k members cannot fill every neighbor
    slot, so the floor scales with the attainable share.
    """
    planted = int(np.sum(np.asarray(bundle.outcomes.slice_label)))
    return params.min_purity * min(1.0, (planted - 1) / params.neighbors)


def generate_setting(kind: str, params: GeneratorParams, seed: int) -> SyntheticSetting:
    """Validation and test splits drawn i.i.d. with the same planted cluster.

    A draw is accepted when the planted slice's mean loss exceeds the population's
    in both splits and the validation kNN graph keeps planted neighborhoods pure.
    Rejected draws are repeated with the next seed. When no draw passes the purity
    gate, the purest error-slice draw is returned flagged, or ``ConfigError`` is
    raised if ``params.strict_purity`` is set.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown setting kind '{kind}'; expected one of {', '.join(KINDS)}")
    best: Optional[SyntheticSetting] = None
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed + attempt, KINDS.index(kind)])
        centers = _cluster_centers(params, rng)
        validation = _draw_split(kind, params, centers, rng)
        test = _draw_split(kind, params, centers, rng)
        if not (_is_error_slice(validation) and _is_error_slice(test)):
            continue
        purity = neighbor_purity(validation, params.neighbors)
        floor = purity_floor(validation, params)
        setting = SyntheticSetting(
            kind=kind,
            validation=validation,
            test=test,
            params=params,
            seed=seed,
            attempts=attempt + 1,
            neighbor_purity=purity,
            purity_floor=floor,
            purity_gate_passed=purity >= floor,
        )
        if setting.purity_gate_passed:
            log_generator_gate(kind, seed, setting.attempts, purity, floor, True)
            return setting
        if best is None or purity > best.neighbor_purity:
            best = setting

    if best is None:
        raise ConfigError(f"degenerate params: no error slice after {MAX_ATTEMPTS} attempts")
    if params.strict_purity:
        raise ConfigError(
            f"neighbor purity {best.neighbor_purity:.3f} below {best.purity_floor:.3f} "
            f"after {MAX_ATTEMPTS} attempts"
        )
    log_generator_gate(kind, seed, best.attempts, best.neighbor_purity, best.purity_floor, False)
    return best


# Nested settings: cells (y, a), y splits coarsely, a finely within y.
A_SHIFT = 10.0
Y_SHIFT = 24.0
ELONGATION = 10.0


@dataclass(frozen=True, eq=False)
class NestedSetting:
    bundle: DatasetBundle
    y: np.ndarray
    a: np.ndarray
    lattice: Dict[str, SliceMask] = field(default_factory=dict)

    def lattice_edges(self) -> List[Tuple[str, str]]:
        """(coarse, fine) pairs: whole set to marginals, marginals to cells."""
        edges = [("all", f"{name}={v}") for name in ("y", "a") for v in (0, 1)]
        for y in (0, 1):
            for a in (0, 1):
                cell = f"y={y}&a={a}"
                edges += [(f"y={y}", cell), (f"a={a}", cell)]
        return edges

    def lattice_diagnostics(self, k: int = 10, seed: int = 0) -> Dict[str, Any]:
        """Compactness and variance along every coarse-to-fine edge.

        Compactness is subsampled at the smallest lattice size, at most 150.
        """
        graph = build_knn_graph(self.bundle.embeddings, GraphBuildConfig(k=k))
        subset = min(150, min(mask.size for mask in self.lattice.values()))
        compactness = {
            name: subsampled_compactness(graph, mask, subset_size=subset, seed=seed)
            for name, mask in self.lattice.items()
        }
        embeddings = self.bundle.embeddings
        variance = {name: euclidean_dispersion(embeddings, mask)[0] for name, mask in self.lattice.items()}
        edges = self.lattice_edges()
        return {
            "compactness_monotone": bool(all(compactness[f] > compactness[c] for c, f in edges)),
            "variance_violations": int(sum(variance[f] > variance[c] for c, f in edges)),
            "edges": len(edges),
        }


def generate_nested_setting(params: GeneratorParams, seed: int) -> NestedSetting:
    """Four equal (y, a) cells; y separates coarsely, a finely within each y.

    Cell (0, 0) is stretched along one axis so its Euclidean spread exceeds its
    parent's while its kNN structure stays tight.
    """
    if params.n < 8 or params.dim < 3:
        raise ConfigError("nested setting needs at least 8 samples and 3 dimensions")
    rng = np.random.default_rng([seed, len(KINDS)])
    cell = rng.permutation(np.arange(params.n) % 4)
    y, a = cell // 2, cell % 2

    scale = np.full((params.n, params.dim), params.cluster_std)
    scale[(y == 0) & (a == 0), 0] = ELONGATION * params.cluster_std
    data = scale * rng.standard_normal((params.n, params.dim))
    data[:, 1] += A_SHIFT * a
    data[:, 2] += Y_SHIFT * y

    correct = rng.random(params.n) < np.where((y == 1) & (a == 1), params.p_bad, params.p_good)
    planted = (y == 1) & (a == 1)
    bundle = DatasetBundle(
        embeddings=EmbeddingSet(data),
        losses=LossVector(_losses(correct, rng)),
        outcomes=OutcomeVector(correct=correct, slice_label=planted),
    )

    lattice = {"all": SliceMask(np.ones(params.n, dtype=bool))}
    for v in (0, 1):
        lattice[f"y={v}"] = SliceMask(y == v)
        lattice[f"a={v}"] = SliceMask(a == v)
    for yv in (0, 1):
        for av in (0, 1):
            lattice[f"y={yv}&a={av}"] = SliceMask((y == yv) & (a == av))
    return NestedSetting(bundle=bundle, y=y, a=a, lattice=lattice)
