"""Two-dimensional PCA projection by power iteration with deflation."""

from dataclasses import dataclass

import numpy as np

from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import InputError
from slicescope.logging_config import logger

POWER_TOL = 1e-9
POWER_MAX_ITERS = 1000
DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class Projection:
    coords: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    degenerate: bool


def _leading_eigenvector(matrix: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(matrix.shape[0])
    v /= np.linalg.norm(v)
    for _ in range(POWER_MAX_ITERS):
        nxt = matrix @ v
        norm = np.linalg.norm(nxt)
        if norm <= DEGENERATE_TOL:
            return v
        nxt /= norm
        if np.linalg.norm(nxt - v) < POWER_TOL or np.linalg.norm(nxt + v) < POWER_TOL:
            return nxt
        v = nxt
    return v


def _fix_sign(v: np.ndarray) -> np.ndarray:
    return v if v[np.argmax(np.abs(v))] >= 0 else -v


def project_2d(embeddings: EmbeddingSet, seed: int = 0) -> Projection:
    """Project centered embeddings onto their top two principal components.

    Each component is signed so its largest-magnitude loading is positive. When the
    second component is undefined the second column is zero and ``degenerate`` is set.
    """
    if embeddings.n < 2 or embeddings.d < 2:
        raise InputError(f"projection needs n >= 2 and d >= 2, got n={embeddings.n}, d={embeddings.d}")
    centered = embeddings.data - embeddings.data.mean(axis=0)
    cov = centered.T @ centered / embeddings.n
    scale = max(float(np.trace(cov)), DEGENERATE_TOL)
    rng = np.random.default_rng(seed)

    components = np.zeros((2, embeddings.d))
    variances = np.zeros(2)
    degenerate = False
    remaining = cov.copy()
    for i in range(2):
        v = _fix_sign(_leading_eigenvector(remaining, rng))
        eigenvalue = float(v @ remaining @ v)
        if eigenvalue <= DEGENERATE_TOL * scale:
            degenerate = True
            break
        components[i] = v
        variances[i] = eigenvalue
        remaining = remaining - eigenvalue * np.outer(v, v)

    if degenerate:
        logger.warning("Degenerate projection: second component undefined", extra={"n": embeddings.n})
    return Projection(
        coords=centered @ components.T,
        components=components,
        explained_variance=variances,
        degenerate=degenerate,
    )
