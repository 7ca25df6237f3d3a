"""On-disk kNN graph cache "KNG1", keyed by a hash of the embeddings.

Layout: magic ``KNG1``; u32 version, n, k; u64 content hash of the f64
embedding payload; n×k u32 neighbor indices, little-endian.
"""

import hashlib
import logging
import struct
from typing import Optional

import numpy as np

from slicescope.dataset_io import EmbeddingSet
from slicescope.errors import InputError
from slicescope.knn_graph import GraphBuildConfig, KnnGraph, build_knn_graph

logger = logging.getLogger("slicescope.knn_graph")

MAGIC = b"KNG1"
VERSION = 1
HEADER = struct.Struct("<4sIIIQ")


def content_hash(embeddings: EmbeddingSet) -> int:
    """64-bit BLAKE2b digest of the embedding payload."""
    digest = hashlib.blake2b(np.ascontiguousarray(embeddings.data, dtype="<f8").tobytes(), digest_size=8)
    return int.from_bytes(digest.digest(), "little")


def encode_graph(graph: KnnGraph, embeddings: EmbeddingSet) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, graph.n, graph.k, content_hash(embeddings))
    return header + graph.neighbors.astype("<u4").tobytes()


def decode_graph(payload: bytes, embeddings: Optional[EmbeddingSet] = None) -> Optional[KnnGraph]:
    """Parse a cache payload; ``None`` when it was built from other embeddings."""
    if len(payload) < HEADER.size or payload[:4] != MAGIC:
        raise InputError("unrecognized format")
    _, version, n, k, stored_hash = HEADER.unpack(payload[: HEADER.size])
    if version != VERSION:
        raise InputError(f"unsupported KNG1 version {version}")
    body = payload[HEADER.size:]
    if len(body) != 4 * n * k:
        raise InputError(f"truncated payload: expected {4 * n * k} neighbor bytes, got {len(body)}")
    if embeddings is not None and (embeddings.n != n or content_hash(embeddings) != stored_hash):
        return None
    neighbors = np.frombuffer(body, dtype="<u4").reshape(n, k).astype(np.int64)
    return KnnGraph(neighbors)


def save_graph(graph: KnnGraph, embeddings: EmbeddingSet, path: str) -> None:
    with open(path, "wb") as f:
        f.write(encode_graph(graph, embeddings))


def load_graph(path: str, embeddings: Optional[EmbeddingSet] = None) -> Optional[KnnGraph]:
    with open(path, "rb") as f:
        return decode_graph(f.read(), embeddings)


def build_or_load(embeddings: EmbeddingSet, config: GraphBuildConfig, path: str) -> KnnGraph:
    """Reuse a cached graph when it matches the embeddings and k, else rebuild and store."""
    try:
        cached = load_graph(path, embeddings)
    except FileNotFoundError:
        cached = None
    except InputError as e:
        logger.warning("Ignoring unreadable graph cache", extra={"path": path, "error": str(e)})
        cached = None
    if cached is not None and cached.k == config.k:
        logger.info("Graph cache hit", extra={"path": path})
        return cached
    graph = build_knn_graph(embeddings, config)
    save_graph(graph, embeddings, path)
    return graph
