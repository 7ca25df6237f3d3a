"""Framed little-endian binary format "SLB1" for dataset bundles.

Layout: magic ``SLB1``; u32 version, n, d, flags (bit0 correctness, bit1 slice
labels, bit2 ids); n×d f32 embeddings row-major; n f32 losses; optional n bytes
correctness; optional n bytes slice labels; optional ids, each a u16 length
followed by UTF-8 bytes.
"""

import struct
from typing import List, Optional

import numpy as np

from slicescope.dataset_io import DatasetBundle, EmbeddingSet, LossVector, OutcomeVector
from slicescope.errors import InputError

MAGIC = b"SLB1"
VERSION = 1
HEADER = struct.Struct("<4sIIII")

FLAG_CORRECT = 1
FLAG_SLICE_LABEL = 2
FLAG_IDS = 4


def encode_bundle(bundle: DatasetBundle) -> bytes:
    """Serialize a bundle to SLB1 bytes."""
    outcomes = bundle.outcomes
    flags = 0
    if outcomes.correct is not None:
        flags |= FLAG_CORRECT
    if outcomes.slice_label is not None:
        flags |= FLAG_SLICE_LABEL
    if bundle.ids is not None:
        flags |= FLAG_IDS

    embeddings = bundle.embeddings.data.astype("<f4")
    losses = bundle.losses.values.astype("<f4")
    if not (np.all(np.isfinite(embeddings)) and np.all(np.isfinite(losses))):
        raise InputError("values overflow 32-bit storage")

    parts = [HEADER.pack(MAGIC, VERSION, bundle.n, bundle.d, flags), embeddings.tobytes(), losses.tobytes()]
    if outcomes.correct is not None:
        parts.append(outcomes.correct.astype(np.uint8).tobytes())
    if outcomes.slice_label is not None:
        parts.append(outcomes.slice_label.astype(np.uint8).tobytes())
    if bundle.ids is not None:
        for sample_id in bundle.ids:
            raw = sample_id.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise InputError(f"identifier longer than 65535 bytes: {sample_id[:32]}...")
            parts.append(struct.pack("<H", len(raw)))
            parts.append(raw)
    return b"".join(parts)


class _Reader:
    """Bounds-checked cursor over a payload."""

    def __init__(self, payload: bytes):
        self.payload = payload
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise InputError(
                f"truncated payload: {what} needs {size} bytes, {len(self.payload) - self.offset} left"
            )
        chunk = self.payload[self.offset:end]
        self.offset = end
        return chunk


def _flags_array(raw: bytes, what: str) -> np.ndarray:
    values = np.frombuffer(raw, dtype=np.uint8)
    if np.any(values > 1):
        raise InputError(f"{what} bytes must be 0 or 1")
    return values.astype(bool)


def decode_bundle(payload: bytes) -> DatasetBundle:
    """Parse SLB1 bytes into a validated bundle (values widened to f64)."""
    if len(payload) < len(MAGIC) or payload[: len(MAGIC)] != MAGIC:
        raise InputError("unrecognized format")
    reader = _Reader(payload)
    _, version, n, d, flags = HEADER.unpack(reader.take(HEADER.size, "header"))
    if version != VERSION:
        raise InputError(f"unsupported SLB1 version {version}")
    if n < 1 or d < 1:
        raise InputError(f"header declares empty bundle n={n}, d={d}")

    embeddings = np.frombuffer(reader.take(4 * n * d, "embeddings"), dtype="<f4").reshape(n, d)
    losses = np.frombuffer(reader.take(4 * n, "losses"), dtype="<f4")
    correct: Optional[np.ndarray] = None
    slice_label: Optional[np.ndarray] = None
    ids: Optional[List[str]] = None
    if flags & FLAG_CORRECT:
        correct = _flags_array(reader.take(n, "correctness"), "correctness")
    if flags & FLAG_SLICE_LABEL:
        slice_label = _flags_array(reader.take(n, "slice labels"), "slice label")
    if flags & FLAG_IDS:
        ids = []
        for _ in range(n):
            (length,) = struct.unpack("<H", reader.take(2, "id length"))
            try:
                ids.append(reader.take(length, "id").decode("utf-8"))
            except UnicodeDecodeError as e:
                raise InputError(f"identifier is not UTF-8: {e}")
    if reader.offset != len(payload):
        raise InputError(
            f"header/payload length mismatch: {len(payload) - reader.offset} trailing bytes"
        )

    return DatasetBundle(
        embeddings=EmbeddingSet(embeddings.astype(np.float64)),
        losses=LossVector(losses.astype(np.float64)),
        outcomes=OutcomeVector(correct=correct, slice_label=slice_label),
        ids=ids,
    )


def save_binary(bundle: DatasetBundle, path: str) -> None:
    """Write a bundle as SLB1."""
    payload = encode_bundle(bundle)
    try:
        with open(path, "wb") as f:
            f.write(payload)
    except OSError as e:
        raise InputError(f"cannot write {path}: {e}")


def load_binary(path: str) -> DatasetBundle:
    """Read an SLB1 file."""
    try:
        with open(path, "rb") as f:
            payload = f.read()
    except FileNotFoundError:
        raise InputError(f"missing file: {path}")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}")
    return decode_bundle(payload)
