"""Unit tests for dataset loading, validation, SLB1 storage and splitting."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from slicescope.dataset_io import DatasetBundle, EmbeddingSet, LossVector, OutcomeVector, split, split_indices
from slicescope.dataset_io.binary import HEADER, decode_bundle, encode_bundle, load_binary, save_binary
from slicescope.dataset_io.parsers import CsvSchema, load_csv, load_csv_column
from slicescope.dataset_io.validation import ArrayValidator
from slicescope.errors import ConfigError, InputError


def write(tmp_path: Path, text: str, name: str = "data.csv") -> str:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestCsv:
    """CSV parsing in wide and packed layouts."""

    def test_wide_layout(self, tmp_path: Path) -> None:
        """Test a 3-row CSV with d=2 embeddings."""
        path = write(tmp_path, "id,emb_0,emb_1,loss\na,0.0,1.0,0.1\nb,1.0,0.0,0.2\nc,2.0,2.0,0.3\n")
        bundle = load_csv(path, CsvSchema(embedding_prefix="emb_", id_column="id"))

        assert bundle.n == 3
        assert bundle.d == 2
        assert bundle.losses.values.tolist() == pytest.approx([0.1, 0.2, 0.3], rel=1e-7)
        assert bundle.losses.values.tolist() == np.float32([0.1, 0.2, 0.3]).astype(np.float64).tolist()
        assert bundle.sample_ids == ["a", "b", "c"]

    def test_packed_layout(self, tmp_path: Path) -> None:
        """Test one semicolon-delimited embedding column."""
        path = write(tmp_path, "vec,loss,correct\n0;1;2,0.5,true\n3;4;5,0.25,0\n")
        bundle = load_csv(path, CsvSchema(packed_embedding_column="vec", correct_column="correct"))

        assert bundle.d == 3
        assert bundle.embeddings.data[1].tolist() == [3.0, 4.0, 5.0]
        assert bundle.outcomes.correct.tolist() == [True, False]
        assert bundle.outcomes.slice_label is None

    def test_default_ids(self, tmp_path: Path) -> None:
        """Test identifiers default to row-<index>."""
        path = write(tmp_path, "emb_0,loss\n1,0\n2,0\n")
        bundle = load_csv(path, CsvSchema(embedding_prefix="emb_"))
        assert bundle.sample_ids == ["row-0", "row-1"]

    def test_nan_entry_located(self, tmp_path: Path) -> None:
        """Test a NaN embedding is reported with row and column."""
        path = write(tmp_path, "emb_0,emb_1,loss\n0,1,0.1\n1,nan,0.2\n")
        with pytest.raises(InputError) as exc:
            load_csv(path, CsvSchema(embedding_prefix="emb_"))
        assert exc.value.row == 1
        assert exc.value.column == "emb_1"
        assert "NaN entry" in str(exc.value)

    def test_single_precision_overflow(self, tmp_path: Path) -> None:
        """Test values beyond the f32 range are located."""
        path = write(tmp_path, "emb_0,emb_1,loss\n0,1,0.1\n1,1e300,0.2\n")
        with pytest.raises(InputError, match="single-precision") as exc:
            load_csv(path, CsvSchema(embedding_prefix="emb_"))
        assert exc.value.row == 1
        assert exc.value.column == "emb_1"

    def test_negative_loss(self, tmp_path: Path) -> None:
        """Test negative losses are rejected, not clamped."""
        path = write(tmp_path, "emb_0,loss\n0,0.1\n1,-1\n")
        with pytest.raises(InputError, match="negative loss"):
            load_csv(path, CsvSchema(embedding_prefix="emb_"))

    def test_non_numeric_cell(self, tmp_path: Path) -> None:
        """Test a text cell in a numeric column."""
        path = write(tmp_path, "emb_0,loss\nabc,0.1\n")
        with pytest.raises(InputError, match="non-numeric cell") as exc:
            load_csv(path, CsvSchema(embedding_prefix="emb_"))
        assert exc.value.row == 0

    def test_ragged_packed_rows(self, tmp_path: Path) -> None:
        """Test packed rows of different widths."""
        path = write(tmp_path, "vec,loss\n0;1,0.1\n0;1;2,0.2\n")
        with pytest.raises(InputError, match="ragged embedding row") as exc:
            load_csv(path, CsvSchema(packed_embedding_column="vec"))
        assert exc.value.row == 1

    def test_missing_loss_column(self, tmp_path: Path) -> None:
        """Test the missing column is named."""
        path = write(tmp_path, "emb_0,score\n0,0.1\n")
        with pytest.raises(InputError, match="'loss'"):
            load_csv(path, CsvSchema(embedding_prefix="emb_"))

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test a nonexistent path."""
        with pytest.raises(InputError, match="missing file"):
            load_csv(str(tmp_path / "absent.csv"), CsvSchema(embedding_prefix="emb_"))

    def test_schema_needs_one_layout(self) -> None:
        """Test the schema rejects ambiguous embedding layouts."""
        with pytest.raises(ValueError):
            CsvSchema()
        with pytest.raises(ValueError):
            CsvSchema(embedding_prefix="emb_", packed_embedding_column="vec")

    def test_category_column(self, tmp_path: Path) -> None:
        """Test reading a raw category column."""
        path = write(tmp_path, "emb_0,loss,label\n0,0.1,cat\n1,0.2,dog\n")
        assert load_csv_column(path, "label").tolist() == ["cat", "dog"]


def test_validator_infinite_entry() -> None:
    """Test infinite entries are located."""
    data = np.array([[0.0, 1.0], [np.inf, 2.0]])
    with pytest.raises(InputError, match="infinite entry") as exc:
        ArrayValidator.finite_matrix(data)
    assert exc.value.row == 1


def test_bundle_length_mismatch() -> None:
    """Test component lengths must agree."""
    with pytest.raises(InputError):
        DatasetBundle(embeddings=EmbeddingSet(np.zeros((3, 2))), losses=LossVector(np.zeros(2)))


def test_bundle_is_read_only(make_bundle: Callable[..., DatasetBundle]) -> None:
    """Test bundle arrays cannot be mutated."""
    bundle = make_bundle()
    with pytest.raises(ValueError):
        bundle.embeddings.data[0, 0] = 1.0


class TestBinary:
    """SLB1 round trips and framing errors."""

    @staticmethod
    def f32_bundle(n: int, d: int, seed: int = 0, **kwargs: object) -> DatasetBundle:
        rng = np.random.default_rng(seed)
        data = rng.standard_normal((n, d)).astype(np.float32).astype(np.float64)
        losses = rng.random(n).astype(np.float32).astype(np.float64)
        return DatasetBundle(embeddings=EmbeddingSet(data), losses=LossVector(losses), **kwargs)

    def test_round_trip_with_all_fields(self, tmp_path: Path) -> None:
        """Test save then load reproduces every field."""
        bundle = self.f32_bundle(
            6,
            3,
            outcomes=OutcomeVector(correct=[True, False] * 3, slice_label=[False] * 5 + [True]),
            ids=[f"s{i}" for i in range(6)],
        )
        path = str(tmp_path / "b.slb")
        save_binary(bundle, path)
        assert load_binary(path).equals(bundle)

    def test_round_trip_preserves_absence(self) -> None:
        """Test optional fields stay absent."""
        bundle = self.f32_bundle(4, 2)
        loaded = decode_bundle(encode_bundle(bundle))
        assert loaded.equals(bundle)
        assert loaded.outcomes.correct is None
        assert loaded.ids is None

    def test_minimal_bundle(self) -> None:
        """Test n=1, d=1."""
        bundle = self.f32_bundle(1, 1)
        assert decode_bundle(encode_bundle(bundle)).equals(bundle)

    def test_csv_round_trip(self, tmp_path: Path) -> None:
        """Test load_csv then save_binary and load_binary gives the same bundle."""
        path = write(tmp_path, "id,emb_0,emb_1,loss\na,0.0,1.0,0.1\nb,1.0,0.0,0.2\nc,2.0,2.0,0.3\n")
        bundle = load_csv(path, CsvSchema(embedding_prefix="emb_", id_column="id"))
        target = str(tmp_path / "b.slb")
        save_binary(bundle, target)
        assert load_binary(target).equals(bundle)

    def test_csv_packed_round_trip(self, tmp_path: Path) -> None:
        """Test packed embeddings with decimal fractions survive SLB1."""
        path = write(tmp_path, "vec,loss\n0.1;0.7,0.33\n-1.3;2.9,1.1\n")
        bundle = load_csv(path, CsvSchema(packed_embedding_column="vec"))
        assert decode_bundle(encode_bundle(bundle)).equals(bundle)

    def test_save_load_save_is_byte_identical(self, tmp_path: Path) -> None:
        """Test re-encoding a loaded file reproduces its bytes."""
        payload = encode_bundle(self.f32_bundle(5, 4, seed=3))
        assert encode_bundle(decode_bundle(payload)) == payload

    def test_wrong_magic(self) -> None:
        """Test an unknown header."""
        payload = b"XXXX" + encode_bundle(self.f32_bundle(2, 2))[4:]
        with pytest.raises(InputError, match="unrecognized format"):
            decode_bundle(payload)

    def test_truncated_payload(self) -> None:
        """Test a header declaring n=5 over a payload for n=4."""
        payload = encode_bundle(self.f32_bundle(4, 2))
        _, version, _, d, flags = HEADER.unpack(payload[: HEADER.size])
        forged = HEADER.pack(b"SLB1", version, 5, d, flags) + payload[HEADER.size :]
        with pytest.raises(InputError, match="truncated payload"):
            decode_bundle(forged)

    def test_trailing_bytes(self) -> None:
        """Test extra bytes after the payload."""
        payload = encode_bundle(self.f32_bundle(2, 2)) + b"\x00"
        with pytest.raises(InputError, match="length mismatch"):
            decode_bundle(payload)


class TestSplit:
    """Seeded partitions."""

    def test_halves_partition(self) -> None:
        """Test n=10 split into two disjoint halves covering all indices."""
        parts = split_indices(10, [0.5, 0.5], seed=7)
        assert [p.size for p in parts] == [5, 5]
        assert sorted(np.concatenate(parts).tolist()) == list(range(10))

    def test_deterministic(self) -> None:
        """Test the same seed gives the same partition."""
        first = split_indices(10, [0.5, 0.5], seed=7)
        second = split_indices(10, [0.5, 0.5], seed=7)
        assert all(np.array_equal(a, b) for a, b in zip(first, second))

    def test_remainder_rule(self) -> None:
        """Test [0.99, 0.01] with n=10 gives sizes 9 and 1."""
        assert [p.size for p in split_indices(10, [0.99, 0.01], seed=0)] == [9, 1]

    def test_remainder_to_leading_parts(self) -> None:
        """Test leftover samples go to the first parts."""
        assert [p.size for p in split_indices(11, [0.5, 0.5], seed=0)] == [6, 5]

    def test_empty_part(self) -> None:
        """Test too many parts for the sample count."""
        with pytest.raises(ConfigError):
            split_indices(2, [0.25, 0.25, 0.25, 0.25], seed=0)

    def test_bad_fractions(self) -> None:
        """Test fractions must be positive and sum to one."""
        with pytest.raises(ConfigError):
            split_indices(10, [0.5, 0.6], seed=0)
        with pytest.raises(ConfigError):
            split_indices(10, [1.5, -0.5], seed=0)

    def test_split_carries_ids(self, make_bundle: Callable[..., DatasetBundle]) -> None:
        """Test parts keep the original identifiers."""
        bundle = make_bundle(n=8)
        parts = split(bundle, [0.5, 0.5], seed=1)
        ids = sorted(parts[0].sample_ids + parts[1].sample_ids, key=lambda s: int(s.split("-")[1]))
        assert ids == bundle.sample_ids
