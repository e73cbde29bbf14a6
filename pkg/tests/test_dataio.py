from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from mmsvm.core.errors import DatasetError, DimensionMismatchError, ParseError
from mmsvm.dataio import (
    Dataset,
    Sample,
    SplitSpec,
    build_design_matrix,
    feature_matrix,
    load_dataset,
    parse_libsvm,
    serialize_libsvm,
    split,
)


def test_parse_line_with_features() -> None:
    ds = parse_libsvm(b"+1 3:1 11:0.5\n")
    assert len(ds) == 1
    assert ds.samples[0].label == 1
    assert dict(ds.samples[0].features) == {3: 1.0, 11: 0.5}
    assert ds.num_features == 11


def test_parse_label_only_line() -> None:
    ds = parse_libsvm("-1\n+1 1:2\n")
    assert ds.samples[0] == Sample(label=-1, features={})


def test_parse_zero_one_labels() -> None:
    ds = parse_libsvm("0 1:1\n1 2:1\n0 1:0.5\n")
    assert [s.label for s in ds.samples] == [-1, 1, -1]


def test_parse_one_two_labels() -> None:
    ds = parse_libsvm("2 1:1\n1 2:1\n")
    assert [s.label for s in ds.samples] == [-1, 1]


def test_parse_skips_comments_and_blank_lines() -> None:
    ds = parse_libsvm("# header\n\n+1 1:1\n   \n-1 2:1\n")
    assert len(ds) == 2


@pytest.mark.parametrize(
    "text, line_number",
    [
        ("+1 1:1\n-1 x:1\n", 2),
        ("+1 2:1 1:1\n", 1),
        ("+1 0:1\n", 1),
        ("+1 1:1\n+1 3:abc\n", 2),
        ("+1 1:1\nfoo 1:1\n", 2),
        ("+1 1:1\n5 1:1\n", 2),
        ("-1 1:1\n0 1:1\n", 2),
        ("+1 1:nan\n", 1),
    ],
)
def test_parse_errors_carry_line_number(text: str, line_number: int) -> None:
    with pytest.raises(ParseError) as exc_info:
        parse_libsvm(text)
    assert exc_info.value.line_number == line_number


def test_parse_invalid_utf8_reports_line() -> None:
    with pytest.raises(ParseError) as exc_info:
        parse_libsvm(b"+1 1:0.5\n\xff\xfe 2:1\n")
    assert exc_info.value.line_number == 2
    assert "0xff" in str(exc_info.value)


def test_parse_empty_file() -> None:
    with pytest.raises(DatasetError):
        parse_libsvm(b"# only a comment\n\n")


def test_round_trip(dataset: Dataset) -> None:
    again = parse_libsvm(serialize_libsvm(dataset))
    assert again.samples == dataset.samples
    assert again.num_features == dataset.num_features


def test_num_features_below_max_index() -> None:
    with pytest.raises(DimensionMismatchError):
        Dataset(samples=(Sample(label=1, features={4: 1.0}),), num_features=3)


def test_load_dataset_override(tmp_path: Path) -> None:
    path = tmp_path / "tiny.txt"
    path.write_text("+1 1:1\n-1 2:1\n")
    ds = load_dataset(path, num_features=10)
    assert ds.num_features == 10
    assert ds.name == "tiny"
    with pytest.raises(DimensionMismatchError):
        load_dataset(path, num_features=1)


def test_load_dataset_missing_file(tmp_path: Path) -> None:
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing.txt")


def _ten_samples() -> Dataset:
    samples = tuple(
        Sample(label=1 if i % 2 else -1, features={1: float(i)}) for i in range(10)
    )
    return Dataset(samples=samples, num_features=3, name="ten")


def test_split_sizes() -> None:
    train, test = split(_ten_samples(), SplitSpec(train_fraction=0.8, seed=3))
    assert (len(train), len(test)) == (8, 2)
    assert train.num_features == test.num_features == 3


def test_split_full_fraction() -> None:
    ds = _ten_samples()
    train, test = split(ds, SplitSpec(train_fraction=1.0, seed=3))
    assert len(test) == 0
    assert sorted(s.features[1] for s in train.samples) == [float(i) for i in range(10)]


def test_split_is_deterministic_partition() -> None:
    ds = _ten_samples()
    first = split(ds, SplitSpec(train_fraction=0.7, seed=11))
    second = split(ds, SplitSpec(train_fraction=0.7, seed=11))
    assert first == second
    identities = [s.features[1] for s in first[0].samples + first[1].samples]
    assert sorted(identities) == [float(i) for i in range(10)]


def test_split_empty_train() -> None:
    with pytest.raises(DatasetError):
        split(_ten_samples(), SplitSpec(train_fraction=0.05, seed=0))


def test_split_spec_validation() -> None:
    with pytest.raises(ValidationError):
        SplitSpec(train_fraction=0.0)
    with pytest.raises(ValidationError):
        SplitSpec(train_fraction=1.5)


def test_split_warns_on_single_class(caplog: pytest.LogCaptureFixture) -> None:
    ds = Dataset(
        samples=tuple(Sample(label=1, features={1: 1.0}) for _ in range(4)),
        num_features=1,
    )
    split(ds, SplitSpec(train_fraction=0.5))
    assert "only has labels" in caplog.text


def test_design_matrix_rows() -> None:
    ds = Dataset(
        samples=(
            Sample(label=-1, features={1: 1.0, 2: 2.0}),
            Sample(label=1, features={}),
        ),
        num_features=2,
    )
    lmat = build_design_matrix(ds).matrix
    assert lmat.tolist() == [[-1.0, -2.0, -1.0], [0.0, 0.0, 1.0]]


def test_design_matrix_last_column_is_label(dataset: Dataset) -> None:
    design = build_design_matrix(dataset)
    assert design.matrix.shape == (len(dataset), dataset.num_features + 1)
    assert np.array_equal(design.matrix[:, -1], dataset.labels)


def test_feature_matrix_rejects_narrow_width(dataset: Dataset) -> None:
    with pytest.raises(DimensionMismatchError):
        feature_matrix(dataset, num_features=dataset.num_features - 1)


@pytest.mark.a1a
def test_a1a_design_matrix_shape(a1a_path: Path) -> None:
    train, test = split(load_dataset(a1a_path), SplitSpec(train_fraction=0.8, seed=0))
    assert (len(train), len(test)) == (1284, 321)
    design = build_design_matrix(train)
    assert design.matrix.shape == (1284, train.num_features + 1)
