import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pqdaf.errors import ValidationError
from pqdaf.samples import (
    CATEGORIES,
    NUM_CATEGORIES,
    DatasetManifest,
    ImageBuffer,
    LabeledSample,
    category,
    per_class_counts,
)

from conftest import tiny_image

TABLE_DESCRIPTIONS = [
    "Normal driving",
    "Texting with right hand",
    "Holding phone to right ear",
    "Texting with left hand",
    "Holding phone to left ear",
    "Adjusting multimedia",
    "Drinking water",
    "Reaching toward back seat",
    "Applying makeup",
    "Talking to passenger",
]


def test_ten_categories_bijective_with_codes():
    assert NUM_CATEGORIES == 10
    assert [c.id for c in CATEGORIES] == list(range(10))
    assert [c.code for c in CATEGORIES] == [f"C{i}" for i in range(10)]
    assert [c.description for c in CATEGORIES] == TABLE_DESCRIPTIONS


@pytest.mark.parametrize("key", [0, 5, 9, "C3", CATEGORIES[7], np.int64(2)])
def test_category_lookup(key):
    assert category(key) in CATEGORIES


@pytest.mark.parametrize("key", [-1, 10, 100, "C10", "X1", 1.0, True, None])
def test_category_lookup_rejects(key):
    with pytest.raises(ValidationError):
        category(key)


def test_image_conventions_validated():
    with pytest.raises(ValidationError):
        ImageBuffer(np.full((2, 2, 1), 1.5, dtype=np.float32))
    with pytest.raises(ValidationError):
        ImageBuffer(np.full((2, 2, 1), 300), "file")
    with pytest.raises(ValidationError):
        ImageBuffer(np.zeros((0, 2, 1)))
    with pytest.raises(ValidationError):
        ImageBuffer(np.zeros((2, 2, 2)))
    with pytest.raises(ValidationError):
        ImageBuffer(np.zeros((2, 2, 1)), "raw")


def test_image_is_read_only():
    img = tiny_image()
    with pytest.raises(ValueError):
        img.values[0, 0, 0] = 0.5


@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]))))
def test_file_model_file_round_trip_is_exact(values):
    img = ImageBuffer(values, "file")
    assert img.to_model().to_file() == img


@given(arrays(np.float32, (5, 5, 1), elements=st.floats(-1, 1, width=32)))
def test_model_file_model_within_quantization(values):
    img = ImageBuffer(values)
    back = img.to_file().to_model().values
    assert np.max(np.abs(back - img.values)) <= 1.0 / 255.0 + 1e-6


def test_png_round_trip(tmp_path):
    img = ImageBuffer(np.arange(48, dtype=np.uint8).reshape(4, 4, 3) * 5, "file")
    img.save(tmp_path / "a.png")
    assert ImageBuffer.load(tmp_path / "a.png") == img


def test_real_sample_cannot_carry_score():
    with pytest.raises(ValidationError):
        LabeledSample("a", CATEGORIES[0], "real", score=0.5)


@pytest.mark.parametrize("score", [-0.01, 1.01, float("nan")])
def test_score_range(score):
    with pytest.raises(ValidationError):
        LabeledSample("a", CATEGORIES[0], "synthetic", score=score)


def test_manifest_rejects_duplicate_ids():
    s = LabeledSample("dup", CATEGORIES[0], "real")
    with pytest.raises(ValidationError):
        DatasetManifest((s, s))


def test_per_class_counts_empty():
    assert per_class_counts(DatasetManifest()) == {c: 0 for c in CATEGORIES}


def test_per_class_counts_balanced():
    recs = [LabeledSample(f"{c.code}-{j}", c, "real") for c in CATEGORIES for j in range(10)]
    assert set(per_class_counts(DatasetManifest(tuple(recs))).values()) == {10}


def test_per_class_counts_matches_linear_scan():
    rng = np.random.default_rng(57)
    labels = rng.integers(0, 10, 57)
    recs = [LabeledSample(f"s{i}", int(c), "real") for i, c in enumerate(labels)]
    counts = per_class_counts(DatasetManifest(tuple(recs)))
    tally = [0] * 10
    for c in labels:
        tally[c] += 1
    assert [counts[c] for c in CATEGORIES] == tally
    assert sum(counts.values()) == 57
