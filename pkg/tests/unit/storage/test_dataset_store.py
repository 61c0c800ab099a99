"""
Tests for the newline-delimited JSON dataset store.
"""

import json

import numpy as np
import pytest

from structinfer.exceptions import PersistenceError, UnsupportedVersionError
from structinfer.models import Dims, FrameInstance, SynthConfig
from structinfer.storage import JsonlDatasetStore, frames_equal
from structinfer.storage.dataset_store import format_number
from structinfer.synth import generate


@pytest.fixture
def store(tmp_path):
    return JsonlDatasetStore(base_dir=str(tmp_path))


def test_round_trip_is_exact(store, small_dataset, dims):
    path = store.save_dataset(small_dataset, dims, "train.jsonl")
    loaded = store.load_dataset(path)
    assert loaded.dims == dims
    assert len(loaded.instances) == len(small_dataset)
    for before, after in zip(small_dataset, loaded.instances):
        assert frames_equal(before.frame, after.frame)
        assert before.relevance == after.relevance


def test_plain_frames_and_unlabeled_records(store):
    dims = Dims(A=2, S=2)
    frame = FrameInstance(scene_unary=[0.1, 0.9], person_unaries=[[1 / 3, 2 / 3]])
    store.save_dataset([frame], dims, "plain.jsonl")
    loaded = store.load_dataset("plain.jsonl")
    assert loaded.instances[0].relevance is None
    assert not loaded.frames[0].is_labeled
    assert frames_equal(loaded.frames[0], frame)


def test_saving_twice_gives_identical_bytes(store, tmp_path):
    data = generate(SynthConfig(dims=Dims(A=5, S=5), seed=7, count=10))
    store.save_dataset(data, Dims(A=5, S=5), "a.jsonl")
    store.save_dataset(data, Dims(A=5, S=5), "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_format_number_round_trips():
    for value in (0.1, 1 / 3, 2.0**-1074, 1e300, 0.7000000000000001):
        assert float(format_number(value)) == value


def test_missing_header(store, tmp_path):
    record = {"scene_unary": [0.5, 0.5], "person_unaries": [[0.5, 0.5]]}
    (tmp_path / "bad.jsonl").write_text(json.dumps(record) + "\n")
    with pytest.raises(PersistenceError, match="missing header"):
        store.load_dataset("bad.jsonl")
    (tmp_path / "empty.jsonl").write_text("")
    with pytest.raises(PersistenceError, match="missing header"):
        store.load_dataset("empty.jsonl")


def test_bad_record_names_its_line(store, tmp_path):
    header = json.dumps({"A": 2, "S": 2, "format_version": 1})
    good = json.dumps({"scene_unary": [0.5, 0.5], "person_unaries": [[0.5, 0.5]]})
    off_simplex = json.dumps({"scene_unary": [0.5, 0.5], "person_unaries": [[0.5, 0.7]]})
    (tmp_path / "bad.jsonl").write_text("\n".join([header, good, off_simplex]) + "\n")
    with pytest.raises(PersistenceError, match="line 3"):
        store.load_dataset("bad.jsonl")
    (tmp_path / "broken.jsonl").write_text("\n".join([header, '{"scene_unary": [0.5,']) + "\n")
    with pytest.raises(PersistenceError, match="line 2"):
        store.load_dataset("broken.jsonl")


def test_unknown_format_version(store, tmp_path):
    (tmp_path / "future.jsonl").write_text(json.dumps({"A": 2, "S": 2, "format_version": 999}))
    with pytest.raises(UnsupportedVersionError):
        store.load_dataset("future.jsonl")


def test_missing_file(store):
    with pytest.raises(PersistenceError):
        store.load_dataset("nowhere.jsonl")


def test_written_values_parse_back_exactly(store, tmp_path, dims, small_dataset):
    store.save_dataset(small_dataset[:1], dims, "one.jsonl")
    lines = (tmp_path / "one.jsonl").read_text().splitlines()
    record = json.loads(lines[1])
    np.testing.assert_array_equal(record["scene_unary"], small_dataset[0].frame.scene_unary)


@pytest.mark.parametrize(
    "field,value",
    [("scene_label", 1.9), ("action_labels", [0.5]), ("relevance", ["false"])],
)
def test_records_are_not_coerced(store, tmp_path, field, value):
    header = json.dumps({"A": 2, "S": 2, "format_version": 1})
    record = {
        "scene_unary": [0.5, 0.5],
        "person_unaries": [[0.5, 0.5]],
        "scene_label": 1,
        "action_labels": [0],
        field: value,
    }
    (tmp_path / "odd.jsonl").write_text("\n".join([header, json.dumps(record)]) + "\n")
    with pytest.raises(PersistenceError, match="line 2"):
        store.load_dataset("odd.jsonl")
