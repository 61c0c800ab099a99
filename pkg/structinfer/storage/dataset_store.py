import json
import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from ..exceptions import InstanceValidationError, PersistenceError, UnsupportedVersionError
from ..interfaces import DatasetItems, DatasetStore
from ..models import DatasetFile, Dims, FrameInstance, SynthInstance
from ..validation import validate_instance

DATASET_FORMAT_VERSION = 1


def format_number(value: float) -> str:
    """Decimal text with 17 significant digits; parses back to the identical double."""
    return format(float(value), ".17g")


def _vector(values) -> str:
    return "[" + ",".join(format_number(v) for v in values) + "]"


def _record_line(item) -> str:
    frame = item.frame if isinstance(item, SynthInstance) else item
    relevance = item.relevance if isinstance(item, SynthInstance) else None
    parts = [
        f'"scene_unary":{_vector(frame.scene_unary)}',
        '"person_unaries":[' + ",".join(_vector(row) for row in frame.person_unaries) + "]",
    ]
    if frame.scene_label is not None:
        parts.append(f'"scene_label":{int(frame.scene_label)}')
    if frame.action_labels is not None:
        parts.append('"action_labels":' + json.dumps([int(a) for a in frame.action_labels]))
    if relevance is not None:
        parts.append('"relevance":' + json.dumps([bool(r) for r in relevance]))
    return "{" + ",".join(parts) + "}"


class JsonlDatasetStore(DatasetStore):
    """
    Datasets as newline-delimited JSON: a header record ``{"A", "S", "format_version"}``
    followed by one record per frame.
    """

    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = base_dir
        self.logger = logging.getLogger(__name__)

    def _resolve(self, location: str) -> str:
        if self.base_dir and not os.path.isabs(location):
            return os.path.join(self.base_dir, location)
        return location

    def save_dataset(self, instances: DatasetItems, dims: Dims, location: str) -> str:
        path = self._resolve(location)
        header = {"A": dims.A, "S": dims.S, "format_version": DATASET_FORMAT_VERSION}
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(_record_line(item) for item in instances)
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "w", encoding="utf-8") as f:
                f.write("\n".join(lines) + "\n")
        except OSError as e:
            self.logger.error(f"Error writing dataset to {path}: {e}")
            raise PersistenceError(f"Cannot write dataset to {path}: {e}")
        self.logger.info(f"Saved {len(lines) - 1} frames to {path}")
        return path

    def _parse_header(self, line: str, path: str) -> Dims:
        try:
            header = json.loads(line)
        except json.JSONDecodeError as e:
            raise PersistenceError(f"{path}: line 1: malformed header ({e})")
        if not isinstance(header, dict) or not {"A", "S"} <= header.keys():
            raise PersistenceError(f"{path}: missing header")
        version = header.get("format_version")
        if version != DATASET_FORMAT_VERSION:
            raise UnsupportedVersionError(
                f"{path}: unsupported dataset format_version {version!r}"
            )
        try:
            return Dims(A=int(header["A"]), S=int(header["S"]))
        except Exception as e:
            raise PersistenceError(f"{path}: line 1: invalid dimensions ({e})")

    def _parse_record(self, record: Dict[str, Any], dims: Dims) -> SynthInstance:
        frame = FrameInstance(
            scene_unary=record["scene_unary"],
            person_unaries=record["person_unaries"],
            scene_label=record.get("scene_label"),
            action_labels=record.get("action_labels"),
        )
        validate_instance(frame, dims)
        relevance = record.get("relevance")
        if relevance is not None:
            if len(relevance) != frame.M:
                raise InstanceValidationError(
                    f"relevance has {len(relevance)} entries for {frame.M} persons"
                )
            if not all(isinstance(r, bool) for r in relevance):
                raise InstanceValidationError("relevance flags must be true or false")
        return SynthInstance(frame=frame, relevance=relevance)

    def load_dataset(self, location: str) -> DatasetFile:
        path = self._resolve(location)
        try:
            with open(path, "r", encoding="utf-8") as f:
                lines = f.read().splitlines()
        except OSError as e:
            self.logger.error(f"Error reading dataset {path}: {e}")
            raise PersistenceError(f"Cannot read dataset {path}: {e}")

        lines = [line for line in lines if line.strip()]
        if not lines:
            raise PersistenceError(f"{path}: missing header")
        dims = self._parse_header(lines[0], path)

        instances: List[SynthInstance] = []
        for number, line in enumerate(lines[1:], start=2):
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise PersistenceError("record is not an object")
                instances.append(self._parse_record(record, dims))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise PersistenceError(f"{path}: line {number}: malformed record ({e})")
            except (InstanceValidationError, PersistenceError) as e:
                raise PersistenceError(f"{path}: line {number}: {e}")
        self.logger.info(f"Loaded {len(instances)} frames from {path} (A={dims.A}, S={dims.S})")
        return DatasetFile(dims=dims, instances=instances, format_version=DATASET_FORMAT_VERSION)


def frames_equal(a: FrameInstance, b: FrameInstance) -> bool:
    """Exact equality of every array and label of two frames."""
    if a.scene_label != b.scene_label:
        return False
    if (a.action_labels is None) != (b.action_labels is None):
        return False
    if a.action_labels is not None and not np.array_equal(a.action_labels, b.action_labels):
        return False
    return np.array_equal(a.scene_unary, b.scene_unary) and np.array_equal(
        a.person_unaries, b.person_unaries
    )
