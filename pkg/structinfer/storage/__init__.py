"""
Storage implementations for datasets, checkpoints and result tables.

Datasets are newline-delimited JSON, checkpoints are single JSON objects and metrics and
gate exports are comma-separated tables.
"""

from .checkpoint_store import CHECKPOINT_FORMAT_VERSION, JsonCheckpointStore
from .dataset_store import DATASET_FORMAT_VERSION, JsonlDatasetStore, frames_equal
from .memory_store import MemoryStore
from .metrics_store import read_metrics, write_gate_records, write_metrics

__all__ = [
    "CHECKPOINT_FORMAT_VERSION",
    "DATASET_FORMAT_VERSION",
    "JsonCheckpointStore",
    "JsonlDatasetStore",
    "MemoryStore",
    "frames_equal",
    "read_metrics",
    "write_gate_records",
    "write_metrics",
]
