"""
Comma-separated tables: per-epoch metrics and exported gate values.
"""

import csv
import logging
import os
from typing import Dict, Iterable, List, Sequence

from ..exceptions import PersistenceError
from ..models import EpochMetrics, GateRecord

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "variant",
    "epoch",
    "timestep",
    "scene_accuracy",
    "person_accuracy",
    "loss_total",
    "loss_ce_scene",
    "loss_ce_person",
    "loss_gate_l1",
    "mean_gate_pp",
    "mean_gate_ps",
    "phase",
]

GATE_COLUMNS = ["instance", "timestep", "edge_kind", "node_a", "node_b", "gate", "category"]


def metrics_rows(history: Iterable[EpochMetrics]) -> List[Dict[str, object]]:
    """Flatten epoch metrics into one row per timestep."""
    rows: List[Dict[str, object]] = []
    for entry in history:
        for step in entry.evaluation.timesteps:
            rows.append(
                {
                    "variant": entry.variant,
                    "epoch": entry.epoch,
                    "timestep": step.timestep,
                    "scene_accuracy": repr(step.scene_accuracy),
                    "person_accuracy": repr(step.person_accuracy),
                    "loss_total": repr(entry.loss.total),
                    "loss_ce_scene": repr(entry.loss.ce_scene),
                    "loss_ce_person": repr(entry.loss.ce_person),
                    "loss_gate_l1": repr(entry.loss.gate_l1),
                    "mean_gate_pp": repr(step.mean_gate_pp),
                    "mean_gate_ps": repr(step.mean_gate_ps),
                    "phase": entry.phase,
                }
            )
    return rows


def _ensure_parent(path: str) -> None:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_metrics(path: str, history: Sequence[EpochMetrics]) -> str:
    """
    Write the metrics table.

    Raises:
        PersistenceError: If the path cannot be written
    """
    rows = metrics_rows(history)
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=METRICS_COLUMNS, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    except OSError as e:
        logger.error(f"Error writing metrics to {path}: {e}")
        raise PersistenceError(f"Cannot write metrics to {path}: {e}")
    logger.info(f"Wrote {len(rows)} metric rows to {path}")
    return path


def read_metrics(path: str) -> List[Dict[str, object]]:
    """Read a metrics table back; numeric columns come back as int or float."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.DictReader(f)
            raw = list(reader)
    except OSError as e:
        raise PersistenceError(f"Cannot read metrics {path}: {e}")
    rows: List[Dict[str, object]] = []
    for row in raw:
        parsed: Dict[str, object] = dict(row)
        for column in ("epoch", "timestep"):
            parsed[column] = int(row[column])
        for column in METRICS_COLUMNS[3:11]:
            parsed[column] = float(row[column])
        rows.append(parsed)
    return rows


def write_gate_records(
    path: str,
    records: Iterable[GateRecord],
    irrelevant_below: float,
    useful_above: float,
) -> str:
    """
    Write exported gates, preceded by ``#`` comment lines stating both thresholds.

    Raises:
        PersistenceError: If the path cannot be written
    """
    count = 0
    try:
        _ensure_parent(path)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# irrelevant_below={irrelevant_below!r}\n")
            f.write(f"# useful_above={useful_above!r}\n")
            writer = csv.DictWriter(f, fieldnames=GATE_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for record in records:
                row = record.model_dump()
                row["node_b"] = "scene" if record.node_b is None else record.node_b
                row["gate"] = repr(record.gate)
                writer.writerow(row)
                count += 1
    except OSError as e:
        logger.error(f"Error writing gates to {path}: {e}")
        raise PersistenceError(f"Cannot write gates to {path}: {e}")
    logger.info(f"Wrote {count} gate values to {path}")
    return path
