"""
Shared plumbing for the structinfer command line: error mapping, preset loading and
rich output helpers.
"""

import functools
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Optional

import click
import yaml
from rich.console import Console
from rich.table import Table

from ..config import PACKAGED_PRESETS_DIR, settings
from ..exceptions import ConfigurationError, StructInferError
from ..models import EpochMetrics, EvaluationReport

logger = logging.getLogger("structinfer.cli")

console = Console()

REFERENCE_PRESET = "reference"


class CommandError(click.ClickException):
    """A library error surfaced to the user as a usage failure."""

    exit_code = 2


def handles_errors(func: Callable) -> Callable:
    """Map library errors to exit code 2 with a readable message."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except StructInferError as e:
            logger.error(f"{func.__name__} failed: {e}")
            raise CommandError(str(e))

    return wrapper


def resolve_preset_path(preset: Optional[str]) -> Optional[Path]:
    """``reference`` names the packaged preset (or the one configured in settings)."""
    if not preset:
        return None
    if preset == REFERENCE_PRESET:
        return settings.reference_preset_path
    return Path(preset).expanduser()


def load_preset(path: Path) -> Dict[str, Dict[str, Any]]:
    """
    Read a YAML preset whose top-level sections are subcommand names.

    Raises:
        ConfigurationError: If the file is missing, unreadable or not a mapping of mappings
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigurationError(f"Cannot read preset {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Preset {path} is not valid YAML: {e}")
    if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
        raise ConfigurationError(f"Preset {path} must map subcommand names to option mappings")
    logger.info(f"Loaded preset {path} with sections {sorted(data)}")
    return {str(k).replace("_", "-"): v for k, v in data.items()}


def packaged_preset_text() -> str:
    return (PACKAGED_PRESETS_DIR / "reference.yml").read_text(encoding="utf-8")


def print_resolved(ctx: click.Context) -> None:
    """Print every option of the running command with its resolved value."""
    table = Table(title=f"structinfer {ctx.info_name}", show_header=True, header_style="bold")
    table.add_column("option")
    table.add_column("value")
    for name, value in sorted(ctx.params.items()):
        table.add_row(name, repr(value) if not isinstance(value, str) else value)
    console.print(table)


def print_report(report: EvaluationReport, title: str) -> None:
    table = Table(title=title, header_style="bold")
    for column in ("t", "scene acc", "person acc", "gate pp", "gate ps"):
        table.add_column(column, justify="right")
    for step in report.timesteps:
        table.add_row(
            str(step.timestep),
            f"{step.scene_accuracy:.4f}",
            f"{step.person_accuracy:.4f}",
            f"{step.mean_gate_pp:.4f}",
            f"{step.mean_gate_ps:.4f}",
        )
    console.print(table)
    console.print(
        f"unary baseline: scene {report.unary_scene_accuracy:.4f}, "
        f"person {report.unary_person_accuracy:.4f} ({report.instances} frames)"
    )


def print_epoch(metrics: EpochMetrics) -> None:
    accuracies = " ".join(
        f"t{s.timestep}={s.scene_accuracy:.3f}/{s.person_accuracy:.3f}"
        for s in metrics.evaluation.timesteps
    )
    console.print(
        f"[cyan]{metrics.variant}[/cyan] {metrics.phase} epoch {metrics.epoch}: "
        f"loss {metrics.loss.total:.4f} | scene/person {accuracies}"
    )


def print_ablation(rows: Iterable[EpochMetrics]) -> None:
    rows = list(rows)
    if not rows:
        return
    steps = [s.timestep for s in rows[0].evaluation.timesteps]
    table = Table(title="Scene accuracy by iteration (person accuracy)", header_style="bold")
    table.add_column("variant")
    for t in steps:
        table.add_column(f"t={t}", justify="right")
    for row in rows:
        table.add_row(
            row.variant,
            *(
                f"{s.scene_accuracy:.4f} ({s.person_accuracy:.4f})"
                for s in row.evaluation.timesteps
            ),
        )
    console.print(table)
