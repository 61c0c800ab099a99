from typing import Optional

import click
from click_help_colors import HelpColorsCommand

from ..config import settings
from ..gate_report import export_gates as export_gate_records
from ..models import EpochMetrics
from ..storage import JsonCheckpointStore, JsonlDatasetStore, write_gate_records, write_metrics
from ..trainer import evaluate, mean_loss
from .common import console, handles_errors, print_report, print_resolved


def _variant_name(gated: bool, mode: str) -> str:
    return f"{'gated-' if gated else ''}{mode}"


@click.command("eval", cls=HelpColorsCommand, help_options_color="green")
@click.option("--data", required=True, help="Labeled dataset file.")
@click.option("--checkpoint", required=True, help="Checkpoint file.")
@click.option(
    "--steps", "T", default=None, type=int, help="Inference steps (default: the trained T)."
)
@click.option("--out-metrics", default=None, help="Metrics CSV to write.")
@click.option(
    "--threads", default=settings.threads, type=click.IntRange(min=1), help="Worker threads."
)
@click.pass_context
@handles_errors
def eval_command(
    ctx: click.Context, data: str, checkpoint: str, T: Optional[int], out_metrics, threads: int
) -> None:
    """Report per-step scene and person accuracy of a trained model."""
    print_resolved(ctx)
    loaded = JsonCheckpointStore().load_checkpoint(checkpoint)
    dataset = JsonlDatasetStore().load_dataset(data)
    params = loaded.params
    steps = T if T is not None else loaded.T
    if dataset.dims != params.dims:
        raise click.BadParameter(
            f"dataset dims A={dataset.dims.A}, S={dataset.dims.S} do not match checkpoint "
            f"dims A={params.dims.A}, S={params.dims.S}",
            param_hint="--data",
        )
    params.check(steps)

    report = evaluate(params, dataset.instances, steps, threads=threads)
    lambda_ = float((loaded.train_config or {}).get("lambda", 0.0))
    variant = _variant_name(params.gated, params.mode)
    print_report(report, title=f"{variant} on {data} (T={steps})")
    if out_metrics:
        entry = EpochMetrics(
            variant=variant,
            phase="eval",
            epoch=0,
            loss=mean_loss(params, dataset.instances, steps, lambda_),
            evaluation=report,
        )
        write_metrics(out_metrics, [entry])
        console.print(f"Wrote metrics to {out_metrics}")


@click.command("export-gates", cls=HelpColorsCommand, help_options_color="green")
@click.option("--data", required=True, help="Dataset file.")
@click.option("--checkpoint", required=True, help="Checkpoint file.")
@click.option(
    "--steps", "T", default=None, type=int, help="Inference steps (default: the trained T)."
)
@click.option("--out", required=True, help="Gate CSV to write.")
@click.option(
    "--irrelevant-below",
    default=settings.gate_irrelevant_threshold,
    type=float,
    help="Gates below this are irrelevant.",
)
@click.option(
    "--useful-above",
    default=settings.gate_useful_threshold,
    type=float,
    help="Gates above this are useful.",
)
@click.pass_context
@handles_errors
def export_gates(
    ctx: click.Context,
    data: str,
    checkpoint: str,
    T: Optional[int],
    out: str,
    irrelevant_below: float,
    useful_above: float,
) -> None:
    """Write every edge gate per frame and step with its category."""
    print_resolved(ctx)
    loaded = JsonCheckpointStore().load_checkpoint(checkpoint)
    dataset = JsonlDatasetStore().load_dataset(data)
    params = loaded.params
    steps = T if T is not None else loaded.T
    if dataset.dims != params.dims:
        raise click.BadParameter(
            f"dataset dims A={dataset.dims.A}, S={dataset.dims.S} do not match checkpoint "
            f"dims A={params.dims.A}, S={params.dims.S}",
            param_hint="--data",
        )
    records = export_gate_records(params, dataset.frames, steps, irrelevant_below, useful_above)
    write_gate_records(out, records, irrelevant_below, useful_above)
    console.print(f"Wrote gates for {len(dataset.instances)} frames to {out}")
