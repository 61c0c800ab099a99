from typing import Callable, Optional

import click
from click_help_colors import HelpColorsCommand

from ..ablation import run_ablation
from ..config import settings
from ..models import TrainConfig
from ..params import Checkpoint
from ..storage import JsonCheckpointStore, JsonlDatasetStore, MemoryStore, write_metrics
from ..trainer import Trainer
from .common import console, handles_errors, print_ablation, print_epoch, print_resolved


def training_options(func: Callable) -> Callable:
    """Flags shared by ``train`` and ``ablate``."""
    options = [
        click.option("--data", required=True, help="Training dataset file."),
        click.option("--val", default=None, help="Validation dataset (defaults to --data)."),
        click.option(
            "--steps", "T", default=settings.default_steps, type=int, help="Inference steps T."
        ),
        click.option("--lambda", "lambda_", default=0.01, type=float, help="Gate L1 coefficient."),
        click.option("--lr", default=0.05, type=float, help="Learning rate."),
        click.option("--momentum", default=0.9, type=float, help="Momentum factor."),
        click.option("--epochs", default=10, type=int, help="Epochs per phase."),
        click.option(
            "--gate-epochs", default=None, type=int, help="Gates-only epochs (default --epochs)."
        ),
        click.option("--batch", default=32, type=int, help="Mini-batch size."),
        click.option("--seed", default=settings.default_seed, type=int, help="Training seed."),
        click.option(
            "--phase",
            default="two-phase",
            type=click.Choice(["joint", "two-phase", "predictors-only", "gates-only"]),
            help="Training schedule.",
        ),
        click.option("--freeze-biases", is_flag=True, default=False, help="Keep biases fixed."),
        click.option(
            "--threads",
            default=settings.threads,
            type=click.IntRange(min=1),
            help="Worker threads for per-frame gradients.",
        ),
        click.option("--out-metrics", default=None, help="Metrics CSV to write."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _train_config(mode: str, gated: bool, **kwargs) -> TrainConfig:
    return TrainConfig(
        T=kwargs["T"],
        mode=mode,
        gated=gated,
        lambda_=kwargs["lambda_"],
        learning_rate=kwargs["lr"],
        momentum=kwargs["momentum"],
        epochs=kwargs["epochs"],
        gate_epochs=kwargs["gate_epochs"],
        batch_size=kwargs["batch"],
        seed=kwargs["seed"],
        phase=kwargs["phase"],
        freeze_biases=kwargs["freeze_biases"],
        threads=kwargs["threads"],
    )


def _load_sets(data: str, val: Optional[str]):
    store = JsonlDatasetStore()
    train_file = store.load_dataset(data)
    val_file = store.load_dataset(val) if val else None
    if val_file is not None and val_file.dims != train_file.dims:
        raise click.BadParameter(
            f"validation dims {val_file.dims} differ from training dims {train_file.dims}",
            param_hint="--val",
        )
    return train_file, val_file


@click.command(cls=HelpColorsCommand, help_options_color="green")
@training_options
@click.option("--out-checkpoint", required=True, help="Checkpoint file to write.")
@click.option("--mode", default="tied", type=click.Choice(["tied", "untied"]), help="Weights.")
@click.option("--gated/--ungated", default=True, help="Impose learned gates on every edge.")
@click.pass_context
@handles_errors
def train(ctx: click.Context, out_checkpoint: str, mode: str, gated: bool, **kwargs) -> None:
    """Train one model and write its checkpoint and metrics."""
    print_resolved(ctx)
    config = _train_config(mode, gated, **kwargs)
    train_file, val_file = _load_sets(kwargs["data"], kwargs["val"])
    variant = f"{'gated-' if gated else ''}{mode}"
    trainer = Trainer(config, variant=variant, on_epoch=print_epoch)
    params, history = trainer.fit(
        train_file.instances, val=val_file.instances if val_file else None
    )
    JsonCheckpointStore().save_checkpoint(
        Checkpoint(
            params=params,
            T=config.T,
            velocity=trainer.velocity,
            train_config=config.model_dump(by_alias=True),
            seed=config.seed,
            rng_state=trainer.rng_state,
        ),
        out_checkpoint,
    )
    console.print(f"Wrote checkpoint to {out_checkpoint}")
    if kwargs["out_metrics"]:
        write_metrics(kwargs["out_metrics"], history)
        console.print(f"Wrote metrics to {kwargs['out_metrics']}")


@click.command(cls=HelpColorsCommand, help_options_color="green")
@training_options
@click.option(
    "--out-dir", default=None, help="Also write each variant's checkpoint into this directory."
)
@click.pass_context
@handles_errors
def ablate(ctx: click.Context, out_dir, **kwargs) -> None:
    """Train the tied, untied, gated-tied and gated-untied variants and compare them."""
    print_resolved(ctx)
    base = _train_config("tied", True, **kwargs)
    train_file, val_file = _load_sets(kwargs["data"], kwargs["val"])
    store = MemoryStore()
    rows, _ = run_ablation(
        train_file.instances,
        val_file.instances if val_file else None,
        base,
        store=store,
        on_epoch=print_epoch,
    )
    print_ablation(rows)
    if out_dir:
        disk = JsonCheckpointStore(base_dir=out_dir)
        for variant in store.list_checkpoints():
            disk.save_checkpoint(store.load_checkpoint(variant), f"{variant}.json")
        console.print(f"Wrote {len(store.list_checkpoints())} checkpoints to {out_dir}")
    if kwargs["out_metrics"]:
        write_metrics(kwargs["out_metrics"], rows)
        console.print(f"Wrote ablation table to {kwargs['out_metrics']}")
