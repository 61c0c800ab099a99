import click
from click_help_colors import HelpColorsCommand

from ..config import settings
from ..models import Dims, SynthConfig
from ..storage import JsonlDatasetStore
from ..synth import corrupt, generate as generate_frames
from .common import console, handles_errors, logger, packaged_preset_text, print_resolved


@click.command(cls=HelpColorsCommand, help_options_color="green")
@click.option("--out", required=True, help="Dataset file to write.")
@click.option("--test-out", default=None, help="Optional second file for held-out frames.")
@click.option("--test-count", default=0, type=click.IntRange(min=0), help="Held-out frames.")
@click.option("--persons-min", default=4, type=int, help="Fewest persons per frame.")
@click.option("--persons-max", default=8, type=int, help="Most persons per frame.")
@click.option("--actions", default=5, type=int, help="Number of action classes A.")
@click.option("--scenes", default=5, type=int, help="Number of scene classes S.")
@click.option("--count", default=100, type=int, help="Number of frames in --out.")
@click.option(
    "--distractor-rate", default=0.3, type=float, help="Chance a person is a distractor."
)
@click.option(
    "--correlation", default=0.9, type=float, help="Chance a relevant person acts the scene."
)
@click.option("--noise", default=2.0, type=float, help="Unary peak concentration.")
@click.option(
    "--scene-noise",
    default=None,
    type=float,
    help="Scene unary peak concentration (defaults to --noise).",
)
@click.option("--flip-rate", default=0.0, type=float, help="Chance a unary is corrupted.")
@click.option("--seed", default=settings.default_seed, type=int, help="Generator seed.")
@click.pass_context
@handles_errors
def generate(
    ctx: click.Context,
    out: str,
    test_out,
    test_count: int,
    persons_min: int,
    persons_max: int,
    actions: int,
    scenes: int,
    count: int,
    distractor_rate: float,
    correlation: float,
    noise: float,
    scene_noise,
    flip_rate: float,
    seed: int,
) -> None:
    """Generate a synthetic group-activity dataset."""
    print_resolved(ctx)
    if test_count and not test_out:
        raise click.BadParameter("--test-count needs --test-out", param_hint="--test-count")
    dims = Dims(A=actions, S=scenes)
    config = SynthConfig(
        dims=dims,
        persons_min=persons_min,
        persons_max=persons_max,
        distractor_rate=distractor_rate,
        unary_noise=noise,
        scene_noise=scene_noise,
        correlation=correlation,
        seed=seed,
        count=count + test_count,
    )
    instances = generate_frames(config)
    if flip_rate:
        instances = corrupt(instances, flip_rate, seed)

    store = JsonlDatasetStore()
    store.save_dataset(instances[:count], dims, out)
    console.print(f"Wrote {count} frames to {out}")
    if test_out and test_count:
        store.save_dataset(instances[count:], dims, test_out)
        console.print(f"Wrote {test_count} held-out frames to {test_out}")
    logger.info(f"generate finished (seed={seed})")


@click.command(cls=HelpColorsCommand, help_options_color="green")
@click.option("--out", default=None, help="Write the preset here instead of printing it.")
@handles_errors
def preset(out) -> None:
    """Show the packaged reference preset."""
    text = packaged_preset_text()
    if out is None:
        click.echo(text, nl=False)
        return
    with open(out, "w", encoding="utf-8") as f:
        f.write(text)
    console.print(f"Wrote reference preset to {out}")
