import itertools
from typing import Tuple

import click
from click_help_colors import HelpColorsCommand
from rich.table import Table

from ..config import settings
from ..gradients import finite_diff_oracle, seeded_check_case
from ..models import Dims, TrainConfig
from .common import console, handles_errors, logger, print_resolved


def _parse_dims(ctx, param, value: str) -> Tuple[int, int]:
    try:
        A, S = (int(part) for part in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected 'A,S', got {value!r}")
    return A, S


@click.command(cls=HelpColorsCommand, help_options_color="green")
@click.option("--dims", default="5,4", callback=_parse_dims, help="Action and scene counts A,S.")
@click.option("--persons", multiple=True, type=int, default=(1, 2, 4), help="Person counts M.")
@click.option("--steps", multiple=True, type=int, default=(1, 3), help="Step counts T.")
@click.option(
    "--mode",
    "modes",
    multiple=True,
    type=click.Choice(["tied", "untied"]),
    default=("tied", "untied"),
    help="Weight modes.",
)
@click.option(
    "--gated",
    "gating",
    multiple=True,
    type=click.Choice(["gated", "ungated"]),
    default=("gated", "ungated"),
    help="Gating variants.",
)
@click.option("--lambda", "lambda_", default=0.01, type=float, help="Gate L1 coefficient.")
@click.option("--epsilon", default=settings.fd_epsilon, type=float, help="Difference step.")
@click.option(
    "--tolerance",
    default=settings.gradcheck_tolerance,
    type=float,
    help="Largest accepted relative error.",
)
@click.option("--seed", default=settings.default_seed, type=int, help="Case seed.")
@click.pass_context
@handles_errors
def gradcheck(
    ctx: click.Context,
    dims: Tuple[int, int],
    persons: Tuple[int, ...],
    steps: Tuple[int, ...],
    modes: Tuple[str, ...],
    gating: Tuple[str, ...],
    lambda_: float,
    epsilon: float,
    tolerance: float,
    seed: int,
) -> None:
    """Check analytic gradients against central differences on seeded cases."""
    print_resolved(ctx)
    if epsilon <= 0.0:
        raise click.BadParameter("must be positive", param_hint="--epsilon")
    A, S = dims
    problem = Dims(A=A, S=S)

    table = Table(title="Gradient check", header_style="bold")
    for column in ("mode", "gating", "T", "M", "max rel. error", "result"):
        table.add_column(column, justify="right")

    failures = 0
    for mode, gating_name, T, M in itertools.product(modes, gating, steps, persons):
        gated = gating_name == "gated"
        params, inst = seeded_check_case(problem, M, T, mode, gated, seed)
        config = TrainConfig(T=T, mode=mode, gated=gated, lambda_=lambda_)
        error = finite_diff_oracle(params, inst, config, epsilon=epsilon)
        passed = error < tolerance
        failures += 0 if passed else 1
        table.add_row(
            mode,
            gating_name,
            str(T),
            str(M),
            f"{error:.3e}",
            "[green]ok[/green]" if passed else "[red]FAIL[/red]",
        )
        logger.info(f"gradcheck {mode}/{gating_name} T={T} M={M}: {error:.3e}")

    console.print(table)
    if failures:
        console.print(f"[red]{failures} case(s) above tolerance {tolerance:g}[/red]")
        ctx.exit(1)
    console.print(f"All cases below tolerance {tolerance:g}")
