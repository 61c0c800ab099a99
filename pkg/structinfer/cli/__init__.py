"""
Command-line interface for structinfer.

Every subcommand prints its resolved configuration before running. A YAML preset passed
with ``--preset`` supplies defaults per subcommand; explicit flags win.
"""

import click
from click_help_colors import HelpColorsGroup

from ..utils.logging import setup_logging
from ..version import __version__
from .common import handles_errors, load_preset, resolve_preset_path
from .data_commands import generate, preset
from .eval_commands import eval_command, export_gates
from .gradcheck_command import gradcheck
from .train_commands import ablate, train


@click.group(
    cls=HelpColorsGroup,
    help_headers_color="yellow",
    help_options_color="green",
    context_settings={"show_default": True, "help_option_names": ["-h", "--help"]},
)
@click.option(
    "--preset",
    "preset_path",
    default=None,
    help="YAML preset supplying per-command defaults; 'reference' names the packaged one.",
)
@click.option("--debug", is_flag=True, default=False, help="Enable debug logging.")
@click.option("--log-file", default=None, help="Log file path (defaults to settings).")
@click.version_option(__version__, prog_name="structinfer")
@click.pass_context
@handles_errors
def main(ctx: click.Context, preset_path, debug: bool, log_file) -> None:
    """Gated structure inference over scene-plus-persons graphs."""
    setup_logging(log_file=log_file, debug=debug)
    path = resolve_preset_path(preset_path)
    if path is not None:
        ctx.default_map = load_preset(path)


main.add_command(generate)
main.add_command(preset)
main.add_command(train)
main.add_command(ablate)
main.add_command(eval_command)
main.add_command(export_gates)
main.add_command(gradcheck)

__all__ = ["main"]
