"""print-config command."""

import click

from ..experiments import print_config as _print_config
from .options import experiment_options, resolve_experiment
from .output import _detect_format, fail, run_tool


@click.command("print-config")
@experiment_options
@click.pass_obj
def print_config(ctx, preset, config_path, overrides, output_dir):
    """Print the fully resolved config.

    Pretty output is the flat key = value format, ready to pass back via --config.
    """

    def _resolve():
        return _print_config(resolve_experiment(preset, config_path, overrides, output_dir))

    if _detect_format(ctx.fmt) == "json":
        run_tool(ctx, _resolve)
        return
    try:
        result = _resolve()
    except Exception as e:
        fail(ctx, e)
    click.echo(result["text"], nl=False)
