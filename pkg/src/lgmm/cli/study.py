"""Refinement study command."""

import click

from ..errors import ConfigError
from ..experiments import convergence_study
from .options import experiment_options, resolve_experiment
from .output import run_tool


@click.command("convergence")
@experiment_options
@click.option(
    "--levels",
    default="128,256,512,1024",
    show_default=True,
    help="Comma-separated initial element counts (increasing powers of two).",
)
@click.option(
    "--workers",
    default=None,
    type=click.IntRange(min=1),
    envvar="LGMM_WORKERS",
    help="Parallel worker processes for the levels. Falls back to LGMM_WORKERS.",
)
@click.option("--name", "run_name", default=None, help="Run directory name (default: derived).")
@click.pass_obj
def convergence(ctx, preset, config_path, overrides, output_dir, levels, workers, run_name):
    """Refinement study: errors and EOCs per level, CSV in table column order."""

    def _run():
        cfg = resolve_experiment(preset, config_path, overrides, output_dir, workers)
        return convergence_study(cfg, _parse_levels(levels), run_name)

    run_tool(ctx, _run)


def _parse_levels(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--levels must be comma-separated integers, got '{text}'") from None
