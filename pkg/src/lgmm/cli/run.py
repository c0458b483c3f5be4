"""Single-run and moving-versus-static comparison commands."""

import click

from ..experiments import compare_schemes, run_experiment
from .options import experiment_options, resolve_experiment
from .output import run_tool

_samples_option = click.option(
    "--samples-per-element",
    default=0,
    show_default=True,
    type=click.IntRange(min=0),
    help="Extra uniformly spaced samples per element in the snapshot CSVs.",
)


@click.command("run")
@experiment_options
@click.option("--name", "run_name", default=None, help="Run directory name (default: derived).")
@_samples_option
@click.pass_obj
def run(ctx, preset, config_path, overrides, output_dir, run_name, samples_per_element):
    """Run one simulation; write snapshots, mesh trajectory and mass ledger CSVs."""
    run_tool(
        ctx,
        lambda: run_experiment(
            resolve_experiment(preset, config_path, overrides, output_dir),
            run_name,
            samples_per_element,
        ),
    )


@click.command("compare")
@experiment_options
@click.option("--name", "run_name", default=None, help="Run directory name (default: derived).")
@_samples_option
@click.pass_obj
def compare(ctx, preset, config_path, overrides, output_dir, run_name, samples_per_element):
    """Run the moving-mesh and static-mesh schemes side by side."""
    run_tool(
        ctx,
        lambda: compare_schemes(
            resolve_experiment(preset, config_path, overrides, output_dir),
            run_name,
            samples_per_element,
        ),
    )
