"""Shared experiment options and config resolution for CLI commands."""

from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from ..config import ExperimentConfig, apply_overrides, load_config
from ..problems import PRESETS


def experiment_options(fn):
    """Attach --preset, --config, --set and --output-dir to a command."""
    fn = click.option(
        "--output-dir",
        "output_dir",
        default=None,
        envvar="LGMM_OUTPUT_DIR",
        type=click.Path(file_okay=False),
        help="Artifact directory. Falls back to LGMM_OUTPUT_DIR, then the config value.",
    )(fn)
    fn = click.option(
        "--set",
        "overrides",
        multiple=True,
        metavar="KEY=VALUE",
        help="Override one config key; repeatable. Applied last.",
    )(fn)
    fn = click.option(
        "--config",
        "config_path",
        default=None,
        type=click.Path(dir_okay=False, path_type=Path),
        help="Flat key = value config file.",
    )(fn)
    fn = click.option(
        "--preset",
        type=click.Choice(PRESETS),
        default=None,
        help="Problem preset; overrides the config file.",
    )(fn)
    return fn


def resolve_experiment(
    preset: Optional[str],
    config_path: Optional[Path],
    overrides: tuple[str, ...],
    output_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> ExperimentConfig:
    """Build the config: defaults < file < environment/flags < --set overrides.

    Raises ConfigError (exit code 2) on any invalid input.
    """
    cfg = ExperimentConfig()
    if config_path is not None:
        cfg = load_config(config_path, cfg)
    if output_dir:
        cfg = replace(cfg, output_dir=str(output_dir))
    if workers is not None:
        cfg = replace(cfg, workers=workers)
    if preset is not None:
        cfg = replace(cfg, preset=preset)
    return apply_overrides(cfg, list(overrides))
