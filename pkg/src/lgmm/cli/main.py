"""Entry point of the ``lgmm`` command line."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click
from dotenv import load_dotenv

from .commands import register_commands

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
VERBOSITY_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)

EXIT_CODES = """\b
Exit codes:
  0  success
  1  unexpected error
  2  invalid configuration or usage
  3  numerical failure (mesh overlap, solver divergence)
  4  self-test check failed
"""


def load_project_env() -> None:
    """Read LGMM_* defaults from the .env next to pyproject.toml, if any."""
    root = Path(__file__).resolve().parents[3]
    load_dotenv(root / ".env")


def configure_logging(verbosity: int) -> None:
    """WARNING by default; -v adds per-run summaries, -vv per-step detail."""
    level = VERBOSITY_LEVELS[min(verbosity, len(VERBOSITY_LEVELS) - 1)]
    logging.getLogger("lgmm").setLevel(level)


@dataclass
class CliState:
    """Options of the root group, handed to every command as ``ctx.obj``."""

    fmt: Optional[str] = None
    verbosity: int = 0


@click.group(context_settings={"auto_envvar_prefix": "LGMM"}, epilog=EXIT_CODES)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "pretty"]),
    default=None,
    help="Result format (default: pretty on a terminal, json in a pipe).",
)
@click.option(
    "-v",
    "--verbose",
    "verbosity",
    count=True,
    help="Log more: -v for run summaries, -vv for every time step.",
)
@click.version_option(package_name="lgmm")
@click.pass_context
def cli(ctx, fmt, verbosity):
    """Lagrange–Galerkin convection–diffusion runs on moving 1D meshes.

    Single runs, moving/static comparisons, refinement studies with EOC tables
    and the property self-test. Artifacts go to LGMM_OUTPUT_DIR (default runs/).
    """
    configure_logging(verbosity)
    ctx.obj = CliState(fmt=fmt, verbosity=verbosity)


logging.basicConfig(level=logging.WARNING, format=LOG_FORMAT)
load_project_env()
register_commands(cli)
