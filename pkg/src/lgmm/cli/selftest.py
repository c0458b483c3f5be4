"""selftest command: property suites with acceptance exit code."""

import click

from ..experiments import selftest as _selftest
from ..selftest import SUITES
from .output import run_tool


@click.command("selftest")
@click.option("--seed", default=0, show_default=True, type=int, help="Seed for randomized suites.")
@click.option(
    "--suite",
    "suites",
    multiple=True,
    type=click.Choice(list(SUITES)),
    help="Run only this suite; repeatable. Default: all.",
)
@click.option("--quick", is_flag=True, help="Smaller samples and shorter runs.")
@click.pass_obj
def selftest(ctx, seed, suites, quick):
    """Run the property suites; exit code 4 when a check fails."""
    run_tool(ctx, lambda: _selftest(seed, suites or None, quick))
