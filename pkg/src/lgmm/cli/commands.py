"""Register all CLI subcommands."""


def register_commands(cli):
    """Register every top-level command on the root CLI group."""
    from .config import print_config
    from .run import compare, run
    from .selftest import selftest
    from .study import convergence

    cli.add_command(run)
    cli.add_command(compare)
    cli.add_command(convergence)
    cli.add_command(print_config)
    cli.add_command(selftest)
