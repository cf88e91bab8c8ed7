import logging

import click

from .checks import CHECKS, oracle_check_callback


def register(cli: click.Group):
    @cli.command("oracle-check")
    @click.option(
        "--check",
        "names",
        type=click.Choice(sorted(CHECKS) + ["all"]),
        multiple=True,
        default=("all",),
        show_default=True,
    )
    @click.option("--seed", type=int, default=0, show_default=True)
    @click.pass_context
    def oracle_check(ctx: click.Context, names, seed):
        """Compare the analytic likelihoods with the brute-force reference computations."""
        ctx.exit(oracle_check_callback(names, seed, echo=click.echo, logger=logging.getLogger(__name__)))
