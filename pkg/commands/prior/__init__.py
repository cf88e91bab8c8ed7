import logging
from pathlib import Path

import click

from .prior_table import prior_callback


def register(cli: click.Group):
    @cli.command("prior")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option("--hbar-over-sigma-q", type=float, required=True, help="Length scale hbar/sigma_q in metres.")
    @click.option(
        "--data", "data_path", type=click.Path(dir_okay=False, path_type=Path), help="Dataset whose contexts seed the prior."
    )
    @click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="Write the prior density table here.")
    @click.pass_context
    def prior(ctx: click.Context, config_path, hbar_over_sigma_q, data_path, output):
        """Jeffreys prior of the least favorable protocol at one sigma_q."""
        ctx.exit(
            prior_callback(
                config_path, hbar_over_sigma_q, data_path, output, echo=click.echo, logger=logging.getLogger(__name__)
            )
        )
