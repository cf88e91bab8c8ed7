import logging
from pathlib import Path

import click

from .posterior_table import posterior_callback


def register(cli: click.Group):
    @cli.command("posterior")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option("--data", "data_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option("--hbar-over-sigma-q", type=float, required=True, help="Length scale hbar/sigma_q in metres.")
    @click.option("--tau-star", type=float, help="Also report the odds ratio of tau_e <= tau_star, in seconds.")
    @click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="Write the prior/posterior table here.")
    @click.pass_context
    def posterior(ctx: click.Context, config_path, data_path, hbar_over_sigma_q, tau_star, output):
        """Update the Jeffreys prior with a dataset at one sigma_q."""
        ctx.exit(
            posterior_callback(
                config_path,
                data_path,
                hbar_over_sigma_q,
                tau_star,
                output,
                echo=click.echo,
                logger=logging.getLogger(__name__),
            )
        )
