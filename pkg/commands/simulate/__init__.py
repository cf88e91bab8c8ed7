import logging
from pathlib import Path

import click

from .synthetic import simulate_callback


def register(cli: click.Group):
    @cli.command("simulate")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option(
        "--tau-true", type=float, default=float("inf"), show_default=True, help="Seconds; inf is quantum mechanics."
    )
    @click.option("--runs", type=int, help="Number of simulated runs.")
    @click.option("--hbar-over-sigma-q", type=float, help="Length scale in metres; defaults to the lower scan bound.")
    @click.option(
        "--surrogate", is_flag=True, help="Stand in for the published measurement; overrides the other draw options."
    )
    @click.option("--output", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.pass_context
    def simulate(ctx: click.Context, config_path, tau_true, runs, hbar_over_sigma_q, surrogate, output):
        """Draw a seeded synthetic dataset from the configured model."""
        ctx.exit(
            simulate_callback(
                config_path,
                tau_true,
                runs,
                hbar_over_sigma_q,
                output,
                echo=click.echo,
                logger=logging.getLogger(__name__),
                surrogate=surrogate,
            )
        )
