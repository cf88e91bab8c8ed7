import logging
from pathlib import Path

import click

from .leggett_garg import lg_test_callback


def register(cli: click.Group):
    @cli.command("lg-test")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="A qrw configuration.")
    @click.option("--hbar-over-sigma-q", type=float, help="Length scale in metres; defaults to a tenth of the site spacing.")
    @click.option("--points", type=int, default=27, show_default=True, help="Number of tau_e values on the grid range.")
    @click.option("--output", type=click.Path(dir_okay=False, path_type=Path), help="Write the curve as a table here.")
    @click.pass_context
    def lg_test(ctx: click.Context, config_path, hbar_over_sigma_q, points, output):
        """Leggett-Garg left-hand side R(T_r) + R(T_d + 2 T_r) across tau_e."""
        ctx.exit(
            lg_test_callback(
                config_path, hbar_over_sigma_q, points, output, echo=click.echo, logger=logging.getLogger(__name__)
            )
        )
