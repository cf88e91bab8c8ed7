import logging
from functools import partial
from pathlib import Path

import click

from .scan import macroscopicity_callback


def register(cli: click.Group):
    @cli.command("macroscopicity")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option("--data", "data_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
    @click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), help="Defaults to MACRO_OUTPUT_DIR.")
    @click.pass_context
    def macroscopicity(ctx: click.Context, config_path, data_path, output_dir):
        """Maximize the excluded timescale over sigma_q and write summary, posterior and scan tables."""
        settings = ctx.obj
        ctx.exit(
            macroscopicity_callback(
                config_path,
                data_path,
                output_dir or settings.output_dir,
                settings.workers,
                echo=click.echo,
                progress_echo=partial(click.echo, err=True),
                logger=logging.getLogger(__name__),
            )
        )
