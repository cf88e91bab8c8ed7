"""
Empirical macroscopicity of quantum superposition experiments

Measurement records of a superposition test are used to rule out classicalizing modifications
of quantum mechanics; the largest excluded classicalization timescale sets the macroscopicity.
"""
import os
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import click

from commands import register_commands


@dataclass(frozen=True)
class AppSettings:
    workers: int = 1
    output_dir: Path = Path("results")


class MacroscopicityApp:
    def __init__(self):
        level_name = os.environ.get("MACRO_LOG_LEVEL", "INFO").upper()
        logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format="%(asctime)s %(levelname)s %(message)s")
        self.logger = logging.getLogger(__name__)

        workers = os.environ.get("MACRO_WORKERS", "1")
        try:
            self.settings = AppSettings(
                workers=max(1, int(workers)),
                output_dir=Path(os.environ.get("MACRO_OUTPUT_DIR", "results")),
            )
        except ValueError:
            self.logger.warning(f"ignoring MACRO_WORKERS={workers!r}, not an integer")
            self.settings = AppSettings(output_dir=Path(os.environ.get("MACRO_OUTPUT_DIR", "results")))

        @click.group()
        @click.pass_context
        def cli(ctx: click.Context):
            """Bayesian falsification of classicalizing modifications."""
            ctx.obj = self.settings

        self.cli = cli
        register_commands(self.cli)

    def start(self, args: Optional[Sequence[str]] = None):
        """Run the command line"""
        self.logger.debug(f"starting with {self.settings}")
        self.cli.main(args=args, prog_name="macroscopicity")


if __name__ == "__main__":
    app = MacroscopicityApp()
    app.start()
