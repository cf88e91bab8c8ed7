from logging import Logger
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from cli_io import config_from_dict, load_config, write_table
from core import ConfigError, DomainError, MacroscopicityError, ModificationParams
from model_qrw import leggett_garg_lhs


def lg_test_callback(
    config_path: Optional[Path],
    hbar_over_sigma_q: Optional[float],
    points: int,
    output: Optional[Path],
    echo: Callable[[str], None],
    logger: Logger,
) -> int:
    try:
        config = load_config(config_path) if config_path is not None else config_from_dict({"experiment": "qrw"})
        if config.experiment != "qrw":
            raise ConfigError(f"experiment: lg-test needs a qrw configuration, got {config.experiment!r}")
        if points < 2:
            raise ConfigError(f"points: need at least 2, got {points}")
        params = config.model_params()
        length = hbar_over_sigma_q if hbar_over_sigma_q is not None else params.site_spacing / 10.0
        grid = config.grid
        tau_values = np.logspace(grid.log10_start, grid.log10_stop, points)
        base = ModificationParams.from_length(tau_e=1.0, hbar_over_sigma_q=length)
        lhs = np.array([leggett_garg_lhs(params, base.with_tau(float(tau))) for tau in tau_values])

        echo("tau_e_seconds,lhs")
        for tau, value in zip(tau_values, lhs):
            echo(f"{tau:.6e},{value:.6e}")
        if np.all(np.diff(lhs) >= 0) and np.all(lhs >= 0):
            echo("violation=positive_and_monotone")
        else:
            logger.warning("Leggett-Garg left-hand side is not monotone in tau_e")
        if output is not None:
            write_table(output, ("tau_e_seconds", "lhs"), zip(tau_values, lhs))
            echo(f"wrote {output}")
        return 0
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
