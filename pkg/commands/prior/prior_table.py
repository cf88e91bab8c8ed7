from logging import Logger
from pathlib import Path
from typing import Callable, Optional

from cli_io import load_config, load_dataset_for, prior_table, write_prior_table
from core import DomainError, MacroscopicityError


def prior_callback(
    config_path: Path,
    hbar_over_sigma_q: float,
    data_path: Optional[Path],
    output: Optional[Path],
    echo: Callable[[str], None],
    logger: Logger,
) -> int:
    try:
        config = load_config(config_path)
        data = load_dataset_for(config, data_path) if data_path is not None else None
        context, density, tau_m = prior_table(config, hbar_over_sigma_q, data)
        echo(f"prior_context={context}")
        echo(f"prior_tau_m_seconds={tau_m:.6e}")
        if output is not None:
            echo(f"wrote {write_prior_table(density, output)}")
        return 0
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
