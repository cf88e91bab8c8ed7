from logging import Logger
from pathlib import Path
from typing import Callable, Optional

from cli_io import load_config, simulate_dataset, surrogate_dataset, write_dataset
from core import ConfigError, DomainError, MacroscopicityError


def simulate_callback(
    config_path: Path,
    tau_true: float,
    runs: Optional[int],
    hbar_over_sigma_q: Optional[float],
    output: Path,
    echo: Callable[[str], None],
    logger: Logger,
    surrogate: bool = False,
) -> int:
    try:
        config = load_config(config_path)
        if surrogate:
            data = surrogate_dataset(config)
        elif runs is None:
            raise ConfigError("--runs is required unless --surrogate is given")
        else:
            data = simulate_dataset(config, tau_true, runs, hbar_over_sigma_q=hbar_over_sigma_q)
        write_dataset(data, output)
        echo(f"wrote {data.total_weight} {config.experiment} runs to {output}")
        return 0
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
