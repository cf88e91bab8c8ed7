from logging import Logger
from pathlib import Path
from typing import Callable, Optional

from bayes import odds_ratio, posterior_update, quantile
from cli_io import load_config, load_dataset_for, prior_table, write_posterior_table
from core import HBAR, DomainError, MacroscopicityError


def posterior_callback(
    config_path: Path,
    data_path: Path,
    hbar_over_sigma_q: float,
    tau_star: Optional[float],
    output: Optional[Path],
    echo: Callable[[str], None],
    logger: Logger,
) -> int:
    try:
        config = load_config(config_path)
        data = load_dataset_for(config, data_path)
        context, prior, prior_tau_m = prior_table(config, hbar_over_sigma_q, data)
        posterior = posterior_update(prior, config.build_model(), data, HBAR / hbar_over_sigma_q)
        echo(f"prior_context={context}")
        echo(f"prior_tau_m_seconds={prior_tau_m:.6e}")
        echo(f"tau_m_seconds={quantile(posterior, config.quantile_level):.6e}")
        if tau_star is not None:
            echo(f"odds_ratio={odds_ratio(posterior, tau_star):.6e}")
        if output is not None:
            echo(f"wrote {write_posterior_table(prior, posterior, output)}")
        return 0
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
