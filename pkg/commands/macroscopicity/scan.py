from logging import Logger
from pathlib import Path
from typing import Callable

from cli_io import load_config, load_dataset_for, progress_printer, run_pipeline
from core import DomainError, MacroscopicityError


def macroscopicity_callback(
    config_path: Path,
    data_path: Path,
    output_dir: Path,
    workers: int,
    echo: Callable[[str], None],
    progress_echo: Callable[[str], None],
    logger: Logger,
) -> int:
    try:
        config = load_config(config_path)
        data = load_dataset_for(config, data_path)
        result = run_pipeline(config, data, output_dir, workers=workers, progress=progress_printer(progress_echo))
        report = result.report
        echo(f"mu_m={report.mu_m:.3f}")
        echo(f"hbar_over_sigma_q_star_m={report.hbar_over_sigma_q_star:.6e}")
        echo(f"tau_m_star_seconds={report.tau_m_star:.6e}")
        if report.boundary_maximum:
            logger.warning("the maximum lies on the edge of the sigma_q scan; widen sigma_scan to locate it")
        for name, path in result.artifacts.items():
            echo(f"{name}={path}")
        return 0
    except (MacroscopicityError, DomainError) as e:
        logger.error(e)
        return e.exit_code
