import json
import math

import pytest

from cli_io import config_from_dict, simulate_dataset, write_dataset

QRW_DOCUMENT = {
    "experiment": "qrw",
    "seed": 1,
    "sigma_scan": {"hbar_over_sigma_q_min_m": 1.0e-9, "hbar_over_sigma_q_max_m": 1.0e-6, "points": 5},
}


@pytest.fixture
def qrw_config_path(tmp_path):
    path = tmp_path / "qrw.json"
    path.write_text(json.dumps(QRW_DOCUMENT), encoding="utf-8")
    return path


@pytest.fixture
def qrw_data_path(tmp_path):
    path = tmp_path / "walks.csv"
    write_dataset(simulate_dataset(config_from_dict(QRW_DOCUMENT), math.inf, 627), path)
    return path
