import json
import logging
from unittest.mock import Mock

import pytest

from commands.macroscopicity.scan import macroscopicity_callback

test_logger = logging.getLogger(__name__)


class TestMacroscopicityCommand:
    def setup_method(self):
        self.fake_echo = Mock()
        self.fake_progress_echo = Mock()

    def test_macroscopicity_callback(self, qrw_config_path, qrw_data_path, tmp_path):
        output_dir = tmp_path / "results"
        code = macroscopicity_callback(
            qrw_config_path,
            qrw_data_path,
            output_dir,
            2,
            echo=self.fake_echo,
            progress_echo=self.fake_progress_echo,
            logger=test_logger,
        )

        assert code == 0
        lines = [call.args[0] for call in self.fake_echo.call_args_list]
        mu_m = float(lines[0].split("=")[1])
        summary = json.loads((output_dir / "summary.json").read_text())
        assert mu_m == pytest.approx(summary["mu_m"], abs=5e-4)
        assert f"scan={output_dir / 'scan.csv'}" in lines
        assert self.fake_progress_echo.call_count >= 5
        assert self.fake_progress_echo.call_args_list[0].args[0].startswith("scan ")

    def test_mismatched_dataset(self, qrw_config_path, tmp_path, caplog):
        data = tmp_path / "bec.csv"
        data.write_text("t_seconds,m\n0.001,3\n", encoding="utf-8")
        code = macroscopicity_callback(
            qrw_config_path,
            data,
            tmp_path,
            1,
            echo=self.fake_echo,
            progress_echo=self.fake_progress_echo,
            logger=test_logger,
        )

        assert code == 3
        assert "header lacks" in caplog.text
        self.fake_echo.assert_not_called()
