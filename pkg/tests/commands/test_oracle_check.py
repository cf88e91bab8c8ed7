import logging
from unittest.mock import Mock

import pytest

from commands.oracle_check import checks
from commands.oracle_check.checks import CheckResult, oracle_check_callback
from core import NumericalError

test_logger = logging.getLogger(__name__)


class TestOracleCheckCommand:
    def setup_method(self):
        self.fake_echo = Mock()

    def test_reports_each_result(self, monkeypatch):
        fake_checks = {
            "good": lambda seed: [CheckResult("good_check", 0.01, 0.1)],
            "bad": lambda seed: [CheckResult("bad_check", 1.0, 0.1)],
        }
        monkeypatch.setattr(checks, "CHECKS", fake_checks)
        code = oracle_check_callback(["good"], 0, echo=self.fake_echo, logger=test_logger)

        assert code == 0
        self.fake_echo.assert_called_once_with("good_check deviation=1.000e-02 tolerance=1.0e-01 ok")

    def test_failure_sets_exit_code(self, monkeypatch, caplog):
        fake_checks = {
            "good": lambda seed: [CheckResult("good_check", 0.01, 0.1)],
            "bad": lambda seed: [CheckResult("bad_check", 1.0, 0.1)],
        }
        monkeypatch.setattr(checks, "CHECKS", fake_checks)
        code = oracle_check_callback(["all"], 0, echo=self.fake_echo, logger=test_logger)

        assert code == 4
        assert self.fake_echo.call_count == 2
        assert "oracle disagreement in bad_check" in caplog.text

    def test_error_in_check(self, monkeypatch, caplog):
        def broken(seed):
            raise NumericalError("quadrature did not converge")

        monkeypatch.setattr(checks, "CHECKS", {"broken": broken})
        code = oracle_check_callback(["broken"], 0, echo=self.fake_echo, logger=test_logger)

        assert code == 4
        assert "quadrature did not converge" in caplog.text

    def test_random_walk_oracle(self):
        code = oracle_check_callback(["qrw"], 3, echo=self.fake_echo, logger=test_logger)

        assert code == 0
        assert self.fake_echo.call_args.args[0].endswith(" ok")

    @pytest.mark.slow
    @pytest.mark.parametrize("name", ["bec", "geometric", "nanobeam", "shear"])
    def test_reference_computations_agree(self, name):
        code = oracle_check_callback([name], 0, echo=self.fake_echo, logger=test_logger)

        assert code == 0
