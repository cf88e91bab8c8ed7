import logging

from click.testing import CliRunner

from app import AppSettings, MacroscopicityApp


class TestMacroscopicityApp:
    def setup_method(self):
        self.runner = CliRunner()

    def test_commands_registered(self):
        result = self.runner.invoke(MacroscopicityApp().cli, ["--help"])

        assert result.exit_code == 0
        for name in ("prior", "posterior", "macroscopicity", "simulate", "oracle-check", "lg-test"):
            assert name in result.output

    def test_settings_from_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("MACRO_WORKERS", "3")
        monkeypatch.setenv("MACRO_OUTPUT_DIR", str(tmp_path))

        assert MacroscopicityApp().settings == AppSettings(workers=3, output_dir=tmp_path)

    def test_invalid_workers(self, monkeypatch, caplog):
        monkeypatch.setenv("MACRO_WORKERS", "many")
        caplog.set_level(logging.WARNING)

        assert MacroscopicityApp().settings.workers == 1
        assert "ignoring MACRO_WORKERS='many'" in caplog.text

    def test_exit_code_of_failed_command(self, tmp_path):
        result = self.runner.invoke(
            MacroscopicityApp().cli, ["prior", "--config", str(tmp_path / "none.json"), "--hbar-over-sigma-q", "1e-7"]
        )

        assert result.exit_code == 2

    def test_simulate_then_macroscopicity(self, qrw_config_path, tmp_path, monkeypatch):
        monkeypatch.setenv("MACRO_OUTPUT_DIR", str(tmp_path / "results"))
        cli = MacroscopicityApp().cli
        data = tmp_path / "walks.csv"
        arguments = ["simulate", "--config", str(qrw_config_path), "--runs", "300", "--output", str(data)]
        simulated = self.runner.invoke(cli, arguments)
        assert simulated.exit_code == 0

        result = self.runner.invoke(cli, ["macroscopicity", "--config", str(qrw_config_path), "--data", str(data)])

        assert result.exit_code == 0
        assert "mu_m=" in result.output
        assert (tmp_path / "results" / "summary.json").exists()
