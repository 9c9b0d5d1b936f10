"""Tests for the thinmkt command line."""

import json
from unittest.mock import patch

import pandas as pd
import pytest

from src.cli.main import EXIT_ALL_FAILED, EXIT_INPUT, EXIT_OK, build_parser, main
from src.errors import AllModelsFailedError
from src.evaluation.metrics import ATTRIBUTION_NOTE


def write_json(path, payload) -> None:
    path.write_text(json.dumps(payload), encoding="utf-8")


class TestCli:
    """Test cases for the CLI entry point."""

    def setup_method(self):
        """Set up test fixtures."""
        self.sim_config = {"days": 16, "seed": 3}
        self.plan = {
            "prices_csv": "data/prices.csv",
            "drivers_csv": "data/drivers.csv",
            "evaluation_start": "2016-01-10",
            "evaluation_end": "2016-01-11",
            "models": ["HW_1", "ARFIMA2"],
            "window_overrides": {"HW_1": 3},
            "mcs": {"n_bootstrap": 100, "window_days": 3},
        }

    def simulate(self, tmp_path):
        write_json(tmp_path / "sim.json", self.sim_config)
        assert main(["simulate", "--config", str(tmp_path / "sim.json"), "--out", str(tmp_path / "data")]) == EXIT_OK
        write_json(tmp_path / "plan.json", self.plan)
        return tmp_path / "plan.json"

    def test_simulate_writes_files(self, tmp_path, capsys):
        self.simulate(tmp_path)

        assert (tmp_path / "data" / "prices.csv").exists()
        assert (tmp_path / "data" / "shocks.csv").exists()
        assert "Simulated 16 days" in capsys.readouterr().out

    def test_backtest_then_report(self, tmp_path, capsys):
        plan = self.simulate(tmp_path)
        out = tmp_path / "out"

        code = main(["backtest", "--plan", str(plan), "--out", str(out)])

        assert code == EXIT_OK
        printed = capsys.readouterr().out
        assert "[1/5] 2016-01-07" in printed
        assert "Skipped models: ARFIMA2" in printed
        assert (out / "result.json").exists()
        assert (out / "mape_daily.csv").exists()

        (out / "lag_diff.csv").unlink()
        assert main(["report", "--result", str(out), "--kind", "lagdiff"]) == EXIT_OK
        lines = (out / "lag_diff.csv").read_text().splitlines()
        assert lines[0] == ATTRIBUTION_NOTE
        assert lines[1].split(",")[2:] == ["<20", "20-40", "40-60", ">60"]

    def test_forecast(self, tmp_path):
        plan = self.simulate(tmp_path)

        code = main(["forecast", "--plan", str(plan), "--date", "2016-01-17", "--out", str(tmp_path / "fc")])

        assert code == EXIT_OK
        frame = pd.read_csv(tmp_path / "fc" / "forecast_2016-01-17.csv")
        assert len(frame) == 96
        assert frame["weighting_detail"].iloc[0] == "HW_1=1.000000"

    def test_missing_plan(self, tmp_path, capsys):
        code = main(["backtest", "--plan", str(tmp_path / "absent.json")])

        assert code == EXIT_INPUT
        assert "absent.json" in capsys.readouterr().err

    def test_missing_data_file(self, tmp_path, capsys):
        write_json(tmp_path / "plan.json", self.plan)

        code = main(["backtest", "--plan", str(tmp_path / "plan.json")])

        assert code == EXIT_INPUT
        assert "prices.csv" in capsys.readouterr().err

    def test_unknown_model(self, tmp_path, capsys):
        self.plan["models"] = ["HW_1", "NoSuchModel"]
        plan = self.simulate(tmp_path)

        assert main(["backtest", "--plan", str(plan)]) == EXIT_INPUT
        assert "NoSuchModel" in capsys.readouterr().err

    @patch("src.cli.main.BacktestEngine")
    def test_all_models_failed(self, mock_engine, tmp_path):
        plan = self.simulate(tmp_path)
        mock_engine.return_value.run.side_effect = AllModelsFailedError("every model failed on 2016-01-07")

        assert main(["backtest", "--plan", str(plan)]) == EXIT_ALL_FAILED

    @patch("src.cli.main.load_result")
    @patch("src.cli.main.write_kind")
    def test_report_defaults_to_result_dir(self, mock_write, mock_load, tmp_path):
        mock_write.return_value = []

        assert main(["report", "--result", str(tmp_path), "--kind", "charts"]) == EXIT_OK
        mock_write.assert_called_once_with(mock_load.return_value, "charts", tmp_path)

    def test_bad_date_rejected(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["forecast", "--plan", "p.json", "--date", "17/01/2016", "--out", "x"])

        assert exc.value.code == 2

    def test_bad_report_kind(self):
        with pytest.raises(SystemExit) as exc:
            main(["report", "--result", "out", "--kind", "hourly"])

        assert exc.value.code == 2
