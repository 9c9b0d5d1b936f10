"""Command-line entry point: simulate, backtest, forecast and report."""

import argparse
import datetime as dt
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.backtest.engine import BacktestEngine, load_market_data
from src.backtest.storage import REPORT_KINDS, load_plan, load_result, save_result, write_forecast, write_kind, write_reports
from src.config import configure_logging
from src.errors import AllModelsFailedError, ThinMarketError
from src.simulator.market_sim import load_sim_config, simulate, write_dataset

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ALL_FAILED = 3


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got '{text}'") from None


def _jobs(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("--jobs must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinmkt", description="Thin-market day-ahead price forecasting")
    parser.add_argument("--log-level", default=None, help="Overrides THINMKT_LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="Generate synthetic prices, drivers and a shock log")
    sim.add_argument("--config", type=Path, required=True)
    sim.add_argument("--out", type=Path, required=True)

    backtest = commands.add_parser("backtest", help="Run a rolling backtest and write its reports")
    backtest.add_argument("--plan", type=Path, required=True)
    backtest.add_argument("--out", type=Path, default=None, help="Defaults to the plan's output_dir")
    backtest.add_argument("--jobs", type=_jobs, default=None)

    forecast = commands.add_parser("forecast", help="Combined 96-block forecast of one day")
    forecast.add_argument("--plan", type=Path, required=True)
    forecast.add_argument("--date", type=_date, required=True)
    forecast.add_argument("--out", type=Path, required=True)
    forecast.add_argument("--jobs", type=_jobs, default=None)

    report = commands.add_parser("report", help="Regenerate reports from a stored backtest result")
    report.add_argument("--result", type=Path, required=True)
    report.add_argument("--kind", choices=sorted(REPORT_KINDS), required=True)
    report.add_argument("--out", type=Path, default=None, help="Defaults to the result directory")
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_sim_config(args.config)
    dataset = simulate(config)
    paths = write_dataset(dataset, args.out)
    print(f"Simulated {config.days} days in zone {config.zone.value} with {len(dataset.shocks)} shocks")
    for kind, path in paths.items():
        print(f"  {kind}: {path}")
    return EXIT_OK


def cmd_backtest(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    out_dir = args.out or plan.output_dir
    prices, drivers = load_market_data(plan)
    engine = BacktestEngine(plan, prices, drivers, jobs=args.jobs)

    def progress(day: dt.date, index: int, total: int) -> None:
        print(f"[{index}/{total}] {day.isoformat()}")

    result = engine.run(progress)
    save_result(result, out_dir)
    paths = write_reports(result, out_dir)
    print(f"Backtest done: {len(result.records)} records, {len(result.failures)} model failures")
    if result.skipped:
        print(f"Skipped models: {', '.join(sorted(result.skipped))}")
    print(f"Wrote {len(paths) + 2} files to {out_dir}")
    return EXIT_OK


def cmd_forecast(args: argparse.Namespace) -> int:
    plan = load_plan(args.plan)
    prices, drivers = load_market_data(plan)
    forecast = BacktestEngine(plan, prices, drivers, jobs=args.jobs).forecast_day(args.date)
    path = write_forecast(forecast, args.out)
    print(f"Forecast for {forecast.date.isoformat()} from {len(forecast.forecasts)} models: {path}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    result = load_result(args.result)
    paths = write_kind(result, args.kind, args.out or args.result)
    print(f"Wrote {len(paths)} {args.kind} files")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "backtest": cmd_backtest,
    "forecast": cmd_forecast,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and map failures to exit codes (0 ok, 2 input, 3 all models failed)."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except AllModelsFailedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    except (ThinMarketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
