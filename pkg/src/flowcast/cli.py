"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 computation failure.
Failures print one JSON line ``{"error": kind, "message": text}`` to stderr.
"""

import argparse
import json
import sys
from datetime import date, timedelta

from . import evaluation, formats
from .arima import ArimaOrder, FitConfig, fit, forecast
from .errors import ComputationError, DataError, FlowcastError
from .evaluation import SelectionSettings
from .flows import DEFAULT_MATCH_DISTANCE_M, FILL_POLICIES, aggregate_flow
from .netsim import Scenario
from .selection import grid_search
from .series import select_d

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_COMPUTE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _order(text):
    try:
        return ArimaOrder.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _d_choice(text):
    if text == "auto":
        return text
    if text in ("0", "1", "2"):
        return int(text)
    raise argparse.ArgumentTypeError("--d must be auto, 0, 1 or 2")


def _window(text):
    start, sep, end = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("--window must look like START..END")
    try:
        return formats.parse_timestamp(start), formats.parse_timestamp(end)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _test_day(text):
    if text == "all":
        return text
    try:
        return date.fromisoformat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _non_negative(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _add_fit_options(p):
    g = p.add_argument_group("optimizer")
    g.add_argument("--max-iter", type=_positive, default=2000, help="simplex iterations per run (default 2000)")
    g.add_argument("--restarts", type=_non_negative, default=2, help="jittered restarts after a failed run (default 2)")
    g.add_argument("--fit-seed", type=int, default=0, help="seed for restart jitter (default 0)")


def _add_flow_input(p, road=True):
    p.add_argument("--flows", required=True, help="flow CSV (road_id,bin_start,count)")
    if road:
        p.add_argument("--road", required=True, help="road id to model")
    p.add_argument("--fill", choices=FILL_POLICIES, help="fill missing bins with this policy instead of failing")


def _add_grid_options(p):
    p.add_argument("--pmax", type=_non_negative, default=5, help="largest AR order in the grid (default 5)")
    p.add_argument("--qmax", type=_non_negative, default=5, help="largest MA order in the grid (default 5)")
    p.add_argument("--d", type=_d_choice, default="auto", help="differencing order: auto, 0, 1 or 2 (default auto)")


def build_parser():
    parser = _Parser(prog="flowcast", description="Traffic-flow forecasting with BIC-selected ARIMA models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a grid network and its flows")
    p.add_argument("--config", help="scenario file of key=value lines; flags below override it")
    p.add_argument("--rows", type=_positive)
    p.add_argument("--cols", type=_positive)
    p.add_argument("--days", type=_positive)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-sd", type=float)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--emit-trajectories", action="store_true", help="also write trajectories.csv")

    p = sub.add_parser("aggregate", help="count vehicles per road and 15-minute bin")
    p.add_argument("--network", required=True, help="network file")
    p.add_argument("--trajectories", required=True, help="trajectory CSV")
    p.add_argument("--window", required=True, type=_window, help="START..END, RFC 3339, 900 s aligned")
    p.add_argument("--max-dist", type=float, default=DEFAULT_MATCH_DISTANCE_M, help="match radius in metres")
    p.add_argument("--out", required=True, help="flow CSV to write")

    p = sub.add_parser("fit", help="fit one ARIMA order to one road")
    _add_flow_input(p)
    p.add_argument("--order", required=True, type=_order, help="p,d,q")
    _add_fit_options(p)

    p = sub.add_parser("select", help="BIC grid search for one road")
    _add_flow_input(p)
    _add_grid_options(p)
    _add_fit_options(p)

    p = sub.add_parser("forecast", help="multi-step forecast for one road")
    _add_flow_input(p)
    p.add_argument("--horizon", required=True, type=_positive)
    how = p.add_mutually_exclusive_group(required=True)
    how.add_argument("--order", type=_order, help="fixed p,d,q")
    how.add_argument("--auto", action="store_true", help="select the order by BIC")
    _add_grid_options(p)
    _add_fit_options(p)

    p = sub.add_parser("evaluate", help="normal vs optimized ARIMA on every road")
    _add_flow_input(p, road=False)
    p.add_argument("--test-day", type=_test_day, help="YYYY-MM-DD, or 'all' for every day after the first (default: last day)")
    p.add_argument("--baseline", type=_order, default=evaluation.DEFAULT_BASELINE, help="normal ARIMA order (default 1,1,1)")
    _add_grid_options(p)
    _add_fit_options(p)
    p.add_argument("--jobs", type=_positive, default=evaluation.default_jobs(), help="worker processes (default: CPU count)")
    p.add_argument("--no-plot", action="store_true", help="skip fleet_curves.png")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _fit_config(args):
    return FitConfig(max_optimizer_iterations=args.max_iter, restarts=args.restarts, seed=args.fit_seed)


def _load_road(args):
    flows = formats.read_flows(args.flows, fill=args.fill)
    if args.road not in flows:
        raise DataError(f"road {args.road!r} not found in {args.flows}")
    return flows[args.road].series


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_simulate(args):
    scenario = Scenario.from_text(open(args.config, encoding="utf-8").read(), args.config) if args.config else Scenario()
    scenario = scenario.updated(rows=args.rows, cols=args.cols, days=args.days, seed=args.seed, noise_sd=args.noise_sd)
    result = scenario.run(emit_trajectories=args.emit_trajectories)
    out = formats.ensure_dir(args.out)
    formats.write_network(out / "network.txt", result.network)
    formats.write_flows(out / "flows.csv", result.flows)
    written = ["network.txt", "flows.csv"]
    if result.trajectories is not None:
        formats.write_trajectories(out / "trajectories.csv", result.trajectories)
        written.append("trajectories.csv")
    (out / "scenario.txt").write_text(scenario.to_text(), encoding="utf-8")
    written.append("scenario.txt")
    _emit({"out": str(out), "files": written, "roads": len(result.network), "bins": scenario.days * 96})


def cmd_aggregate(args):
    network = formats.read_network(args.network)
    start, end = args.window
    result = aggregate_flow(formats.iter_trajectories(args.trajectories), network, start, end, args.max_dist)
    formats.write_flows(args.out, result.flows)
    _emit({"out": args.out, "roads": len(result.flows), **result.diagnostics})


def cmd_fit(args):
    series = _load_road(args)
    model = fit(series, args.order, _fit_config(args))
    _emit({"road_id": args.road, **model.to_dict()})


def _select(series, args):
    d = select_d(series) if args.d == "auto" else args.d
    return grid_search(series, args.pmax, args.qmax, d, _fit_config(args))


def cmd_select(args):
    series = _load_road(args)
    _emit({"road_id": args.road, **_select(series, args).to_dict()})


def cmd_forecast(args):
    series = _load_road(args)
    model = _select(series, args).chosen_model if args.auto else fit(series, args.order, _fit_config(args))
    values = forecast(model, series, args.horizon)
    _emit(
        {
            "road_id": args.road,
            "order": [model.order.p, model.order.d, model.order.q],
            "start": formats.format_timestamp(series.end_time),
            "values": [float(v) for v in values],
        }
    )


def cmd_evaluate(args):
    flows = formats.read_flows(args.flows, fill=args.fill)
    if not flows:
        raise evaluation.EmptyReportError(f"{args.flows} holds no roads")
    selection = SelectionSettings(p_max=args.pmax, q_max=args.qmax, d=args.d, config=_fit_config(args))
    first = min(f.series.start_time for f in flows.values()).date()
    last_end = max(f.series.end_time for f in flows.values())
    last_day = (last_end - timedelta(microseconds=1)).date()
    if args.test_day == "all":
        days = [first + timedelta(days=i) for i in range(1, (last_day - first).days + 1)]
        report, _ = evaluation.run_daily_average(flows, days, args.baseline, selection, args.jobs)
    else:
        day = args.test_day or last_day
        train_w, test_w = evaluation.day_windows(flows, day)
        report = evaluation.run_comparison(flows, train_w, test_w, args.baseline, selection, args.jobs)
    out = evaluation.emit_report(report, args.out, plot=not args.no_plot)
    _emit({"out": str(out), **report.summary})


COMMANDS = {
    "simulate": cmd_simulate,
    "aggregate": cmd_aggregate,
    "fit": cmd_fit,
    "select": cmd_select,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
}


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    try:
        COMMANDS[args.command](args)
    except DataError as exc:
        return _fail(EXIT_DATA, exc.kind, exc)
    except ComputationError as exc:
        return _fail(EXIT_COMPUTE, exc.kind, exc)
    except FlowcastError as exc:
        return _fail(EXIT_COMPUTE, exc.kind, exc)
    except (OSError, ValueError) as exc:
        return _fail(EXIT_DATA, type(exc).__name__, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
