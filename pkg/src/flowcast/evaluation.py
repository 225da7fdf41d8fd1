"""Normal versus BIC-optimised ARIMA, compared road by road.

For every road the "normal" model is one fixed order fitted on the training
window and the "optimised" model is the BIC winner of a (p, q) grid. Both
then predict each test bin one step ahead with frozen parameters, and the
report keeps per-road RMSE plus fleet-averaged curves.
"""

import csv
import json
import math
import multiprocessing
import os
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta, timezone
from pathlib import Path

import numpy as np

from .arima import ArimaOrder, FitConfig, fit, rolling_one_step
from .errors import AlignmentError, EmptyReportError, FitFailedError, InputError, InsufficientDataError, SelectionFailedError
from .formats import format_timestamp, parse_timestamp
from .selection import grid_search
from .series import BIN_SECONDS, TimeSeries, select_d

DEFAULT_BASELINE = ArimaOrder(1, 1, 1)
SUMMARY_FILE = "summary.json"
PER_ROAD_FILE = "per_road.csv"
FLEET_FILE = "fleet_curves.csv"
PLOT_FILE = "fleet_curves.png"
PER_ROAD_HEADER = ["road_id", "chosen_p", "chosen_d", "chosen_q", "normal_rmse", "optimized_rmse"]
FLEET_HEADER = ["bin_start", "actual_avg", "normal_avg", "optimized_avg"]


def rmse(actual, predicted):
    """Root-mean-square error between two equal-length, non-empty sequences."""
    a = np.asarray(actual, dtype=float).reshape(-1)
    p = np.asarray(predicted, dtype=float).reshape(-1)
    if a.size == 0 or a.size != p.size:
        raise InputError(f"rmse needs equal non-zero lengths, got {a.size} and {p.size}")
    return math.sqrt(np.mean((a - p) ** 2))


@dataclass(frozen=True)
class SelectionSettings:
    p_max: int = 5
    q_max: int = 5
    d: object = "auto"
    max_d: int = 2
    config: FitConfig = field(default_factory=FitConfig)

    def resolve_d(self, train):
        if self.d == "auto":
            return select_d(train, self.max_d)
        return int(self.d)


@dataclass(frozen=True, eq=False)
class RoadResult:
    road_id: str
    normal_rmse: float = None
    optimized_rmse: float = None
    chosen_order: ArimaOrder = None
    failed: str = None
    actual: np.ndarray = None
    normal_pred: np.ndarray = None
    optimized_pred: np.ndarray = None

    @property
    def improved(self):
        return self.failed is None and self.optimized_rmse < self.normal_rmse


@dataclass(eq=False)
class EvalReport:
    per_road: dict
    fleet_avg_actual: TimeSeries
    fleet_avg_normal: TimeSeries
    fleet_avg_optimized: TimeSeries
    summary: dict


def compare_road(road_id, train, test, baseline_order=DEFAULT_BASELINE, selection=None):
    """Fit both models on ``train`` and score their one-step predictions on ``test``."""
    selection = selection or SelectionSettings()
    failures = []
    normal_pred = optimized_pred = None
    chosen = None
    try:
        normal = fit(train, baseline_order, selection.config)
        normal_pred = rolling_one_step(normal, train, test)
    except (FitFailedError, InsufficientDataError):
        failures.append("baseline")
    try:
        d = selection.resolve_d(train)
        result = grid_search(train, selection.p_max, selection.q_max, d, selection.config)
        chosen = result.chosen
        optimized_pred = rolling_one_step(result.chosen_model, train, test)
    except (SelectionFailedError, InsufficientDataError):
        failures.append("selection")
    actual = np.array(test.values)
    return RoadResult(
        road_id=road_id,
        normal_rmse=None if normal_pred is None else rmse(actual, normal_pred),
        optimized_rmse=None if optimized_pred is None else rmse(actual, optimized_pred),
        chosen_order=chosen,
        failed="+".join(failures) or None,
        actual=actual,
        normal_pred=normal_pred,
        optimized_pred=optimized_pred,
    )


def _compare_task(task):
    return compare_road(*task)


def _window_slice(series, window, what):
    start, end = window
    try:
        i0 = series.index_of(start)
        i1 = series.index_of(end)
    except ValueError as exc:
        raise AlignmentError(f"{what} window not on the series grid: {exc}") from None
    if i0 < 0 or i1 > len(series) or i1 <= i0:
        raise InputError(f"{what} window {format_timestamp(start)}..{format_timestamp(end)} is not covered")
    return series.slice(i0, i1)


def default_jobs():
    return os.cpu_count() or 1


def run_comparison(flows, train_window, test_window, baseline_order=DEFAULT_BASELINE, selection=None, jobs=1):
    """Compare normal and optimised ARIMA on every road in ``flows``.

    ``flows`` maps road id to FlowSeries; windows are ``(start, end)``
    half-open timestamp pairs and the test window must begin where the
    training window ends. Roads are processed in id order, optionally across
    ``jobs`` worker processes; the result does not depend on ``jobs``.
    """
    selection = selection or SelectionSettings()
    if not flows:
        raise EmptyReportError("no roads to evaluate")
    if test_window[0] != train_window[1]:
        raise AlignmentError("test window must start exactly where the training window ends")
    tasks = []
    for road_id in sorted(flows):
        series = flows[road_id].series
        train = _window_slice(series, train_window, "train")
        test = _window_slice(series, test_window, "test")
        tasks.append((road_id, train, test, baseline_order, selection))

    if jobs > 1 and len(tasks) > 1:
        ctx = multiprocessing.get_context("fork" if "fork" in multiprocessing.get_all_start_methods() else "spawn")
        with ctx.Pool(min(jobs, len(tasks))) as pool:
            results = pool.map(_compare_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))
    else:
        results = [_compare_task(t) for t in tasks]
    return build_report(results, tasks[0][2].start_time, baseline_order)


def build_report(results, test_start, baseline_order=DEFAULT_BASELINE):
    """Assemble an EvalReport from per-road results (any order)."""
    per_road = {r.road_id: r for r in sorted(results, key=lambda r: r.road_id)}
    ok = [r for r in per_road.values() if r.failed is None]
    if ok:
        actual = np.mean([r.actual for r in ok], axis=0)
        normal = np.mean([r.normal_pred for r in ok], axis=0)
        optimized = np.mean([r.optimized_pred for r in ok], axis=0)
    else:
        actual = normal = optimized = np.zeros(0)
    summary = {
        "n_roads": len(per_road),
        "n_failed": len(per_road) - len(ok),
        "mean_normal_rmse": float(np.mean([r.normal_rmse for r in ok])) if ok else None,
        "mean_optimized_rmse": float(np.mean([r.optimized_rmse for r in ok])) if ok else None,
        "fraction_improved": sum(r.improved for r in ok) / len(ok) if ok else None,
        "baseline_order": [baseline_order.p, baseline_order.d, baseline_order.q],
        "test_start": format_timestamp(test_start),
    }
    return EvalReport(
        per_road=per_road,
        fleet_avg_actual=TimeSeries(actual, test_start, BIN_SECONDS),
        fleet_avg_normal=TimeSeries(normal, test_start, BIN_SECONDS),
        fleet_avg_optimized=TimeSeries(optimized, test_start, BIN_SECONDS),
        summary=summary,
    )


def day_windows(flows, test_day):
    """Train on everything before ``test_day`` (a date), test on that day."""
    first = min(f.series.start_time for f in flows.values())
    start = datetime.combine(test_day, time(0), tzinfo=timezone.utc)
    test = (start, start + timedelta(days=1))
    if start <= first:
        raise InputError(f"test day {test_day.isoformat()} leaves no training data")
    return (first, start), test


def run_daily_average(flows, test_days, baseline_order=DEFAULT_BASELINE, selection=None, jobs=1):
    """Repeat :func:`run_comparison` for each test day (training on all
    earlier days) and average the results.

    Per-road RMSEs are averaged over the days a road did not fail on, the
    reported order is the one chosen most often, and fleet curves are
    averaged per bin of day and labelled with the first test day's times.
    """
    if not test_days:
        raise InputError("no test days given")
    reports = []
    for day in test_days:
        train_w, test_w = day_windows(flows, day)
        reports.append(run_comparison(flows, train_w, test_w, baseline_order, selection, jobs))
    merged = []
    for road_id in reports[0].per_road:
        days = [rep.per_road[road_id] for rep in reports]
        ok = [r for r in days if r.failed is None]
        if not ok:
            merged.append(RoadResult(road_id, failed="all-days"))
            continue
        orders = Counter((r.chosen_order.p, r.chosen_order.d, r.chosen_order.q) for r in ok)
        top = max(orders.values())
        chosen = min(o for o, c in orders.items() if c == top)
        merged.append(
            RoadResult(
                road_id,
                normal_rmse=float(np.mean([r.normal_rmse for r in ok])),
                optimized_rmse=float(np.mean([r.optimized_rmse for r in ok])),
                chosen_order=ArimaOrder(*chosen),
                actual=np.mean([r.actual for r in ok], axis=0),
                normal_pred=np.mean([r.normal_pred for r in ok], axis=0),
                optimized_pred=np.mean([r.optimized_pred for r in ok], axis=0),
            )
        )
    report = build_report(merged, reports[0].fleet_avg_actual.start_time, baseline_order)
    report.summary["test_days"] = [d.isoformat() for d in test_days]
    return report, reports


# ---------------------------------------------------------------------------
# files


def _fmt(value):
    return "" if value is None else repr(float(value))


def emit_report(report, out_dir, plot=True):
    """Write ``summary.json``, ``per_road.csv``, ``fleet_curves.csv`` and, when
    ``plot`` is set, ``fleet_curves.png`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / SUMMARY_FILE, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(report.summary, fh, indent=2)
            fh.write("\n")
        with open(out / PER_ROAD_FILE, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PER_ROAD_HEADER)
            for rid, r in report.per_road.items():
                o = r.chosen_order
                w.writerow(
                    [rid]
                    + (["", "", ""] if o is None else [o.p, o.d, o.q])
                    + [_fmt(r.normal_rmse), _fmt(r.optimized_rmse)]
                )
        with open(out / FLEET_FILE, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FLEET_HEADER)
            a, n, o = report.fleet_avg_actual, report.fleet_avg_normal, report.fleet_avg_optimized
            for i in range(len(a)):
                w.writerow([format_timestamp(a.time_at(i)), _fmt(a.values[i]), _fmt(n.values[i]), _fmt(o.values[i])])
        if plot and len(report.fleet_avg_actual):
            from .plotting import plot_fleet_curves

            plot_fleet_curves(report, out / PLOT_FILE)
    except OSError as exc:
        raise OSError(f"cannot write report into {out}: {exc}") from exc
    return out


def read_report(out_dir):
    """Parse the files written by :func:`emit_report` back into an EvalReport.

    Per-road predictions are not stored on disk, so those fields are None.
    """
    out = Path(out_dir)
    with open(out / SUMMARY_FILE, encoding="utf-8") as fh:
        summary = json.load(fh)
    per_road = {}
    with open(out / PER_ROAD_FILE, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader) != PER_ROAD_HEADER:
            raise InputError(f"{out / PER_ROAD_FILE}: unexpected header")
        for row in reader:
            rid, p, d, q, nr, orr = row
            per_road[rid] = RoadResult(
                rid,
                normal_rmse=float(nr) if nr else None,
                optimized_rmse=float(orr) if orr else None,
                chosen_order=ArimaOrder(int(p), int(d), int(q)) if p else None,
                failed=None if nr and orr else "unknown",
            )
    stamps, cols = [], ([], [], [])
    with open(out / FLEET_FILE, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader) != FLEET_HEADER:
            raise InputError(f"{out / FLEET_FILE}: unexpected header")
        for row in reader:
            stamps.append(parse_timestamp(row[0]))
            for col, v in zip(cols, row[1:]):
                col.append(float(v))
    start = stamps[0] if stamps else parse_timestamp(summary["test_start"])
    curves = [TimeSeries(c, start, BIN_SECONDS) for c in cols]
    return EvalReport(per_road, *curves, summary=summary)
