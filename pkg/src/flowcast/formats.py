"""Text formats: trajectory CSV, flow CSV and the line-oriented network file.

Timestamps are RFC 3339 in UTC with a ``Z`` suffix. Floats are written with
``repr`` so a write/read round trip is exact.
"""

import csv
from collections import defaultdict
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import ParseError
from .flows import FlowSeries, Road, RoadNetwork, TrajectoryRecord, fill_missing
from .series import BIN_SECONDS, TimeSeries

TRAJECTORY_HEADER = ["vehicle_id", "x", "y", "timestamp"]
FLOW_HEADER = ["road_id", "bin_start", "count"]


def format_timestamp(when):
    when = when.astimezone(timezone.utc)
    if when.microsecond:
        return when.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text):
    """Parse an RFC 3339 timestamp; naive values are taken as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    when = datetime.fromisoformat(s)
    if when.tzinfo is None:
        when = when.replace(tzinfo=timezone.utc)
    return when.astimezone(timezone.utc)


def _rows(path):
    """Yield ``(line_number, fields)`` after checking there is a header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        yield 1, header
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            yield reader.line_num, row


def _check_header(path, header, expected):
    if header is None or [h.strip() for h in header] != expected:
        raise ParseError(f"expected header {','.join(expected)}", path, 1)


def write_trajectories(path, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for r in records:
            w.writerow([r.vehicle_id, repr(float(r.x)), repr(float(r.y)), format_timestamp(r.timestamp)])


def iter_trajectories(path):
    rows = _rows(path)
    _, header = next(rows)
    _check_header(path, header, TRAJECTORY_HEADER)
    for line, row in rows:
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", path, line)
        try:
            yield TrajectoryRecord(row[0], float(row[1]), float(row[2]), parse_timestamp(row[3]))
        except ValueError as exc:
            raise ParseError(str(exc), path, line) from None


def read_trajectories(path):
    return list(iter_trajectories(path))


def write_flows(path, flows):
    """Write one row per (road, bin); ``flows`` maps road id to FlowSeries."""
    items = flows.values() if isinstance(flows, dict) else flows
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FLOW_HEADER)
        for flow in sorted(items, key=lambda f: f.road_id):
            s = flow.series
            for i, v in enumerate(s.values):
                w.writerow([flow.road_id, format_timestamp(s.time_at(i)), int(v)])


def read_flows(path, fill=None):
    """Read a flow CSV into ``{road_id: FlowSeries}`` sorted by road id.

    Each road's bins must lie on one 900-second grid. Bins absent between a
    road's first and last rows are an error unless ``fill`` names a
    :func:`~flowcast.flows.fill_missing` policy.
    """
    per_road = defaultdict(dict)
    rows = _rows(path)
    _, header = next(rows)
    _check_header(path, header, FLOW_HEADER)
    for line, row in rows:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, line)
        road_id, stamp, count = row
        try:
            when = parse_timestamp(stamp)
        except ValueError as exc:
            raise ParseError(f"bad bin_start {stamp!r}: {exc}", path, line) from None
        try:
            value = int(count)
        except ValueError:
            raise ParseError(f"count {count!r} is not an integer", path, line) from None
        if value < 0:
            raise ParseError(f"negative count {value}", path, line)
        if when in per_road[road_id]:
            raise ParseError(f"duplicate bin {stamp} for road {road_id!r}", path, line)
        per_road[road_id][when] = (value, line)

    out = {}
    for road_id in sorted(per_road):
        bins = per_road[road_id]
        first = min(bins)
        last = max(bins)
        n = int((last - first).total_seconds()) // BIN_SECONDS + 1
        values = np.zeros(n)
        present = np.zeros(n, dtype=bool)
        for when, (value, line) in bins.items():
            idx, rem = divmod(int((when - first).total_seconds()), BIN_SECONDS)
            if rem:
                raise ParseError(f"bin {format_timestamp(when)} is off the 900 s grid of road {road_id!r}", path, line)
            values[idx] = value
            present[idx] = True
        flow = FlowSeries(road_id, TimeSeries(values, first, BIN_SECONDS))
        missing = np.flatnonzero(~present)
        if missing.size:
            if fill is None:
                gap = format_timestamp(first + timedelta(seconds=int(missing[0]) * BIN_SECONDS))
                raise ParseError(f"road {road_id!r} has {missing.size} missing bins, first at {gap}", path)
            flow = fill_missing(flow, missing.tolist(), fill)
        out[road_id] = flow
    return out


def write_network(path, network):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for road in network:
            coords = ",".join(f"{x!r},{y!r}" for x, y in road.polyline)
            fh.write(f"ROAD,{road.road_id},{coords}\n")
        for road in network:
            for succ, frac in road.successors:
                fh.write(f"TURN,{road.road_id},{succ},{frac!r}\n")


def read_network(path):
    """Parse ``ROAD,id,x1,y1,...`` and ``TURN,from,to,fraction`` lines.

    Blank lines and lines starting with ``#`` are skipped.
    """
    polylines = {}
    turns = defaultdict(list)
    turn_lines = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            kind = parts[0]
            try:
                if kind == "ROAD":
                    coords = [float(v) for v in parts[2:]]
                    if len(coords) < 4 or len(coords) % 2:
                        raise ValueError("ROAD needs an even number (>= 4) of coordinates")
                    if parts[1] in polylines:
                        raise ValueError(f"duplicate road {parts[1]!r}")
                    polylines[parts[1]] = list(zip(coords[::2], coords[1::2]))
                elif kind == "TURN":
                    if len(parts) != 4:
                        raise ValueError("TURN needs from, to and fraction")
                    turns[parts[1]].append((parts[2], float(parts[3])))
                    turn_lines.setdefault(parts[1], line_no)
                else:
                    raise ValueError(f"unknown record kind {kind!r}")
            except ValueError as exc:
                raise ParseError(str(exc), path, line_no) from None
    unknown = sorted(set(turns) - set(polylines))
    if unknown:
        raise ParseError(f"TURN from unknown road {unknown[0]!r}", path, turn_lines[unknown[0]])
    try:
        return RoadNetwork(Road(rid, poly, tuple(turns.get(rid, ()))) for rid, poly in polylines.items())
    except ValueError as exc:
        raise ParseError(str(exc), path) from None


def ensure_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
