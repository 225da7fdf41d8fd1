"""From trajectory points to per-road 15-minute vehicle counts."""

import math
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import AlignmentError, DegenerateInputError, InputError
from .series import BIN_SECONDS, EPOCH, TimeSeries

DEFAULT_MATCH_DISTANCE_M = 50.0
FILL_POLICIES = ("zero", "linear", "carry_forward")


@dataclass(frozen=True, slots=True)
class TrajectoryRecord:
    vehicle_id: str
    x: float
    y: float
    timestamp: datetime

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("trajectory coordinates must be finite")
        if self.timestamp.tzinfo is None:
            object.__setattr__(self, "timestamp", self.timestamp.replace(tzinfo=timezone.utc))


def polyline_length(points):
    pts = np.asarray(points, dtype=float)
    return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


@dataclass(frozen=True)
class Road:
    road_id: str
    polyline: tuple
    successors: tuple = ()
    length_m: float = None

    def __post_init__(self):
        poly = tuple((float(x), float(y)) for x, y in self.polyline)
        if len(poly) < 2:
            raise ValueError(f"road {self.road_id!r} needs at least two polyline points")
        object.__setattr__(self, "polyline", poly)
        arc = polyline_length(poly)
        if self.length_m is None:
            object.__setattr__(self, "length_m", arc)
        elif abs(self.length_m - arc) > 1e-6 * max(arc, 1.0):
            raise ValueError(f"road {self.road_id!r} length {self.length_m} differs from arc length {arc}")
        if not self.length_m > 0:
            raise ValueError(f"road {self.road_id!r} has zero length")
        succ = tuple((str(r), float(f)) for r, f in self.successors)
        for _, frac in succ:
            if not 0.0 <= frac <= 1.0:
                raise ValueError(f"turn fraction {frac} out of [0, 1] on road {self.road_id!r}")
        if sum(f for _, f in succ) > 1.0 + 1e-9:
            raise ValueError(f"turn fractions out of road {self.road_id!r} sum above 1")
        object.__setattr__(self, "successors", succ)

    @property
    def midpoint(self):
        """Point halfway along the polyline."""
        pts = np.asarray(self.polyline)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        target = 0.5 * seg.sum()
        acc = 0.0
        for i, s in enumerate(seg):
            if acc + s >= target:
                t = (target - acc) / s
                x, y = pts[i] + t * (pts[i + 1] - pts[i])
                return float(x), float(y)
            acc += s
        return tuple(pts[-1])


class RoadNetwork:
    """Directed road graph; a two-way street is two roads."""

    def __init__(self, roads):
        self.roads = {}
        for road in sorted(roads, key=lambda r: r.road_id):
            if road.road_id in self.roads:
                raise ValueError(f"duplicate road id {road.road_id!r}")
            self.roads[road.road_id] = road
        for road in self.roads.values():
            for succ, _ in road.successors:
                if succ not in self.roads:
                    raise ValueError(f"road {road.road_id!r} turns into unknown road {succ!r}")
        self._segments = None

    def __len__(self):
        return len(self.roads)

    def __iter__(self):
        return iter(self.roads.values())

    def __eq__(self, other):
        return isinstance(other, RoadNetwork) and self.roads == other.roads

    @property
    def road_ids(self):
        return list(self.roads)

    def predecessors(self):
        """Map road id to the list of ``(upstream id, fraction)`` feeding it."""
        out = {rid: [] for rid in self.roads}
        for road in self.roads.values():
            for succ, frac in road.successors:
                out[succ].append((road.road_id, frac))
        return out

    def segments(self):
        """``(road_index, starts, ends)`` arrays over every polyline segment."""
        if self._segments is None:
            idx, a, b = [], [], []
            for i, road in enumerate(self.roads.values()):
                pts = road.polyline
                for j in range(len(pts) - 1):
                    idx.append(i)
                    a.append(pts[j])
                    b.append(pts[j + 1])
            a = np.array(a, dtype=float).reshape(-1, 2)
            b = np.array(b, dtype=float).reshape(-1, 2)
            self._segments = (np.array(idx, dtype=np.int64), a, b)
        return self._segments


@dataclass(frozen=True, eq=False)
class FlowSeries:
    road_id: str
    series: TimeSeries

    def __post_init__(self):
        v = self.series.values
        if np.any(v < 0) or np.any(v != np.round(v)):
            raise ValueError(f"flow for road {self.road_id!r} must hold non-negative integers")
        if self.series.interval_seconds != BIN_SECONDS:
            raise ValueError("flow series must use 900-second bins")

    @property
    def counts(self):
        return self.series.values.astype(np.int64)

    def equals(self, other):
        return isinstance(other, FlowSeries) and self.road_id == other.road_id and self.series.equals(other.series)


def _distances_to_roads(network, xs, ys):
    """Matrix of point-to-polyline distances, shape ``(n_points, n_roads)``."""
    idx, a, b = network.segments()
    px = np.asarray(xs, dtype=float)[:, None]
    py = np.asarray(ys, dtype=float)[:, None]
    dx = b[:, 0] - a[:, 0]
    dy = b[:, 1] - a[:, 1]
    seg_len2 = dx * dx + dy * dy
    t = ((px - a[:, 0]) * dx + (py - a[:, 1]) * dy) / np.where(seg_len2 > 0, seg_len2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    qx = a[:, 0] + t * dx - px
    qy = a[:, 1] + t * dy - py
    seg_d = np.hypot(qx, qy)
    # Segments are stored road by road, so each road is one contiguous block.
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    return np.minimum.reduceat(seg_d, starts, axis=1)


def match_points(network, xs, ys, max_dist_m=DEFAULT_MATCH_DISTANCE_M, chunk=4096):
    """Vectorised :func:`match_point`; returns road indices, -1 where unmatched."""
    if len(network) == 0:
        raise InputError("cannot match against an empty network")
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    out = np.full(xs.size, -1, dtype=np.int64)
    for s in range(0, xs.size, chunk):
        dist = _distances_to_roads(network, xs[s : s + chunk], ys[s : s + chunk])
        # Roads are sorted by id, so argmin's first-index rule is the tie-break.
        best = np.argmin(dist, axis=1)
        ok = dist[np.arange(best.size), best] <= max_dist_m
        out[s : s + chunk] = np.where(ok, best, -1)
    return out


def match_point(network, record, max_dist_m=DEFAULT_MATCH_DISTANCE_M):
    """Nearest road within ``max_dist_m`` of the record, or None.

    Ties go to the lexicographically smallest road id.
    """
    k = match_points(network, [record.x], [record.y], max_dist_m)[0]
    return None if k < 0 else network.road_ids[k]


def _is_aligned(when):
    return (when - EPOCH).total_seconds() % BIN_SECONDS == 0


@dataclass
class AggregationResult:
    flows: dict
    total: int = 0
    matched: int = 0
    unmatched: int = 0
    out_of_window: int = 0
    duplicates: int = 0

    @property
    def diagnostics(self):
        return {
            "total": self.total,
            "matched": self.matched,
            "unmatched": self.unmatched,
            "out_of_window": self.out_of_window,
            "duplicates": self.duplicates,
        }


def aggregate_flow(records, network, start, end, max_dist_m=DEFAULT_MATCH_DISTANCE_M):
    """Count distinct vehicles per (road, 900-second bin) inside ``[start, end)``.

    A vehicle seen several times on one road within one bin counts once.
    Every road gets a zero-filled series spanning the whole window.
    """
    if start.tzinfo is None or end.tzinfo is None:
        raise AlignmentError("window bounds must be timezone-aware")
    if not (_is_aligned(start) and _is_aligned(end)) or end < start:
        raise AlignmentError(f"window {start.isoformat()}..{end.isoformat()} is not aligned to 900 s bins")
    n_bins = int((end - start).total_seconds()) // BIN_SECONDS
    ids = network.road_ids

    vehicles, xs, ys, bins = [], [], [], []
    result = AggregationResult(flows={})
    for rec in records:
        result.total += 1
        offset = (rec.timestamp - start).total_seconds()
        b = math.floor(offset / BIN_SECONDS)
        if b < 0 or b >= n_bins:
            result.out_of_window += 1
            continue
        vehicles.append(rec.vehicle_id)
        xs.append(rec.x)
        ys.append(rec.y)
        bins.append(b)

    counts = np.zeros((len(ids), n_bins), dtype=np.int64)
    if vehicles:
        road_idx = match_points(network, xs, ys, max_dist_m)
        seen = set()
        for v, k, b in zip(vehicles, road_idx.tolist(), bins):
            if k < 0:
                result.unmatched += 1
                continue
            result.matched += 1
            key = (v, k, b)
            if key in seen:
                result.duplicates += 1
                continue
            seen.add(key)
            counts[k, b] += 1

    for k, rid in enumerate(ids):
        result.flows[rid] = FlowSeries(rid, TimeSeries(counts[k].astype(float), start, BIN_SECONDS))
    return result


def fill_missing(flow, mask, policy):
    """Replace the bins listed in ``mask`` according to ``policy``.

    ``zero`` writes 0, ``carry_forward`` repeats the last good value (0 when
    there is none) and ``linear`` interpolates between the nearest good
    neighbours, rounding half up, and carries the edge values outward.
    """
    if policy not in FILL_POLICIES:
        raise InputError(f"unknown fill policy {policy!r}; expected one of {FILL_POLICIES}")
    values = np.array(flow.series.values, dtype=float)
    n = values.size
    missing = np.zeros(n, dtype=bool)
    for i in mask:
        if not 0 <= int(i) < n:
            raise InputError(f"missing-bin index {i} outside 0..{n - 1}")
        missing[int(i)] = True
    if not missing.any():
        return flow
    good = np.flatnonzero(~missing)

    if policy == "zero":
        values[missing] = 0.0
    elif policy == "carry_forward":
        last = 0.0
        for i in range(n):
            if missing[i]:
                values[i] = last
            else:
                last = values[i]
    else:
        if good.size == 0:
            raise DegenerateInputError("linear fill needs at least one observed bin")
        interp = np.interp(np.flatnonzero(missing), good, values[good])
        values[missing] = np.floor(interp + 0.5)
    return FlowSeries(flow.road_id, flow.series.with_values(values))
