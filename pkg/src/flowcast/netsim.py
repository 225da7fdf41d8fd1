"""Flow-conserving road-network traffic generator.

Time advances in 900-second bins. Vehicles on road ``u`` during bin ``t``
move on to ``u``'s successors during bin ``t + 1``; the split is integer and
exact (largest-remainder apportionment, with the exit share as one more
bucket), so nothing is created or lost except by exogenous arrivals, noise
and network exits.
"""

import math
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import ConfigurationError
from .flows import FlowSeries, Road, RoadNetwork, TrajectoryRecord
from .rng import XorShift64Star
from .series import BIN_SECONDS, TimeSeries

BINS_PER_DAY = 86400 // BIN_SECONDS
DEFAULT_START = datetime(2015, 3, 1, tzinfo=timezone.utc)
EXIT_FRACTION = 0.05
# Route choices draw from their own stream so trajectory emission never
# perturbs the counts.
_ROUTE_STREAM = 0x5DEECE66D


@dataclass(frozen=True)
class Peak:
    center_bin: float
    width_bins: float
    amplitude: float

    def __post_init__(self):
        if not self.width_bins > 0:
            raise ConfigurationError("peak width must be positive")
        if not self.amplitude >= 0:
            raise ConfigurationError("peak amplitude must be non-negative")


@dataclass(frozen=True)
class DemandProfile:
    """Exogenous arrivals onto one road.

    The expected rate at bin-of-day ``b`` is
    ``base_rate * (1 + sum_k (amplitude_k - 1) * g_k(b))`` where ``g_k`` is a
    Gaussian bump of the given width centred on ``center_bin``, measured
    around the 96-bin day.
    """

    base_rate: float
    peaks: tuple = ()
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.base_rate < 0 or self.noise_sd < 0:
            raise ConfigurationError("base_rate and noise_sd must be non-negative")
        object.__setattr__(self, "peaks", tuple(self.peaks))
        if np.any(self.expected_rate(np.arange(BINS_PER_DAY)) < 0):
            raise ConfigurationError("demand profile has a negative expected rate")

    def expected_rate(self, bins):
        b = np.asarray(bins, dtype=float) % BINS_PER_DAY
        mult = np.ones_like(b)
        for pk in self.peaks:
            dist = np.abs(b - pk.center_bin) % BINS_PER_DAY
            dist = np.minimum(dist, BINS_PER_DAY - dist)
            mult += (pk.amplitude - 1.0) * np.exp(-0.5 * (dist / pk.width_bins) ** 2)
        return self.base_rate * mult


def _node_name(r, c):
    return f"r{r}c{c}"


def generate_grid_network(rows, cols, seed, spacing_m=500.0, offset_m=5.0, exit_fraction=EXIT_FRACTION):
    """Directed grid of ``rows x cols`` intersections.

    Each street between neighbouring intersections becomes two roads, one per
    direction, drawn ``offset_m`` to the right of the centre line so the two
    directions have distinct geometry. At the downstream intersection a road
    turns into every outgoing road except its own reverse (a dead end allows
    the U-turn); the turn fractions are normalised exponential draws scaled
    to sum to ``1 - exit_fraction``.
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError("rows and cols must be at least 1")
    if not 0 <= exit_fraction <= 1:
        raise ConfigurationError("exit_fraction must lie in [0, 1]")
    pos = {(r, c): (c * spacing_m, r * spacing_m) for r in range(rows) for c in range(cols)}
    edges = []
    for (r, c) in sorted(pos):
        for dr, dc in ((0, 1), (1, 0)):
            nb = (r + dr, c + dc)
            if nb in pos:
                edges.append(((r, c), nb))
                edges.append((nb, (r, c)))

    def road_id(u, v):
        return f"{_node_name(*u)}-{_node_name(*v)}"

    outgoing = {}
    geometry = {}
    for u, v in edges:
        (x0, y0), (x1, y1) = pos[u], pos[v]
        length = math.hypot(x1 - x0, y1 - y0)
        nx, ny = (y1 - y0) / length * offset_m, -(x1 - x0) / length * offset_m
        geometry[road_id(u, v)] = ((x0 + nx, y0 + ny), (x1 + nx, y1 + ny))
        outgoing.setdefault(u, []).append((v, road_id(u, v)))

    rng = XorShift64Star(seed)
    heads = {road_id(u, v): (u, v) for u, v in edges}
    roads = []
    for rid in sorted(heads):
        u, v = heads[rid]
        outs = sorted(r for w, r in outgoing.get(v, []) if w != u)
        if not outs:
            outs = sorted(r for _, r in outgoing.get(v, []))
        weights = [rng.exponential() for _ in outs]
        total = sum(weights)
        succ = tuple((o, (1.0 - exit_fraction) * w / total) for o, w in zip(outs, weights))
        roads.append(Road(rid, geometry[rid], succ))
    return RoadNetwork(roads)


def apportion(count, fractions):
    """Split integer ``count`` across ``fractions`` plus an exit bucket.

    Largest-remainder rounding: every bucket gets the floor of its quota and
    the leftover units go to the largest fractional parts (earlier buckets
    win ties). Returns the successor shares; the exit share is the rest.
    """
    fr = list(fractions) + [max(0.0, 1.0 - sum(fractions))]
    quotas = [count * f for f in fr]
    shares = [math.floor(q) for q in quotas]
    left = count - sum(shares)
    order = sorted(range(len(fr)), key=lambda i: -(quotas[i] - shares[i]))
    for i in order[:left]:
        shares[i] += 1
    return shares[:-1]


class _Router:
    """Vectorised apportionment for every road in one bin."""

    def __init__(self, network):
        ids = network.road_ids
        index = {rid: i for i, rid in enumerate(ids)}
        width = max((len(r.successors) for r in network), default=0) + 1
        n = len(ids)
        self.fractions = np.zeros((n, width))
        self.targets = np.full((n, width), -1, dtype=np.int64)
        for i, road in enumerate(network):
            for j, (succ, frac) in enumerate(road.successors):
                self.fractions[i, j] = frac
                self.targets[i, j] = index[succ]
            k = len(road.successors)
            self.fractions[i, k] = max(0.0, 1.0 - sum(f for _, f in road.successors))
        self.columns = np.arange(width)

    def split(self, counts):
        """Per-bucket integer shares, shape ``(n_roads, width)``."""
        quotas = counts[:, None] * self.fractions
        shares = np.floor(quotas)
        left = counts - shares.sum(axis=1)
        remainder = quotas - shares
        order = np.argsort(-remainder, axis=1, kind="stable")
        rank = np.empty_like(order)
        np.put_along_axis(rank, order, self.columns[None, :].repeat(len(counts), axis=0), axis=1)
        shares += rank < left[:, None]
        return shares.astype(np.int64)

    def inflow(self, shares):
        out = np.zeros(shares.shape[0], dtype=np.int64)
        mask = self.targets >= 0
        np.add.at(out, self.targets[mask], shares[mask])
        return out


@dataclass
class SimulationResult:
    network: RoadNetwork
    flows: dict
    trajectories: list = None


def _round_half_up(x):
    return np.floor(np.asarray(x) + 0.5)


def simulate_flows(network, sources, days, seed, start_time=DEFAULT_START, emit_trajectories=False):
    """Propagate vehicles through ``network`` for ``days`` days of 900 s bins.

    Flow on road ``r`` in bin ``t + 1`` is the apportioned share of every
    upstream road's bin-``t`` flow, plus the rounded expected arrivals of
    ``r``'s demand profile, plus rounded Gaussian noise, clamped at zero.
    Bin 0 holds exogenous arrivals only.

    With ``emit_trajectories`` each vehicle is tracked individually and one
    record is emitted per (vehicle, road, bin) at the road midpoint, half a
    bin after the bin starts.
    """
    unknown = sorted(set(sources) - set(network.roads))
    if unknown:
        raise ConfigurationError(f"source road {unknown[0]!r} is not in the network")
    if days < 1:
        raise ConfigurationError("days must be positive")
    ids = network.road_ids
    n_roads = len(ids)
    n_bins = days * BINS_PER_DAY
    bins = np.arange(n_bins)

    arrivals = np.zeros((n_roads, n_bins), dtype=np.int64)
    noise_sd = np.zeros(n_roads)
    for i, rid in enumerate(ids):
        prof = sources.get(rid)
        if prof is not None:
            arrivals[i] = _round_half_up(prof.expected_rate(bins)).astype(np.int64)
            noise_sd[i] = prof.noise_sd
    noisy = np.flatnonzero(noise_sd > 0)

    rng = XorShift64Star(seed)
    router = _Router(network)
    counts = np.zeros((n_roads, n_bins), dtype=np.int64)

    tracker = _VehicleTracker(network, seed, start_time) if emit_trajectories else None
    prev = np.zeros(n_roads, dtype=np.int64)
    for t in range(n_bins):
        if t == 0:
            shares = np.zeros((n_roads, router.columns.size), dtype=np.int64)
            inflow = np.zeros(n_roads, dtype=np.int64)
        else:
            shares = router.split(prev)
            inflow = router.inflow(shares)
        noise = np.zeros(n_roads, dtype=np.int64)
        if noisy.size:
            z = rng.normals(noisy.size)
            noise[noisy] = _round_half_up(z * noise_sd[noisy]).astype(np.int64)
        cur = np.maximum(inflow + arrivals[:, t] + noise, 0)
        if tracker is not None:
            tracker.step(t, shares, inflow, cur)
        counts[:, t] = cur
        prev = cur

    flows = {
        rid: FlowSeries(rid, TimeSeries(counts[i].astype(float), start_time, BIN_SECONDS)) for i, rid in enumerate(ids)
    }
    return SimulationResult(network, flows, tracker.records if tracker else None)


class _VehicleTracker:
    def __init__(self, network, seed, start_time):
        self.rng = XorShift64Star(seed ^ _ROUTE_STREAM)
        self.start_time = start_time
        self.ids = network.road_ids
        self.midpoints = [network.roads[rid].midpoint for rid in self.ids]
        self.targets = None
        self.network = network
        self.on_road = [[] for _ in self.ids]
        self.next_id = 0
        self.records = []
        index = {rid: i for i, rid in enumerate(self.ids)}
        self.successors = [[index[s] for s, _ in network.roads[rid].successors] for rid in self.ids]

    def _spawn(self, k):
        out = [f"v{self.next_id + j}" for j in range(k)]
        self.next_id += k
        return out

    def step(self, t, shares, inflow, totals):
        incoming = [[] for _ in self.ids]
        if t > 0:
            for u, vehicles in enumerate(self.on_road):
                if not vehicles:
                    continue
                self.rng.shuffle(vehicles)
                pos = 0
                for j, target in enumerate(self.successors[u]):
                    k = int(shares[u, j])
                    incoming[target].extend(vehicles[pos : pos + k])
                    pos += k
        stamp = self.start_time + timedelta(seconds=t * BIN_SECONDS + BIN_SECONDS // 2)
        for r, vehicles in enumerate(incoming):
            total = int(totals[r])
            if total >= len(vehicles):
                vehicles.extend(self._spawn(total - len(vehicles)))
            else:
                self.rng.shuffle(vehicles)
                del vehicles[total:]
            x, y = self.midpoints[r]
            self.records.extend(TrajectoryRecord(v, x, y, stamp) for v in vehicles)
        self.on_road = incoming


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    """Everything needed to rebuild a simulated dataset."""

    rows: int = 16
    cols: int = 16
    days: int = 31
    seed: int = 42
    noise_sd: float = 3.0
    base_rate_min: float = 1.0
    base_rate_max: float = 6.0
    exit_fraction: float = EXIT_FRACTION
    spacing_m: float = 500.0
    start: datetime = DEFAULT_START
    peaks: tuple = (Peak(32.0, 4.0, 3.0), Peak(70.0, 5.0, 2.5))

    def network(self):
        return generate_grid_network(
            self.rows, self.cols, self.seed, spacing_m=self.spacing_m, exit_fraction=self.exit_fraction
        )

    def sources(self, network):
        """Every road receives exogenous demand with its own seeded base rate."""
        rng = XorShift64Star(self.seed + 1)
        span = self.base_rate_max - self.base_rate_min
        return {
            rid: DemandProfile(self.base_rate_min + span * rng.uniform(), self.peaks, self.noise_sd)
            for rid in network.road_ids
        }

    def run(self, emit_trajectories=False):
        net = self.network()
        return simulate_flows(net, self.sources(net), self.days, self.seed, self.start, emit_trajectories)

    def to_text(self):
        from .formats import format_timestamp

        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "peaks":
                lines.extend(f"peak={p.center_bin!r},{p.width_bins!r},{p.amplitude!r}" for p in value)
            elif f.name == "start":
                lines.append(f"start={format_timestamp(value)}")
            else:
                lines.append(f"{f.name}={value!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, source="<scenario>"):
        """Parse flat ``key=value`` lines; ``peak=center,width,amplitude`` repeats."""
        from .formats import parse_timestamp

        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        peaks = []
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = (s.strip() for s in line.partition("="))
            if not sep:
                raise ConfigurationError(f"{source}:{line_no}: expected key=value")
            try:
                if key == "peak":
                    c, w, a = (float(v) for v in val.split(","))
                    peaks.append(Peak(c, w, a))
                elif key == "start":
                    values["start"] = parse_timestamp(val)
                elif key in kinds and key != "peaks":
                    values[key] = int(val) if kinds[key] in (int, "int") else float(val)
                else:
                    raise ConfigurationError(f"unknown key {key!r}")
            except (ValueError, ConfigurationError) as exc:
                raise ConfigurationError(f"{source}:{line_no}: {exc}") from None
        if peaks:
            values["peaks"] = tuple(peaks)
        return cls(**values)

    def updated(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
