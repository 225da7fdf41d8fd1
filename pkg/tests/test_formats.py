from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from flowcast import formats
from flowcast.errors import ParseError
from flowcast.flows import FlowSeries, TrajectoryRecord
from flowcast.netsim import generate_grid_network
from flowcast.series import TimeSeries

T0 = datetime(2015, 3, 1, tzinfo=timezone.utc)


def test_timestamp_round_trip():
    assert formats.format_timestamp(T0) == "2015-03-01T00:00:00Z"
    when = T0 + timedelta(seconds=450, microseconds=25)
    assert formats.parse_timestamp(formats.format_timestamp(when)) == when
    assert formats.parse_timestamp("2015-03-01T01:00:00+01:00") == T0


def test_header_only_flows(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("road_id,bin_start,count\n")
    assert formats.read_flows(path) == {}


def test_flow_round_trip_96_bins(tmp_path):
    rng = np.random.default_rng(0)
    flows = {r: FlowSeries(r, TimeSeries(rng.integers(0, 50, 96).astype(float), T0)) for r in ("b", "a")}
    path = tmp_path / "f.csv"
    formats.write_flows(path, flows)
    back = formats.read_flows(path)
    assert list(back) == ["a", "b"]
    assert all(back[r].equals(flows[r]) for r in flows)


def write_rows(tmp_path, rows):
    path = tmp_path / "f.csv"
    path.write_text("road_id,bin_start,count\n" + "".join(r + "\n" for r in rows))
    return path


def test_negative_count_names_line(tmp_path):
    path = write_rows(tmp_path, ["a,2015-03-01T00:00:00Z,3", "a,2015-03-01T00:15:00Z,-2"])
    with pytest.raises(ParseError) as err:
        formats.read_flows(path)
    assert err.value.line == 3 and ":3:" in str(err.value)


@pytest.mark.parametrize(
    "rows",
    [
        ["a,2015-03-01T00:00:00Z,1.5"],
        ["a,2015-03-01T00:00:00Z,1", "a,2015-03-01T00:00:00Z,2"],
        ["a,2015-03-01T00:00:00Z,1", "a,2015-03-01T00:10:00Z,2"],
        ["a,yesterday,1"],
        ["a,2015-03-01T00:00:00Z"],
    ],
)
def test_malformed_rows(tmp_path, rows):
    with pytest.raises(ParseError):
        formats.read_flows(write_rows(tmp_path, rows))


def test_gap_needs_fill_policy(tmp_path):
    path = write_rows(tmp_path, ["a,2015-03-01T00:00:00Z,4", "a,2015-03-01T00:30:00Z,6"])
    with pytest.raises(ParseError):
        formats.read_flows(path)
    assert formats.read_flows(path, fill="linear")["a"].counts.tolist() == [4, 5, 6]


def test_trajectory_round_trip(tmp_path):
    recs = [
        TrajectoryRecord("v1", 1.25, -3.0, T0),
        TrajectoryRecord("v2", 0.1 + 0.2, 1e-7, T0 + timedelta(seconds=901)),
    ]
    path = tmp_path / "t.csv"
    formats.write_trajectories(path, recs)
    assert formats.read_trajectories(path) == recs


def test_network_round_trip(tmp_path):
    net = generate_grid_network(3, 2, seed=4)
    path = tmp_path / "n.txt"
    formats.write_network(path, net)
    assert formats.read_network(path) == net


def test_network_comments_and_errors(tmp_path):
    path = tmp_path / "n.txt"
    path.write_text("# two roads\n\nROAD,a,0,0,10,0\nROAD,b,10,0,20,0\nTURN,a,b,0.5\n")
    net = formats.read_network(path)
    assert net.roads["a"].successors == (("b", 0.5),)
    path.write_text("ROAD,a,0,0,10,0\nTURN,a,zz,0.5\n")
    with pytest.raises(ParseError):
        formats.read_network(path)
    path.write_text("ROAD,a,0,0,10\n")
    with pytest.raises(ParseError) as err:
        formats.read_network(path)
    assert err.value.line == 1
