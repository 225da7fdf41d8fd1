from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowcast.errors import AnchorMismatchError, DegenerateSeriesError, InsufficientDataError
from flowcast.series import TimeSeries, acf, anchors, difference, integrate, select_d

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def brute_acf(x, k):
    n = len(x)
    m = sum(x) / n
    num = sum((x[t] - m) * (x[t - k] - m) for t in range(k, n))
    den = sum((v - m) ** 2 for v in x)
    return num / den


def test_difference_constant(ts):
    assert difference(ts([5, 5, 5, 5]), 1).values.tolist() == [0, 0, 0]


def test_difference_zero_is_identity(ts):
    s = ts([3.0, -1.0, 2.5])
    assert difference(s, 0).equals(s)


def test_difference_twice_by_hand(ts):
    out = difference(ts([1, 3, 6, 10]), 2)
    assert out.values.tolist() == [1, 1]
    assert out.start_time == ts([1, 3, 6, 10]).time_at(2)


def test_difference_too_short(ts):
    with pytest.raises(InsufficientDataError):
        difference(ts([1, 2]), 2)


def test_integrate_constant(ts):
    assert integrate(ts([0, 0, 0]), [5], 1).values.tolist() == [5, 5, 5]


def test_integrate_d0_identity(ts):
    s = ts([1.0, 2.0])
    assert integrate(s, [], 0).equals(s)


def test_round_trip_by_hand(ts):
    x = ts([1, 3, 6, 10])
    back = integrate(difference(x, 2), anchors(x, 2), 2)
    assert back.values.tolist() == [6, 10]
    assert back.start_time == x.time_at(2)


def test_integrate_seed_length_checked(ts):
    with pytest.raises(AnchorMismatchError):
        integrate(ts([1, 2, 3]), [1], 2)


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(3, 60), elements=finite), st.integers(0, 2))
def test_round_trip_property(values, d):
    x = TimeSeries(values)
    diffed = difference(x, d)
    assert len(diffed) == len(x) - d
    back = integrate(diffed, anchors(x, d), d)
    np.testing.assert_allclose(back.values, values[d:], rtol=0, atol=1e-9 * max(1.0, np.abs(values).max()) * 8)


def test_acf_alternating_matches_brute_force(ts):
    x = [(-1.0) ** t for t in range(100)]
    r = acf(ts(x), 3)
    assert r[0] == pytest.approx(-0.99, abs=1e-12)
    for k in range(1, 4):
        assert r[k - 1] == pytest.approx(brute_acf(x, k), abs=1e-12)


def test_acf_white_noise_small():
    x = np.random.default_rng(1).normal(size=10000)
    assert abs(acf(TimeSeries(x), 1)[0]) < 0.05


def test_acf_constant_raises(ts):
    with pytest.raises(DegenerateSeriesError):
        acf(ts([2.0] * 10), 1)


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(5, 40), elements=st.floats(-100, 100)), st.integers(1, 4))
def test_acf_length_and_oracle(values, lag):
    if np.ptp(values) < 1e-6:
        return
    r = acf(TimeSeries(values), lag)
    assert r.shape == (lag,)
    np.testing.assert_allclose(r, [brute_acf(list(values), k) for k in range(1, lag + 1)], atol=1e-9)


def test_select_d_white_noise():
    x = 20 + np.random.default_rng(3).normal(size=500)
    assert select_d(TimeSeries(x)) == 0


def test_select_d_trend():
    t = np.arange(500, dtype=float)
    x = t + 0.1 * np.random.default_rng(4).normal(size=500)
    assert select_d(TimeSeries(x), max_d=2) == 1


def test_select_d_cap_zero(ts):
    assert select_d(ts(np.arange(50.0) ** 2), max_d=0) == 0


@settings(max_examples=100, deadline=None)
@given(arrays(float, st.integers(8, 50), elements=st.floats(-1e3, 1e3)))
def test_select_d_monotone_in_cap(values):
    s = TimeSeries(values)
    got = [select_d(s, m) for m in range(3)]
    assert got == sorted(got)
    assert all(g <= m for m, g in enumerate(got))


def test_timeseries_rejects_nan():
    with pytest.raises(ValueError):
        TimeSeries([1.0, float("nan")])


def test_timeseries_grid():
    start = datetime(2015, 3, 1, tzinfo=timezone.utc)
    s = TimeSeries([1, 2, 3], start)
    assert s.end_time == start + timedelta(seconds=2700)
    assert s.index_of(start + timedelta(seconds=900)) == 1
    assert s.slice(1).values.tolist() == [2, 3]
    assert s.slice(1).start_time == s.time_at(1)
    with pytest.raises(ValueError):
        s.values[0] = 9
