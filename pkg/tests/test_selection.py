import math

import numpy as np
import pytest

from flowcast.arima import ArimaOrder, FitConfig, fit, simulate_arima
from flowcast.errors import InsufficientDataError, SelectionFailedError
from flowcast.selection import bic, grid_search
from flowcast.series import TimeSeries


def test_bic_hand_values():
    assert bic(0.0, 1, 1) == 0.0
    assert bic(-100.0, 3, 96) == pytest.approx(3 * math.log(96) + 200, abs=1e-12)
    assert bic(-100.0, 3, 96) == pytest.approx(213.693, abs=1e-3)


def test_bic_linear_in_k():
    assert bic(-5.0, 8, 50) - bic(-5.0, 4, 50) == pytest.approx(4 * math.log(50), abs=1e-12)


def test_singleton_grid():
    s = simulate_arima(ArimaOrder(1, 0, 0), (0.0, [0.8], [], 1.0), 300, 1)
    for d in (0, 1):
        res = grid_search(s, 0, 0, d)
        assert res.chosen == ArimaOrder(0, d, 0)
        assert len(res.table) == 1


def test_table_matches_direct_fits():
    """Recompute the BIC table by fitting each candidate on the common sample."""
    s = simulate_arima(ArimaOrder(1, 0, 1), (0.5, [0.6], [0.3], 1.0), 400, 2)
    res = grid_search(s, 2, 2, 0)
    assert len(res.table) == 9
    assert {e.n for e in res.table} == {400 - 4} and res.n == 396
    for e in res.table:
        m = fit(s, e.order, conditioning=4)
        assert e.bic == bic(m.log_likelihood, e.order.p + e.order.q + 2, m.n_effective)
    ok = [e.bic for e in res.table if not e.failed]
    assert min(ok) == [e.bic for e in res.table if e.order == res.chosen][0]


def test_white_noise_prefers_empty_model():
    hits = 0
    for seed in range(50):
        s = simulate_arima(ArimaOrder(0, 0, 0), (3.0, [], [], 1.0), 500, seed)
        hits += grid_search(s, 2, 2, 0).chosen == ArimaOrder(0, 0, 0)
    assert hits >= 40


def test_ar2_selects_p2():
    hits = 0
    for seed in range(10):
        s = simulate_arima(ArimaOrder(2, 0, 0), (0.0, [1.2, -0.5], [], 1.0), 1000, 500 + seed)
        hits += grid_search(s, 3, 2, 0).chosen.p == 2
    assert hits >= 8


def test_deterministic():
    s = simulate_arima(ArimaOrder(1, 1, 0), (0.0, [0.5], [], 1.0), 300, 3)
    a, b = grid_search(s, 2, 2, 1), grid_search(s, 2, 2, 1)
    assert a.to_dict() == b.to_dict()


def test_failed_candidates_are_recorded():
    s = simulate_arima(ArimaOrder(2, 0, 1), (0.0, [0.5, 0.2], [0.4], 1.0), 300, 4)
    res = grid_search(s, 2, 1, 0, FitConfig(max_optimizer_iterations=20, restarts=0))
    failed = [e for e in res.table if e.failed]
    assert failed and all(e.bic is None and e.failure == "fit-failed" for e in failed)
    assert {e.n for e in res.table} == {res.n}
    assert not [e for e in res.table if e.order == res.chosen][0].failed


def test_all_failed_raises():
    s = simulate_arima(ArimaOrder(2, 0, 1), (0.0, [0.5, 0.2], [0.4], 1.0), 300, 4)
    with pytest.raises(SelectionFailedError):
        grid_search(s, 2, 1, 0, FitConfig(max_optimizer_iterations=4, restarts=0))


def test_too_short_for_grid():
    with pytest.raises(InsufficientDataError):
        grid_search(TimeSeries(np.arange(8.0)), 5, 5, 0)
