import numpy as np
import pytest

from flowcast.optimize import nelder_mead


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def test_quadratic_minimum():
    target = np.array([1.5, -2.0, 0.25])
    res = nelder_mead(lambda x: float(np.sum((x - target) ** 2)), np.zeros(3), tol=1e-14, max_iter=5000)
    assert res.converged
    np.testing.assert_allclose(res.x, target, atol=1e-5)


def test_rosenbrock():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], tol=1e-14, max_iter=5000)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)
    assert res.evaluations > res.iterations


def test_deterministic():
    a = nelder_mead(rosenbrock, [0.3, 0.1])
    b = nelder_mead(rosenbrock, [0.3, 0.1])
    assert a.x.tolist() == b.x.tolist() and a.fun == b.fun and a.evaluations == b.evaluations


def test_iteration_cap_reports_non_convergence():
    res = nelder_mead(rosenbrock, [-1.2, 1.0], max_iter=5, tol=1e-14)
    assert not res.converged
    assert res.iterations == 5


def test_flat_function_converges_immediately():
    res = nelder_mead(lambda x: 3.0, [1.0, 2.0])
    assert res.converged and res.iterations == 0 and res.evaluations == 3
    assert res.fun == pytest.approx(3.0)
